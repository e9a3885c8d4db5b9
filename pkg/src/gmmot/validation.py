"""Input validation helpers shared across the package."""

import numpy as np

from .exceptions import DimensionMismatch, InfeasibleWeights, NotSymmetric

SIMPLEX_TOL = 1e-9


def as_float_array(x, name="array"):
    out = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains non-finite entries")
    return out


def as_points(x, name="points"):
    """Coerce to an (n, d) float array; a 1-d input becomes a single row."""
    out = as_float_array(x, name)
    if out.ndim == 1:
        out = out[None, :]
    if out.ndim != 2:
        raise DimensionMismatch(f"{name} must be 2-d, got shape {out.shape}")
    return out


def check_square(m, name="matrix"):
    m = as_float_array(m, name)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {m.shape}")
    return m


def check_symmetric(m, name="matrix", tol=1e-12):
    m = check_square(m, name)
    scale = 1.0 + np.abs(m).max() if m.size else 1.0
    if np.abs(m - m.T).max() > tol * scale:
        raise NotSymmetric(f"{name} is not symmetric within {tol} relative tolerance")
    return 0.5 * (m + m.T)


def check_simplex(w, name="weights", tol=SIMPLEX_TOL):
    """Validate a strictly positive weight vector summing to one."""
    w = as_float_array(w, name)
    if w.ndim != 1:
        raise DimensionMismatch(f"{name} must be 1-d")
    if w.size == 0 or np.any(w <= 0):
        raise ValueError(f"{name} must be non-empty with strictly positive entries")
    if abs(w.sum() - 1.0) > tol:
        raise ValueError(f"{name} must sum to 1 within {tol}, got {w.sum()!r}")
    return w


def check_marginal_pair(a, b, tol=SIMPLEX_TOL):
    """Validate two nonnegative weight vectors carrying the same total mass."""
    a = as_float_array(a, "a")
    b = as_float_array(b, "b")
    if a.ndim != 1 or b.ndim != 1:
        raise DimensionMismatch("marginal weights must be 1-d")
    if np.any(a < 0) or np.any(b < 0):
        raise ValueError("marginal weights must be nonnegative")
    if abs(a.sum() - b.sum()) > tol:
        raise InfeasibleWeights(
            f"weight sums differ by {abs(a.sum() - b.sum()):.3e} (> {tol})"
        )
    return a, b
