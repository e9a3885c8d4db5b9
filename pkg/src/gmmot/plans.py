"""Point-level maps derived from a mixture coupling.

A coupling of two mixtures lifts to a plan on points by transporting each
component pair with its closed-form Gaussian map.  The barycentric map

    T_mean(x) = sum_{k,l} w[k,l] p_k(x) T_{k,l}(x) / sum_k a_k p_k(x)

averages those maps with the source component responsibilities; it is smooth
but not necessarily a bijection, so matching adds a nearest-neighbor
reprojection onto the actual target points.
"""

from dataclasses import dataclass

import numpy as np

from .discrete_ot import Coupling
from .exceptions import DimensionMismatch, ZeroDensity
from .gaussians import AffineMap, bures_map_matrix
from .mixtures import component_log_densities, mixture_mean
from .stiefel import check_stiefel
from .validation import as_float_array, as_points

_CHUNK = 4096


@dataclass
class MixturePlan:
    """Pairwise transport maps from source components onto target components.

    ``pair_linear[k, l]`` and ``pair_offset[k, l]`` give the affine map of
    the (k, l) component pair; ``p`` and ``b`` hold the global isometry used
    to cross dimensions, if any.
    """

    source: object
    target: object
    coupling: Coupling
    pair_linear: np.ndarray
    pair_offset: np.ndarray
    p: np.ndarray = None
    b: np.ndarray = None

    def pair_map(self, k, l):
        return AffineMap(self.pair_linear[k, l], self.pair_offset[k, l])


def build_plan(g0, g1, omega, p=None, b=None):
    """Assemble the component-pair maps for a coupling of g0 onto g1.

    Without ``p`` the mixtures must share a dimension and each pair uses the
    direct Gaussian transport map.  With ``p`` (orthonormal columns embedding
    g1's space into g0's), each source component is transported onto the
    embedded target component and the result is pulled back to g1's space;
    ``b`` defaults to mean(g0) - P mean(g1) and is validated against it.
    """
    plan = omega.plan if isinstance(omega, Coupling) else as_float_array(omega, "omega")
    k, l = g0.n_components, g1.n_components
    if plan.shape != (k, l):
        raise DimensionMismatch(f"omega must have shape {(k, l)}, got {plan.shape}")
    merr = max(
        np.abs(plan.sum(axis=1) - g0.weights).max(),
        np.abs(plan.sum(axis=0) - g1.weights).max(),
    )
    if merr > 1e-8:
        raise ValueError(f"omega marginals deviate from the weights by {merr:.3e}")

    d0, d1 = g0.dim, g1.dim
    if p is None:
        if d0 != d1:
            raise DimensionMismatch(
                f"dimensions {d0} and {d1} differ; a cross-dimensional plan needs P"
            )
        if b is not None:
            raise ValueError("b was given without P")
    else:
        p = check_stiefel(p)
        if p.shape != (d0, d1):
            raise DimensionMismatch(f"P must have shape {(d0, d1)}, got {p.shape}")
        b_ref = mixture_mean(g0) - p @ mixture_mean(g1)
        if b is None:
            b = b_ref
        else:
            b = as_float_array(b, "b")
            if np.abs(b - b_ref).max() > 1e-10:
                raise ValueError(
                    "b is inconsistent with mean(g0) - P mean(g1) beyond 1e-10"
                )

    pair_linear = np.empty((k, l, d1, d0))
    pair_offset = np.empty((k, l, d1))
    for i, c0 in enumerate(g0.components):
        for j, c1 in enumerate(g1.components):
            if p is None:
                lin = bures_map_matrix(c0.cov, c1.cov)
            else:
                lin = p.T @ bures_map_matrix(c0.cov, p @ c1.cov @ p.T)
            pair_linear[i, j] = lin
            pair_offset[i, j] = c1.mean - lin @ c0.mean
    coup = omega if isinstance(omega, Coupling) else Coupling(plan, float("nan"), {})
    return MixturePlan(g0, g1, coup, pair_linear, pair_offset, p, b)


def t_mean(plan, x, on_underflow="fallback"):
    """Barycentric transport of points under a mixture plan.

    Accepts a single point or a batch; responsibilities are computed in log
    space, so where the absolute density underflows the map degrades smoothly
    to the maximum-responsibility component's row of maps.  With
    ``on_underflow="raise"`` such points raise :class:`ZeroDensity` instead.
    """
    if on_underflow not in ("fallback", "raise"):
        raise ValueError("on_underflow must be 'fallback' or 'raise'")
    single = np.asarray(x).ndim == 1
    pts = as_points(x)
    if pts.shape[1] != plan.source.dim:
        raise DimensionMismatch(
            f"points have dimension {pts.shape[1]}, plan source has {plan.source.dim}"
        )
    omega = plan.coupling.plan
    weights = plan.source.weights
    # Per-source-component aggregation of the pair maps.
    agg_lin = np.einsum("kl,klij->kij", omega, plan.pair_linear)
    agg_off = np.einsum("kl,kli->ki", omega, plan.pair_offset)

    out = np.empty((pts.shape[0], plan.target.dim))
    for start in range(0, pts.shape[0], _CHUNK):
        chunk = pts[start : start + _CHUNK]
        logp = component_log_densities(plan.source, chunk)
        if on_underflow == "raise":
            dens = np.exp(logp + np.log(weights)).sum(axis=1)
            if np.any(dens < 1e-300):
                i = int(np.argmax(dens < 1e-300))
                raise ZeroDensity(
                    f"mixture density underflowed at point index {start + i}"
                )
        shift = logp.max(axis=1, keepdims=True)
        q = np.exp(logp - shift)
        denom = q @ weights
        mapped = np.einsum("nk,kij,nj->ni", q, agg_lin, chunk) + q @ agg_off
        out[start : start + _CHUNK] = mapped / denom[:, None]
    return out[0] if single else out


def distortion_score(points, truth):
    """Mean squared distance between corresponding rows."""
    a = as_points(points, "points")
    t = as_points(truth, "truth")
    if a.shape != t.shape:
        raise DimensionMismatch(f"shapes differ: {a.shape} vs {t.shape}")
    return float(np.mean(((a - t) ** 2).sum(axis=1)))


@dataclass
class MatchResult:
    """Assignment of each source point to a target point index."""

    assignment: np.ndarray
    mapped: np.ndarray
    distortion: float = None


def match_points(plan, xs, ys, truth=None):
    """Map source points and assign each to its nearest target point.

    Nearest-neighbor ties resolve to the smallest target index.  When
    ``truth`` (the ground-truth correspondent of every source point) is
    given, the distortion of the assigned points against it is reported.
    """
    xs = as_points(xs, "xs")
    ys = as_points(ys, "ys")
    if ys.shape[1] != plan.target.dim:
        raise DimensionMismatch(
            f"ys have dimension {ys.shape[1]}, plan target has {plan.target.dim}"
        )
    mapped = t_mean(plan, xs)
    assignment = np.empty(xs.shape[0], dtype=np.int64)
    for start in range(0, xs.shape[0], 1024):
        chunk = mapped[start : start + 1024]
        best_d2 = np.full(chunk.shape[0], np.inf)
        best_idx = np.zeros(chunk.shape[0], dtype=np.int64)
        for ys_start in range(0, ys.shape[0], 8192):
            block = ys[ys_start : ys_start + 8192]
            d2 = ((chunk[:, None, :] - block[None, :, :]) ** 2).sum(axis=2)
            idx = d2.argmin(axis=1)
            val = d2[np.arange(chunk.shape[0]), idx]
            better = val < best_d2
            best_d2[better] = val[better]
            best_idx[better] = idx[better] + ys_start
        assignment[start : start + 1024] = best_idx
    distortion = None
    if truth is not None:
        distortion = distortion_score(ys[assignment], truth)
    return MatchResult(assignment, mapped, distortion)
