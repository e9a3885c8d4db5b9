"""Gaussian distributions, Bures-Wasserstein geometry and affine transport maps.

The squared 2-Wasserstein distance between two Gaussians has the closed form

    W2(N(m0, S0), N(m1, S1))^2 = ||m0 - m1||^2
        + trace(S0) + trace(S1) - 2 trace((S0^{1/2} S1 S0^{1/2})^{1/2})

and, for a non-singular source, the optimal map is affine:

    T(x) = m1 + A (x - m0),   A = S0^{-1/2} (S0^{1/2} S1 S0^{1/2})^{1/2} S0^{-1/2}.

When the target lives in a lower dimension d' <= d and both Gaussians are
centered, the embedding-invariant counterpart optimizes over matrices with
orthonormal columns and is again closed form in the sorted covariance spectra.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    DegenerateSource,
    DimensionMismatch,
    DimensionOrder,
    NotPSD,
    SingularSourceCovariance,
)
from .validation import as_float_array, check_symmetric

# Eigenvalues above -NEG_EIG_REL * trace/d are treated as roundoff and clamped.
NEG_EIG_REL = 1e-10
# Ridge added when a positive definite covariance is required.
JITTER_REL = 1e-9


def _neg_tol(m):
    d = m.shape[0]
    return NEG_EIG_REL * max(1.0, abs(np.trace(m))) / d


def jitter_of(cov):
    """Ridge magnitude used to regularize a covariance before inversion."""
    d = cov.shape[0]
    return JITTER_REL * max(1.0, np.trace(cov) / d)


def sorted_eigh(m):
    """Eigendecomposition with eigenvalues sorted non-increasing.

    Each eigenvector's sign is fixed so that its largest-magnitude entry is
    positive, which makes the factorization deterministic for simple spectra.

    Returns
    -------
    vals : ndarray, shape (d,)
    vecs : ndarray, shape (d, d)
        Columns are the eigenvectors matching ``vals``.
    """
    vals, vecs = np.linalg.eigh(m)
    vals = vals[::-1].copy()
    vecs = vecs[:, ::-1].copy()
    for j in range(vecs.shape[1]):
        i = np.argmax(np.abs(vecs[:, j]))
        if vecs[i, j] < 0:
            vecs[:, j] = -vecs[:, j]
    return vals, vecs


def psd_sqrt(m):
    """Symmetric PSD square root, clamping roundoff-negative eigenvalues to zero."""
    m = check_symmetric(m, "matrix")
    vals, vecs = np.linalg.eigh(m)
    if vals.size and vals[0] < -_neg_tol(m):
        raise NotPSD(f"matrix has eigenvalue {vals[0]:.3e} below the PSD tolerance")
    root = (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T
    return 0.5 * (root + root.T)


def _trace_sqrt_product(s0_half, s1):
    """trace((S0^{1/2} S1 S0^{1/2})^{1/2}) via the eigenvalues of the inner product."""
    inner = s0_half @ s1 @ s0_half
    vals = np.linalg.eigvalsh(0.5 * (inner + inner.T))
    return np.sqrt(np.clip(vals, 0.0, None)).sum()


@dataclass
class Gaussian:
    """A Gaussian N(mean, cov) with a validated symmetric PSD covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        self.mean = as_float_array(self.mean, "mean")
        if self.mean.ndim != 1:
            raise DimensionMismatch("mean must be a vector")
        cov = check_symmetric(self.cov, "cov")
        if cov.shape[0] != self.mean.shape[0]:
            raise DimensionMismatch(
                f"mean has dimension {self.mean.shape[0]} but cov is {cov.shape}"
            )
        vals, vecs = np.linalg.eigh(cov)
        if vals.size and vals[0] < -_neg_tol(cov):
            raise NotPSD(f"cov has eigenvalue {vals[0]:.3e} below the PSD tolerance")
        if vals.size and vals[0] < 0:
            cov = (vecs * np.clip(vals, 0.0, None)) @ vecs.T
            cov = 0.5 * (cov + cov.T)
        self.cov = cov

    @property
    def dim(self):
        return self.mean.shape[0]


@dataclass
class AffineMap:
    """The affine map x -> linear @ x + offset, possibly across dimensions."""

    linear: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        self.linear = as_float_array(self.linear, "linear")
        self.offset = as_float_array(self.offset, "offset")
        if self.linear.ndim != 2 or self.offset.ndim != 1:
            raise DimensionMismatch("linear must be a matrix and offset a vector")
        if self.linear.shape[0] != self.offset.shape[0]:
            raise DimensionMismatch(
                f"linear maps into dimension {self.linear.shape[0]} "
                f"but offset has dimension {self.offset.shape[0]}"
            )

    @property
    def dim_in(self):
        return self.linear.shape[1]

    @property
    def dim_out(self):
        return self.linear.shape[0]

    def __call__(self, x):
        """Apply to a single point (d_in,) or a batch (n, d_in)."""
        x = as_float_array(x, "x")
        if x.ndim == 1:
            if x.shape[0] != self.dim_in:
                raise DimensionMismatch(
                    f"point has dimension {x.shape[0]}, map expects {self.dim_in}"
                )
            return self.linear @ x + self.offset
        if x.ndim == 2:
            if x.shape[1] != self.dim_in:
                raise DimensionMismatch(
                    f"points have dimension {x.shape[1]}, map expects {self.dim_in}"
                )
            return x @ self.linear.T + self.offset
        raise DimensionMismatch("x must be 1-d or 2-d")

    def compose(self, inner):
        """The map x -> self(inner(x))."""
        if inner.dim_out != self.dim_in:
            raise DimensionMismatch(
                f"cannot compose: inner maps into {inner.dim_out}, "
                f"outer expects {self.dim_in}"
            )
        return AffineMap(
            self.linear @ inner.linear, self.linear @ inner.offset + self.offset
        )


@dataclass
class EwGaussianSolution:
    """Optimal value, embedding and map for the closed-form embedded problem.

    ``p_star`` has orthonormal columns, ``map`` sends the source space onto the
    target space, and ``sign_diag`` records the per-axis sign choice (the
    optimal value is the same for every choice).
    """

    value: float
    p_star: np.ndarray
    map: AffineMap
    sign_diag: np.ndarray = field(default=None)


def w2_gaussian_sq(g0, g1):
    """Squared 2-Wasserstein distance between two Gaussians of equal dimension."""
    if g0.dim != g1.dim:
        raise DimensionMismatch(f"dimensions differ: {g0.dim} vs {g1.dim}")
    dm = g0.mean - g1.mean
    s0_half = psd_sqrt(g0.cov)
    cross = _trace_sqrt_product(s0_half, g1.cov)
    val = dm @ dm + np.trace(g0.cov) + np.trace(g1.cov) - 2.0 * cross
    return max(val, 0.0)


def w2_gaussian_map(g0, g1):
    """Optimal transport map from g0 onto g1 as an :class:`AffineMap`.

    The source covariance is regularized with a small ridge before inversion,
    so the push-forward matches g1 up to that regularization error.
    """
    if g0.dim != g1.dim:
        raise DimensionMismatch(f"dimensions differ: {g0.dim} vs {g1.dim}")
    a = bures_map_matrix(g0.cov, g1.cov)
    return AffineMap(a, g1.mean - a @ g0.mean)


def bures_map_matrix(cov0, cov1):
    """Linear part S0^{-1/2} (S0^{1/2} S1 S0^{1/2})^{1/2} S0^{-1/2} of the optimal map.

    ``cov1`` may be rank deficient; ``cov0`` is ridge-regularized.
    """
    cov0 = check_symmetric(cov0, "cov0")
    vals, vecs = np.linalg.eigh(cov0)
    if vals.size and vals[0] < -_neg_tol(cov0):
        raise NotPSD(f"cov0 has eigenvalue {vals[0]:.3e} below the PSD tolerance")
    vals = np.clip(vals, 0.0, None) + jitter_of(cov0)
    root = (vecs * np.sqrt(vals)) @ vecs.T
    inv_root = (vecs / np.sqrt(vals)) @ vecs.T
    if not np.all(np.isfinite(inv_root)):
        raise SingularSourceCovariance("cov0 is singular even after regularization")
    mid = psd_sqrt(root @ cov1 @ root)
    a = inv_root @ mid @ inv_root
    return 0.5 * (a + a.T)


def ew2_gaussian_closed_form(g0, g1, signs=None):
    """Closed-form embedded distance between centered Gaussians with dim(g0) >= dim(g1).

    The value is

        trace(S0) + trace(S1) - 2 sum_i sqrt(eig_i(S0) eig_i(S1)),  i < dim(g1)

    with both spectra sorted non-increasing.  ``signs`` optionally flips the
    matched eigendirections; any choice attains the same value.
    """
    d, dp = g0.dim, g1.dim
    if d < dp:
        raise DimensionOrder(f"source dimension {d} is below target dimension {dp}")
    if np.abs(g0.mean).max(initial=0.0) > 1e-12 or np.abs(g1.mean).max(initial=0.0) > 1e-12:
        raise ValueError("both Gaussians must be centered (means zero within 1e-12)")
    vals0, p0 = sorted_eigh(g0.cov)
    vals1, p1 = sorted_eigh(g1.cov)
    if vals0[-1] <= 0.0:
        raise DegenerateSource("source covariance must be non-singular")
    if signs is None:
        signs = np.ones(dp)
    else:
        signs = as_float_array(signs, "signs")
        if signs.shape != (dp,) or not np.all(np.abs(signs) == 1.0):
            raise ValueError(f"signs must be a vector of {dp} entries in {{-1, +1}}")

    top0 = vals0[:dp]
    value = vals0.sum() + vals1.sum() - 2.0 * np.sqrt(top0 * np.clip(vals1, 0.0, None)).sum()
    value = max(value, 0.0)

    p_star = (p0[:, :dp] * signs) @ p1.T
    scale = signs * np.sqrt(np.clip(vals1, 0.0, None) / top0)
    linear = (p1 * scale) @ p0[:, :dp].T
    amap = AffineMap(linear, np.zeros(dp))
    return EwGaussianSolution(float(value), p_star, amap, signs)
