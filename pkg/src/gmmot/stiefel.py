"""Optimization over matrices with orthonormal columns.

``embedded_w2_objective`` is the coupled transport cost, as a function of the
embedding P, of matching Gaussian families across dimensions:

    J(P) = sum_{k,l} w[k,l] ( ||m0_k - P m1_l||^2 + tr S0_k + tr S1_l
                              - 2 tr (S1_l^{1/2} P' S0_k P S1_l^{1/2})^{1/2} )

For orthonormal P this equals the w-weighted sum of squared Bures-Wasserstein
distances between the first family and the embedded second family; the
extension off the manifold keeps the embedded trace term fixed, which is what
the analytic gradient below differentiates.
"""

import warnings

import numpy as np

from .discrete_ot import SolverConfig
from .exceptions import DimensionOrder, RankDeficientP, SingularInnerMatrix
from .gaussians import psd_sqrt
from .validation import as_float_array

STIEFEL_TOL = 1e-10


class RankDeficiencyWarning(UserWarning):
    """The matrix being projected had deficient rank; missing directions were
    completed by the SVD routine's deterministic ordering."""


def check_stiefel(p, tol=STIEFEL_TOL):
    p = as_float_array(p, "P")
    if p.ndim != 2:
        raise ValueError("P must be a matrix")
    gram = p.T @ p
    if np.abs(gram - np.eye(p.shape[1])).max() > tol:
        raise ValueError("P does not have orthonormal columns within tolerance")
    return p


def project_stiefel(m):
    """Nearest matrix with orthonormal columns: U V' from the thin SVD of m."""
    m = as_float_array(m, "matrix")
    if m.ndim != 2:
        raise ValueError("input must be a matrix")
    d, dp = m.shape
    if d < dp:
        raise DimensionOrder(f"cannot project a {d}x{dp} matrix with d < d'")
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    if s.size and s[-1] <= 1e-10 * max(s[0], 1e-300):
        warnings.warn(
            "projected matrix is rank deficient; completion follows SVD order",
            RankDeficiencyWarning,
            stacklevel=2,
        )
    return u @ vt


class EmbeddedFamilies:
    """Precomputed arrays for one (source family, target family) pair.

    Building the mean/covariance stacks and the target covariance square
    roots once makes repeated objective and gradient evaluations cheap inside
    the solvers.
    """

    def __init__(self, comps0, comps1):
        self.m0 = np.array([c.mean for c in comps0])
        self.s0 = np.array([c.cov for c in comps0])
        self.m1 = np.array([c.mean for c in comps1])
        self.s1 = np.array([c.cov for c in comps1])
        self.s1h = np.array([psd_sqrt(c) for c in self.s1])
        self.tr0 = np.trace(self.s0, axis1=1, axis2=2)
        self.tr1 = np.trace(self.s1, axis1=1, axis2=2)
        self.d = self.m0.shape[1]
        self.dp = self.m1.shape[1]
        if self.d < self.dp:
            raise DimensionOrder(
                f"source dimension {self.d} is below target dimension {self.dp}"
            )

    def _check(self, p, omega=None):
        p = as_float_array(p, "P")
        if p.shape != (self.d, self.dp):
            raise ValueError(f"P must have shape {(self.d, self.dp)}, got {p.shape}")
        if omega is None:
            return p, None
        omega = as_float_array(omega, "omega")
        if omega.shape != (self.m0.shape[0], self.m1.shape[0]):
            raise ValueError(
                f"omega must have shape {(self.m0.shape[0], self.m1.shape[0])}, "
                f"got {omega.shape}"
            )
        return p, omega

    def _inner_stack(self, p):
        mid = np.einsum("ab,kbc,cd->kad", p.T, self.s0, p)
        inner = np.einsum("lab,kbc,lcd->klad", self.s1h, mid, self.s1h)
        return 0.5 * (inner + np.swapaxes(inner, -1, -2))

    def pair_costs(self, p):
        p, _ = self._check(p)
        proj1 = self.m1 @ p.T
        diff2 = ((self.m0[:, None, :] - proj1[None, :, :]) ** 2).sum(axis=2)
        vals = np.linalg.eigvalsh(self._inner_stack(p))
        cross = np.sqrt(np.clip(vals, 0.0, None)).sum(axis=-1)
        return diff2 + self.tr0[:, None] + self.tr1[None, :] - 2.0 * cross

    def objective(self, p, omega):
        p, omega = self._check(p, omega)
        return float(np.sum(omega * self.pair_costs(p)))

    def gradient(self, p, omega):
        p, omega = self._check(p, omega)
        sv = np.linalg.svd(p, compute_uv=False)
        if sv[-1] <= 1e-10 * max(sv[0], 1e-300):
            raise RankDeficientP("P has lost column rank; the inner matrix is singular")

        col_w = omega.sum(axis=0)
        term_mean = p @ ((self.m1.T * col_w) @ self.m1) - self.m0.T @ omega @ self.m1

        inner = self._inner_stack(p)
        vals, vecs = np.linalg.eigh(inner)
        # Floor the spectrum only where it has genuinely collapsed; elsewhere
        # the inverse square root is exact.
        traces = np.trace(inner, axis1=-2, axis2=-1)
        floor = 1e-9 * np.maximum(1.0, traces / self.dp)
        contributing = omega > 1e-15
        if np.any(contributing & (vals[..., -1] <= 0.0)):
            raise SingularInnerMatrix(
                "inner matrix vanished for a contributing component pair; "
                "cannot form its inverse square root"
            )
        vals = np.maximum(vals, floor[..., None])
        inv_root = np.einsum("klab,klb,kldb->klad", vecs, 1.0 / np.sqrt(vals), vecs)
        ring = np.einsum("lab,klbc,lcd->klad", self.s1h, inv_root, self.s1h)
        term_cov = np.einsum("kl,kab,klbc->ac", omega, self.s0 @ p, ring)
        return 2.0 * (term_mean - term_cov)


def embedded_w2_objective(p, omega, comps0, comps1):
    """Evaluate J(P); see the module docstring."""
    return EmbeddedFamilies(comps0, comps1).objective(p, omega)


def embedded_w2_cost_matrix(p, comps0, comps1):
    """Pairwise squared distances between family 0 and the P-embedded family 1."""
    fam = EmbeddedFamilies(comps0, comps1)
    return np.clip(fam.pair_costs(p), 0.0, None)


def embedded_w2_gradient(p, omega, comps0, comps1):
    """Analytic gradient of :func:`embedded_w2_objective` in P.

    The spectrum of the inner matrix is floored near collapse, so the result
    stays finite for rank-deficient covariances.
    """
    return EmbeddedFamilies(comps0, comps1).gradient(p, omega)


def pgd_stiefel(objective, gradient, p0, config=None):
    """Projected gradient descent on the set of orthonormal-column matrices.

    Tries steps of ``config.step_size_eta``, halving up to 20 times whenever a
    step fails to decrease the objective, and returns the best iterate seen.
    """
    config = config or SolverConfig()
    p = check_stiefel(p0, tol=1e-8)
    f = objective(p)
    best_p, best_f = p, f
    for _ in range(config.inner_pgd_iters):
        g = gradient(p)
        step = config.step_size_eta
        cand, fc = None, None
        for _ in range(21):
            trial = project_stiefel(p - step * g)
            ft = objective(trial)
            if ft < f:
                cand, fc = trial, ft
                break
            step *= 0.5
        if cand is None:
            break
        gain = f - fc
        p, f = cand, fc
        if f < best_f:
            best_p, best_f = p, f
        if gain <= config.objective_rel_tol * max(1.0, abs(f)):
            break
    return best_p
