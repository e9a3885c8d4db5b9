"""Maximum-likelihood mixture fitting by expectation-maximization.

Seeding is k-means++ followed by a single k-means update pass; covariances use
the 1/n convention plus an optional ridge.  Everything is deterministic for a
fixed seed, including multi-restart runs.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import logsumexp

from .exceptions import DegenerateComponent, SingularComponent, TooFewPoints
from .gaussians import Gaussian
from .mixtures import Gmm
from .validation import as_points

# Ridge retry for a covariance that loses positive definiteness to roundoff.
_FACTOR_JITTER = 1e-9


@dataclass
class EmConfig:
    """Fitting options; ``cov_reg=None`` picks 1e-6 times the mean feature variance."""

    n_components: int
    max_iters: int = 200
    loglik_rel_tol: float = 1e-8
    n_restarts: int = 1
    cov_reg: float = None
    seed: int = 0

    def __post_init__(self):
        if self.n_components < 1 or self.max_iters < 1 or self.n_restarts < 1:
            raise ValueError("n_components, max_iters and n_restarts must be >= 1")
        if self.loglik_rel_tol <= 0:
            raise ValueError("loglik_rel_tol must be > 0")
        if self.cov_reg is not None and self.cov_reg < 0:
            raise ValueError("cov_reg must be >= 0")


def fit_em(points, config):
    """Fit a Gaussian mixture to points; returns the best restart's mixture."""
    gmm, _ = fit_em_details(points, config)
    return gmm


def fit_em_details(points, config):
    """Like :func:`fit_em` but also returns per-restart log-likelihood history.

    Returns
    -------
    gmm : Gmm
    info : dict
        ``log_likelihoods`` is the winning restart's per-iteration total
        log-likelihood (non-decreasing); ``restart_log_likelihoods`` holds the
        final value of every restart.
    """
    x = as_points(points)
    n, d = x.shape
    k = config.n_components
    if n < k:
        raise TooFewPoints(f"too few points: {n} points for {k} components")
    reg = config.cov_reg
    if reg is None:
        reg = 1e-6 * float(np.mean(np.var(x, axis=0)))

    root = np.random.default_rng(config.seed)
    seeds = root.integers(0, 2**63 - 1, size=config.n_restarts)
    best = None
    best_hist = None
    finals = []
    for s in seeds:
        params, hist = _em_single(x, k, reg, config, np.random.default_rng(int(s)))
        finals.append(hist[-1])
        if best is None or hist[-1] > best_hist[-1]:
            best = params
            best_hist = hist

    weights, means, covs = best
    comps = [Gaussian(means[j], covs[j]) for j in range(k)]
    gmm = Gmm(np.maximum(weights, 1e-300), comps)
    info = {
        "log_likelihoods": np.asarray(best_hist),
        "restart_log_likelihoods": np.asarray(finals),
        "cov_reg": reg,
    }
    return gmm, info


def _kmeanspp_seeds(x, k, rng):
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total > 0:
            probs = d2 / total
        else:
            probs = np.full(n, 1.0 / n)
        centers[j] = x[rng.choice(n, p=probs)]
        d2 = np.minimum(d2, np.sum((x - centers[j]) ** 2, axis=1))
    return centers


def _init_params(x, k, reg, rng):
    n, d = x.shape
    centers = _kmeanspp_seeds(x, k, rng)
    dist = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    labels = dist.argmin(axis=1)
    weights = np.empty(k)
    means = centers.copy()
    covs = np.empty((k, d, d))
    global_cov = np.cov(x, rowvar=False, bias=True).reshape(d, d)
    for j in range(k):
        mask = labels == j
        cnt = int(mask.sum())
        weights[j] = max(cnt, 1)
        if cnt > 0:
            means[j] = x[mask].mean(axis=0)
        if cnt > d:
            diff = x[mask] - means[j]
            covs[j] = diff.T @ diff / cnt
        else:
            covs[j] = global_cov
        covs[j] += reg * np.eye(d)
    weights /= weights.sum()
    return weights, means, covs


def _log_gauss_all(x, means, covs):
    n, d = x.shape
    out = np.empty((n, means.shape[0]))
    for j in range(means.shape[0]):
        cov = covs[j]
        try:
            factor = cho_factor(cov, lower=True)
        except np.linalg.LinAlgError:
            ridge = _FACTOR_JITTER * max(1.0, np.trace(cov) / d)
            try:
                factor = cho_factor(cov + ridge * np.eye(d), lower=True)
            except np.linalg.LinAlgError:
                raise SingularComponent(
                    f"component {j} covariance cannot be factorized during EM"
                ) from None
        diff = x - means[j]
        maha = np.sum(diff * cho_solve(factor, diff.T).T, axis=1)
        logdet = 2.0 * np.log(np.diag(factor[0])).sum()
        out[:, j] = -0.5 * (maha + logdet + d * np.log(2.0 * np.pi))
    return out


def _em_single(x, k, reg, config, rng):
    n, d = x.shape
    weights, means, covs = _init_params(x, k, reg, rng)
    history = []
    for _ in range(config.max_iters):
        joint = _log_gauss_all(x, means, covs) + np.log(weights)
        norm = logsumexp(joint, axis=1)
        history.append(float(norm.sum()))
        resp = np.exp(joint - norm[:, None])

        nk = resp.sum(axis=0)
        if reg == 0.0 and np.any(nk < d + 1):
            j = int(np.argmin(nk))
            raise DegenerateComponent(
                f"component {j} captures {nk[j]:.2f} effective points "
                f"(< {d + 1}) with cov_reg=0"
            )
        nk = np.maximum(nk, 1e-300)
        weights = nk / n
        means = resp.T @ x / nk[:, None]
        for j in range(k):
            diff = x - means[j]
            covs[j] = (diff * resp[:, j : j + 1]).T @ diff / nk[j] + reg * np.eye(d)

        if len(history) > 1:
            gain = history[-1] - history[-2]
            if gain <= config.loglik_rel_tol * max(1.0, abs(history[-2])):
                break
    joint = _log_gauss_all(x, means, covs) + np.log(weights)
    history.append(float(logsumexp(joint, axis=1).sum()))
    return (weights, means, covs), history
