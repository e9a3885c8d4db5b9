"""Finite Gaussian mixtures: container, density, sampling, affine images, JSON I/O."""

import json
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import logsumexp

from .exceptions import DimensionMismatch, SingularComponent
from .gaussians import AffineMap, Gaussian, jitter_of, sorted_eigh
from .validation import as_points, check_simplex

# Components closer than this in (mean, cov) are collapsed into one.
MERGE_TOL = 1e-12


@dataclass
class Gmm:
    """A mixture sum_k weights[k] N(means[k], covs[k]) in a common dimension.

    Near-duplicate components are merged on construction, so ``n_components``
    can be smaller than the length of the inputs.
    """

    weights: np.ndarray
    components: list

    def __post_init__(self):
        self.weights = check_simplex(self.weights, "weights")
        comps = list(self.components)
        if len(comps) != self.weights.shape[0]:
            raise DimensionMismatch(
                f"{self.weights.shape[0]} weights for {len(comps)} components"
            )
        dims = {c.dim for c in comps}
        if len(dims) > 1:
            raise DimensionMismatch(f"components live in different dimensions: {dims}")
        self.weights, self.components = _merge_duplicates(self.weights, comps)

    @property
    def dim(self):
        return self.components[0].dim

    @property
    def n_components(self):
        return len(self.components)

    @property
    def means(self):
        return np.array([c.mean for c in self.components])

    @property
    def covs(self):
        return np.array([c.cov for c in self.components])


def _merge_duplicates(weights, comps):
    kept_w = []
    kept_c = []
    for w, c in zip(weights, comps):
        for i, kc in enumerate(kept_c):
            gap = np.linalg.norm(c.mean - kc.mean) + np.linalg.norm(c.cov - kc.cov)
            if gap <= MERGE_TOL:
                kept_w[i] += w
                break
        else:
            kept_w.append(w)
            kept_c.append(c)
    return np.array(kept_w), kept_c


def component_log_densities(gmm, points):
    """Log density of every component at every point, shape (n, K)."""
    x = as_points(points)
    if x.shape[1] != gmm.dim:
        raise DimensionMismatch(
            f"points have dimension {x.shape[1]}, mixture has {gmm.dim}"
        )
    n, d = x.shape
    out = np.empty((n, gmm.n_components))
    for k, comp in enumerate(gmm.components):
        cov = comp.cov
        try:
            factor = cho_factor(cov, lower=True)
        except np.linalg.LinAlgError:
            factor = None
        if factor is None:
            try:
                factor = cho_factor(cov + jitter_of(cov) * np.eye(d), lower=True)
            except np.linalg.LinAlgError:
                raise SingularComponent(
                    f"component {k} covariance cannot be factorized even with a ridge"
                ) from None
        diff = x - comp.mean
        maha = np.sum(diff * cho_solve(factor, diff.T).T, axis=1)
        logdet = 2.0 * np.log(np.diag(factor[0])).sum()
        out[:, k] = -0.5 * (maha + logdet + d * np.log(2.0 * np.pi))
    return out


def density(gmm, x):
    """Mixture density; scalar for a single point, (n,) for a batch."""
    single = np.asarray(x).ndim == 1
    logp = component_log_densities(gmm, x) + np.log(gmm.weights)
    vals = np.exp(logsumexp(logp, axis=1))
    return float(vals[0]) if single else vals


def mixture_mean(gmm):
    return gmm.weights @ gmm.means


def mixture_cov(gmm):
    """Covariance of the mixture distribution itself."""
    m = mixture_mean(gmm)
    centered = gmm.means - m
    return (
        np.einsum("k,kij->ij", gmm.weights, gmm.covs)
        + (centered.T * gmm.weights) @ centered
    )


def center(gmm):
    """Shift the mixture to zero mean; returns (centered mixture, removed mean)."""
    m = mixture_mean(gmm)
    comps = [Gaussian(c.mean - m, c.cov) for c in gmm.components]
    return Gmm(gmm.weights.copy(), comps), m


def transform(gmm, amap):
    """Push the mixture through an affine map, component by component."""
    if amap.dim_in != gmm.dim:
        raise DimensionMismatch(
            f"map expects dimension {amap.dim_in}, mixture has {gmm.dim}"
        )
    lin = amap.linear
    comps = [Gaussian(amap(c.mean), lin @ c.cov @ lin.T) for c in gmm.components]
    return Gmm(gmm.weights.copy(), comps)


def sample(gmm, n, seed=0):
    """Draw n i.i.d. points; deterministic for a fixed seed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    labels = rng.choice(gmm.n_components, size=n, p=gmm.weights)
    out = np.empty((n, gmm.dim))
    for k, comp in enumerate(gmm.components):
        mask = labels == k
        cnt = int(mask.sum())
        if cnt == 0:
            continue
        vals, vecs = sorted_eigh(comp.cov)
        root = vecs * np.sqrt(np.clip(vals, 0.0, None))
        out[mask] = comp.mean + rng.standard_normal((cnt, gmm.dim)) @ root.T
    return out


def gmm_to_dict(gmm):
    return {
        "d": gmm.dim,
        "weights": [float(w) for w in gmm.weights],
        "components": [
            {"mean": c.mean.tolist(), "cov": c.cov.tolist()} for c in gmm.components
        ],
    }


def gmm_from_dict(data):
    """Build a mixture from the JSON-schema dict, validating shapes and weights."""
    try:
        d = int(data["d"])
        weights = np.asarray(data["weights"], dtype=float)
        comps = [
            Gaussian(np.asarray(c["mean"], dtype=float), np.asarray(c["cov"], dtype=float))
            for c in data["components"]
        ]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed mixture document: {exc}") from exc
    gmm = Gmm(weights, comps)
    if gmm.dim != d:
        raise DimensionMismatch(
            f"document declares d={d} but components have dimension {gmm.dim}"
        )
    return gmm


def save_gmm(gmm, path):
    with open(path, "w") as fh:
        json.dump(gmm_to_dict(gmm), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_gmm(path):
    with open(path) as fh:
        return gmm_from_dict(json.load(fh))
