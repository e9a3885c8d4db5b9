"""Scikit-learn style estimators wrapping the fitting and transport pipelines."""

import numpy as np
from scipy.special import logsumexp
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .discrete_ot import SolverConfig
from .distances import METRICS, mew2, mgw2, mgw2_registration, mw2
from .em import EmConfig, fit_em_details
from .exceptions import DimensionMismatch, DimensionOrder
from .mixtures import component_log_densities, sample
from .plans import build_plan, match_points, t_mean
from .validation import as_points


class GmmDensity(BaseEstimator):
    """Gaussian mixture density estimator fitted by expectation-maximization.

    A thin estimator facade over :func:`gmmot.em.fit_em`: ``fit`` learns the
    mixture, ``score_samples`` evaluates log densities, ``predict`` labels
    points by their most responsible component and ``sample`` draws points.
    Deterministic for a fixed ``seed``.
    """

    def __init__(
        self,
        n_components=10,
        max_iters=200,
        tol=1e-8,
        n_restarts=1,
        cov_reg=None,
        seed=0,
    ):
        self.n_components = n_components
        self.max_iters = max_iters
        self.tol = tol
        self.n_restarts = n_restarts
        self.cov_reg = cov_reg
        self.seed = seed

    def _em_config(self):
        return EmConfig(
            n_components=self.n_components,
            max_iters=self.max_iters,
            loglik_rel_tol=self.tol,
            n_restarts=self.n_restarts,
            cov_reg=self.cov_reg,
            seed=self.seed,
        )

    def fit(self, X, y=None):
        x = as_points(X, "X")
        self.gmm_, info = fit_em_details(x, self._em_config())
        self.log_likelihood_ = float(info["log_likelihoods"][-1])
        self.n_iter_ = int(info["log_likelihoods"].shape[0])
        return self

    def _log_posterior(self, X):
        check_is_fitted(self, "gmm_")
        logp = component_log_densities(self.gmm_, as_points(X, "X"))
        return logp + np.log(self.gmm_.weights)

    def score_samples(self, X):
        """Log density of the fitted mixture at each row of X."""
        return logsumexp(self._log_posterior(X), axis=1)

    def score(self, X, y=None):
        return float(np.mean(self.score_samples(X)))

    def predict(self, X):
        """Index of the most responsible component for each row of X."""
        return np.argmax(self._log_posterior(X), axis=1)

    def sample(self, n):
        check_is_fitted(self, "gmm_")
        return sample(self.gmm_, n, seed=self.seed)


class MixtureTransport(BaseEstimator):
    """Transport map between two point clouds through fitted mixtures.

    ``fit(X, Y)`` fits one mixture per cloud, solves the chosen metric
    between them and assembles the component-pair transport maps.
    ``transform`` then sends points of the source space to the target space
    through the barycentric map, and ``predict`` assigns each source point
    to its nearest fitted target point.

    The source cloud must not have the smaller dimension; ``mw2`` requires
    equal dimensions.  The target mixture is fitted with ``seed + 1`` so the
    two fits never share an initialization.
    """

    def __init__(
        self,
        metric="mew2",
        n_components=10,
        alpha=0.95,
        eps0=1.0,
        anneal_iters=10,
        eta=0.01,
        max_iters=1000,
        tol=1e-9,
        n_restarts=1,
        cov_reg=None,
        seed=0,
    ):
        self.metric = metric
        self.n_components = n_components
        self.alpha = alpha
        self.eps0 = eps0
        self.anneal_iters = anneal_iters
        self.eta = eta
        self.max_iters = max_iters
        self.tol = tol
        self.n_restarts = n_restarts
        self.cov_reg = cov_reg
        self.seed = seed

    def _solver_config(self):
        return SolverConfig(
            max_outer_iters=self.max_iters,
            objective_rel_tol=self.tol,
            anneal_eps0=self.eps0,
            anneal_alpha=self.alpha,
            anneal_iters=self.anneal_iters,
            step_size_eta=self.eta,
            n_restarts=self.n_restarts,
            seed=self.seed,
        )

    def _fit_cloud(self, points, seed):
        config = EmConfig(
            n_components=self.n_components,
            n_restarts=max(self.n_restarts, 1),
            cov_reg=self.cov_reg,
            seed=seed,
        )
        gmm, _ = fit_em_details(points, config)
        return gmm

    def fit(self, X, Y):
        if self.metric not in METRICS:
            raise ValueError(f"unknown metric {self.metric!r}; expected one of {METRICS}")
        x = as_points(X, "X")
        ys = as_points(Y, "Y")
        if self.metric == "mw2" and x.shape[1] != ys.shape[1]:
            raise DimensionMismatch(
                f"mw2 requires equal dimensions, got {x.shape[1]} and {ys.shape[1]}"
            )
        if x.shape[1] < ys.shape[1]:
            raise DimensionOrder(
                f"source dimension {x.shape[1]} is smaller than target "
                f"dimension {ys.shape[1]}; swap the clouds"
            )
        g0 = self._fit_cloud(x, self.seed)
        g1 = self._fit_cloud(ys, self.seed + 1)
        config = self._solver_config()
        p = b = None
        if self.metric == "mw2":
            res = mw2(g0, g1)
        elif self.metric == "mgw2":
            res = mgw2(g0, g1, config)
            reg = mgw2_registration(g0, g1, res.coupling, config)
            p, b = reg.p, reg.b
        else:
            res = mew2(g0, g1, config)
            p, b = res.p, res.b
        self.source_gmm_ = g0
        self.target_gmm_ = g1
        self.result_ = res
        self.value_ = res.value_sq
        self.distance_ = res.distance
        self.coupling_ = res.coupling.plan
        self.p_ = p
        self.b_ = b
        self.plan_ = build_plan(g0, g1, res.coupling, p=p, b=b)
        self._target_points = ys
        return self

    def transform(self, X):
        """Barycentric image of each row of X in the target space."""
        check_is_fitted(self, "plan_")
        return t_mean(self.plan_, as_points(X, "X"))

    def fit_transform(self, X, Y):
        return self.fit(X, Y).transform(X)

    def predict(self, X):
        """Index of the nearest fitted target point for each row of X."""
        check_is_fitted(self, "plan_")
        return match_points(self.plan_, as_points(X, "X"), self._target_points).assignment
