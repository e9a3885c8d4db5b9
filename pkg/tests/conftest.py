"""Shared fixtures, random-instance builders and the acceptance report hook."""

import numpy as np
import pytest

from gmmot.gaussians import Gaussian
from gmmot.mixtures import Gmm

# Filled by test_acceptance; echoed after the run so every criterion shows
# one pass/fail line even when output capturing is on.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def rand_cov(rng, d, lo=0.01, hi=0.5):
    q = np.linalg.qr(rng.standard_normal((d, d)))[0]
    return q @ np.diag(rng.uniform(lo, hi, d)) @ q.T


def rand_gmm(rng, k, d, lo=0.01, hi=0.5, mean_lo=-1.0, mean_hi=1.0, conc=5.0):
    weights = rng.dirichlet(np.ones(k) * conc)
    comps = [
        Gaussian(rng.uniform(mean_lo, mean_hi, d), rand_cov(rng, d, lo, hi))
        for _ in range(k)
    ]
    return Gmm(weights, comps)


def rand_orthogonal(rng, d):
    q = np.linalg.qr(rng.standard_normal((d, d)))[0]
    return q


def rand_stiefel(rng, d, dp):
    return np.linalg.qr(rng.standard_normal((d, dp)))[0][:, :dp]


def assert_feasible(coupling, a, b, tol=1e-9):
    """Every emitted plan must carry its prescribed marginals."""
    plan = coupling.plan if hasattr(coupling, "plan") else coupling
    assert plan.min() >= 0
    np.testing.assert_allclose(plan.sum(axis=1), a, atol=tol)
    np.testing.assert_allclose(plan.sum(axis=0), b, atol=tol)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
