"""Discrete OT machinery: exact LP, Sinkhorn and the Gromov solvers."""

import itertools

import numpy as np
import pytest

from gmmot.discrete_ot import (
    SolverConfig,
    gw_objective,
    sinkhorn,
    solve_entropic_gw,
    solve_exact_ot,
    solve_gw,
)
from gmmot.exceptions import DimensionMismatch, InfeasibleWeights

from conftest import assert_feasible


def naive_gw(omega, cx, cy):
    k, l = omega.shape
    total = 0.0
    for i in range(k):
        for j in range(l):
            for u in range(k):
                for v in range(l):
                    total += (cx[i, u] - cy[j, v]) ** 2 * omega[i, j] * omega[u, v]
    return total


def rand_instance(rng, k, l):
    a = rng.dirichlet(np.ones(k) * 5.0)
    b = rng.dirichlet(np.ones(l) * 5.0)
    cost = rng.uniform(0, 1, (k, l))
    return a, b, cost


def rand_self_cost(rng, k):
    pts = rng.uniform(0, 1, (k, 2))
    c = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
    return c


class TestSolveExactOt:
    def test_diagonal_optimum(self):
        a = np.array([0.5, 0.5])
        coup = solve_exact_ot(a, a, np.array([[0.0, 1.0], [1.0, 0.0]]))
        np.testing.assert_allclose(coup.plan, np.diag(a), atol=1e-12)
        assert coup.value == pytest.approx(0.0, abs=1e-12)

    def test_single_row_forced(self):
        coup = solve_exact_ot(
            np.array([1.0]), np.array([0.5, 0.5]), np.array([[2.0, 4.0]])
        )
        np.testing.assert_allclose(coup.plan, [[0.5, 0.5]], atol=1e-12)
        assert coup.value == pytest.approx(3.0, abs=1e-12)

    def test_permutation_vertex_oracle(self, rng):
        # uniform 3x3 marginals: the optimum sits on a scaled permutation
        a = np.full(3, 1.0 / 3.0)
        for _ in range(20):
            cost = rng.uniform(0, 1, (3, 3))
            coup = solve_exact_ot(a, a, cost)
            best = min(
                sum(cost[i, p[i]] for i in range(3)) / 3.0
                for p in itertools.permutations(range(3))
            )
            assert coup.value == pytest.approx(best, abs=1e-10)
            assert_feasible(coup, a, a)

    def test_marginals_on_random_instances(self, rng):
        for _ in range(20):
            k, l = rng.integers(2, 8, 2)
            a, b, cost = rand_instance(rng, int(k), int(l))
            assert_feasible(solve_exact_ot(a, b, cost), a, b, tol=1e-9)

    def test_infeasible_weights(self):
        with pytest.raises(InfeasibleWeights):
            solve_exact_ot(np.array([0.4]), np.array([0.5]), np.array([[1.0]]))

    def test_deterministic(self, rng):
        a, b, cost = rand_instance(rng, 4, 5)
        p1 = solve_exact_ot(a, b, cost).plan
        p2 = solve_exact_ot(a, b, cost).plan
        np.testing.assert_array_equal(p1, p2)


class TestSinkhorn:
    def test_zero_cost_gives_product(self, rng):
        a, b, _ = rand_instance(rng, 3, 4)
        coup = sinkhorn(a, b, np.zeros((3, 4)), eps=0.5)
        np.testing.assert_allclose(coup.plan, np.outer(a, b), atol=1e-9)

    def test_low_eps_sharpens_diagonal(self):
        a = np.array([0.5, 0.5])
        coup = sinkhorn(a, a, np.array([[0.0, 1.0], [1.0, 0.0]]), eps=0.1)
        plan = coup.plan
        assert plan[0, 0] > plan[0, 1] and plan[1, 1] > plan[1, 0]
        assert_feasible(coup, a, a, tol=1e-9)

    def test_high_eps_near_product(self, rng):
        a, b, cost = rand_instance(rng, 4, 3)
        coup = sinkhorn(a, b, cost, eps=1000.0)
        assert np.abs(coup.plan - np.outer(a, b)).max() <= 1e-3

    def test_scaling_ratio_identity(self, rng):
        # any Sinkhorn iterate is a diagonal scaling of exp(-C/eps)
        a, b, cost = rand_instance(rng, 4, 4)
        eps = 0.3
        plan = sinkhorn(a, b, cost, eps).plan
        for i, k in ((0, 1), (1, 2), (2, 3)):
            for j, l in ((0, 1), (1, 3), (2, 0)):
                got = plan[i, j] * plan[k, l] / (plan[i, l] * plan[k, j])
                want = np.exp(
                    -(cost[i, j] + cost[k, l] - cost[i, l] - cost[k, j]) / eps
                )
                assert got == pytest.approx(want, rel=1e-6)

    def test_log_domain_small_eps(self, rng):
        a, b, cost = rand_instance(rng, 3, 3)
        coup = sinkhorn(a, b, cost, eps=1e-4, config=SolverConfig(max_outer_iters=20_000))
        assert np.all(np.isfinite(coup.plan))
        assert_feasible(coup, a, b, tol=1e-9)


class TestGwObjective:
    def test_aligned_spaces(self, rng):
        c = rand_self_cost(rng, 4)
        a = np.full(4, 0.25)
        assert gw_objective(np.diag(a), c, c) == pytest.approx(0.0, abs=1e-12)

    def test_single_cell(self):
        assert gw_objective(np.array([[1.0]]), np.zeros((1, 1)), np.zeros((1, 1))) == 0.0

    def test_matches_naive_sum(self, rng):
        for _ in range(10):
            k, l = int(rng.integers(2, 6)), int(rng.integers(2, 6))
            cx = rand_self_cost(rng, k)
            cy = rand_self_cost(rng, l)
            a = rng.dirichlet(np.ones(k))
            b = rng.dirichlet(np.ones(l))
            omega = np.outer(a, b)
            got = gw_objective(omega, cx, cy)
            want = naive_gw(omega, cx, cy)
            assert got == pytest.approx(want, rel=1e-10, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            gw_objective(np.full((2, 2), 0.25), np.zeros((3, 3)), np.zeros((2, 2)))


class TestSolveGw:
    def test_zero_objective_fixed_point(self, rng):
        c = rand_self_cost(rng, 5)
        a = np.full(5, 0.2)
        coup = solve_gw(a, a, c, c, np.diag(a))
        assert coup.value == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(coup.plan, np.diag(a), atol=1e-9)

    def test_single_cell_forced(self):
        coup = solve_gw(
            np.array([1.0]), np.array([1.0]), np.zeros((1, 1)), np.zeros((1, 1)),
            np.array([[1.0]]),
        )
        np.testing.assert_allclose(coup.plan, [[1.0]], atol=1e-12)
        assert coup.value == pytest.approx(0.0, abs=1e-12)

    def test_grid_search_oracle_2x2(self, rng):
        # one free parameter: omega11 in [0, 1/2]; scan it densely
        a = np.full(2, 0.5)
        for _ in range(10):
            cx = rand_self_cost(rng, 2)
            cy = rand_self_cost(rng, 2)
            coup = solve_gw(a, a, cx, cy, np.outer(a, a))
            ts = np.linspace(0.0, 0.5, 10_001)
            best = min(
                gw_objective(np.array([[t, 0.5 - t], [0.5 - t, t]]), cx, cy)
                for t in ts
            )
            assert coup.value <= best + 1e-6
            assert_feasible(coup, a, a)

    def test_never_increases_from_init(self, rng):
        for _ in range(10):
            k, l = int(rng.integers(2, 5)), int(rng.integers(2, 5))
            cx = rand_self_cost(rng, k)
            cy = rand_self_cost(rng, l)
            a = rng.dirichlet(np.ones(k) * 5.0)
            b = rng.dirichlet(np.ones(l) * 5.0)
            init = np.outer(a, b)
            coup = solve_gw(a, b, cx, cy, init)
            assert coup.value <= gw_objective(init, cx, cy) + 1e-12


class TestSolveEntropicGw:
    def test_large_eps_product_limit(self, rng):
        c = rand_self_cost(rng, 4)
        a = np.full(4, 0.25)
        coup = solve_entropic_gw(a, a, c, c, eps=100.0, init=np.diag(a))
        assert np.abs(coup.plan - np.outer(a, a)).max() <= 1e-2

    def test_small_eps_near_grid_optimum(self, rng):
        # the product coupling is a saddle here, so start from both vertices
        a = np.full(2, 0.5)
        cx = rand_self_cost(rng, 2)
        cy = rand_self_cost(rng, 2)
        cfg = SolverConfig(max_outer_iters=2000)
        inits = [np.diag(a), np.fliplr(np.diag(a))]
        value = min(
            solve_entropic_gw(a, a, cx, cy, eps=0.001, init=p0, config=cfg).value
            for p0 in inits
        )
        ts = np.linspace(0.0, 0.5, 10_001)
        best = min(
            gw_objective(np.array([[t, 0.5 - t], [0.5 - t, t]]), cx, cy) for t in ts
        )
        assert value <= best + 1e-3

    def test_marginals_on_random_instances(self, rng):
        for _ in range(20):
            k, l = int(rng.integers(2, 6)), int(rng.integers(2, 6))
            cx = rand_self_cost(rng, k)
            cy = rand_self_cost(rng, l)
            a = rng.dirichlet(np.ones(k) * 5.0)
            b = rng.dirichlet(np.ones(l) * 5.0)
            coup = solve_entropic_gw(a, b, cx, cy, eps=0.1, init=np.outer(a, b))
            assert_feasible(coup, a, b, tol=1e-6)


class TestSolverConfig:
    def test_rejects_bad_alpha(self):
        with pytest.raises(ValueError):
            SolverConfig(anneal_alpha=1.0)

    def test_rejects_nonpositive_tolerance(self):
        with pytest.raises(ValueError):
            SolverConfig(objective_rel_tol=0.0)

    def test_rejects_zero_iterations(self):
        with pytest.raises(ValueError):
            SolverConfig(max_outer_iters=0)
