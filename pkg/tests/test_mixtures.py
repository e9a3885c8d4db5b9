"""Gmm container, densities, moments, transforms and JSON round trips."""

import json

import numpy as np
import pytest

from gmmot.exceptions import DimensionMismatch
from gmmot.gaussians import AffineMap, Gaussian
from gmmot.mixtures import (
    Gmm,
    center,
    component_log_densities,
    density,
    gmm_from_dict,
    gmm_to_dict,
    load_gmm,
    mixture_cov,
    mixture_mean,
    sample,
    save_gmm,
    transform,
)

from conftest import rand_gmm, rand_orthogonal


def make_gmm(weights, means, covs):
    comps = [Gaussian(np.asarray(m), np.asarray(c)) for m, c in zip(means, covs)]
    return Gmm(np.asarray(weights), comps)


def std_normal_1d():
    return make_gmm([1.0], [[0.0]], [[[1.0]]])


class TestGmmConstruction:
    def test_basic_properties(self, rng):
        g = rand_gmm(rng, 3, 2)
        assert g.dim == 2
        assert g.n_components == 3
        assert g.means.shape == (3, 2)
        assert g.covs.shape == (3, 2, 2)
        assert np.sum(g.weights) == pytest.approx(1.0, abs=1e-12)

    def test_rejects_negative_weights(self):
        with pytest.raises(ValueError):
            make_gmm([1.5, -0.5], [[0.0], [1.0]], [[[1.0]]] * 2)

    def test_rejects_unnormalized_weights(self):
        with pytest.raises(ValueError):
            make_gmm([0.3, 0.3], [[0.0], [1.0]], [[[1.0]]] * 2)

    def test_rejects_count_mismatch(self):
        with pytest.raises(ValueError):
            make_gmm([0.5, 0.3, 0.2], [[0.0], [1.0]], [[[1.0]]] * 2)

    def test_rejects_asymmetric_cov(self):
        cov = [[[1.0, 0.3], [0.0, 1.0]]]
        with pytest.raises(ValueError):
            make_gmm([1.0], [[0.0, 0.0]], cov)

    def test_merges_duplicate_components(self):
        # two identical components collapse into one with summed weight
        g = make_gmm([0.25, 0.75], [[0.0], [0.0]], [[[1.0]]] * 2)
        assert g.n_components == 1
        assert g.weights[0] == pytest.approx(1.0, abs=1e-12)


class TestDensity:
    def test_standard_normal_at_zero(self):
        g = std_normal_1d()
        want = 1.0 / np.sqrt(2.0 * np.pi)
        assert density(g, np.zeros((1, 1)))[0] == pytest.approx(want, rel=1e-12)

    def test_mixture_is_weighted_sum(self, rng):
        g = rand_gmm(rng, 4, 2)
        x = rng.uniform(-1, 1, (10, 2))
        logs = component_log_densities(g, x)
        want = np.exp(logs) @ g.weights
        np.testing.assert_allclose(density(g, x), want, rtol=1e-12)

    def test_integrates_to_one_1d(self, rng):
        g = rand_gmm(rng, 3, 1)
        xs = np.linspace(-8, 8, 20_001).reshape(-1, 1)
        mass = np.trapezoid(density(g, xs), xs[:, 0])
        assert mass == pytest.approx(1.0, abs=1e-3)


class TestSample:
    def test_deterministic_given_seed(self, rng):
        g = rand_gmm(rng, 3, 2)
        x1 = sample(g, 100, seed=5)
        x2 = sample(g, 100, seed=5)
        np.testing.assert_array_equal(x1, x2)

    def test_moments_match_mixture(self, rng):
        g = rand_gmm(rng, 3, 2)
        x = sample(g, 200_000, seed=1)
        np.testing.assert_allclose(x.mean(axis=0), mixture_mean(g), atol=0.02)
        np.testing.assert_allclose(np.cov(x.T), mixture_cov(g), atol=0.02)

    def test_single_point_shape(self, rng):
        g = rand_gmm(rng, 2, 3)
        assert sample(g, 1, seed=0).shape == (1, 3)


class TestMoments:
    def test_mean_hand_case(self):
        g = make_gmm(
            [0.5, 0.5], [[0.0, 0.0], [2.0, 4.0]], [np.eye(2)] * 2
        )
        np.testing.assert_allclose(mixture_mean(g), [1.0, 2.0], atol=1e-12)

    def test_cov_hand_case(self):
        # law of total covariance: I + spread of the means
        g = make_gmm(
            [0.5, 0.5], [[-1.0, 0.0], [1.0, 0.0]], [np.eye(2)] * 2
        )
        want = np.eye(2) + np.array([[1.0, 0.0], [0.0, 0.0]])
        np.testing.assert_allclose(mixture_cov(g), want, atol=1e-12)

    def test_cov_matches_sampling(self, rng):
        g = rand_gmm(rng, 4, 2)
        x = sample(g, 200_000, seed=3)
        np.testing.assert_allclose(np.cov(x.T), mixture_cov(g), atol=0.02)


class TestTransform:
    def test_identity(self, rng):
        g = rand_gmm(rng, 3, 2)
        t = AffineMap(np.eye(2), np.zeros(2))
        h = transform(g, t)
        np.testing.assert_allclose(h.means, g.means, atol=1e-12)
        np.testing.assert_allclose(h.covs, g.covs, atol=1e-12)

    def test_rotation_moves_means(self, rng):
        g = rand_gmm(rng, 3, 2)
        q = rand_orthogonal(rng, 2)
        h = transform(g, AffineMap(q, np.zeros(2)))
        np.testing.assert_allclose(h.means, g.means @ q.T, atol=1e-12)
        for ch, cg in zip(h.covs, g.covs):
            np.testing.assert_allclose(ch, q @ cg @ q.T, atol=1e-12)

    def test_orthogonal_change_of_variables(self, rng):
        # density transforms with unit Jacobian under an orthogonal map
        g = rand_gmm(rng, 3, 3)
        q = rand_orthogonal(rng, 3)
        h = transform(g, AffineMap(q, np.zeros(3)))
        x = rng.uniform(-1, 1, (20, 3))
        np.testing.assert_allclose(density(h, x @ q.T), density(g, x), rtol=1e-10)

    def test_embedding_raises_rank(self, rng):
        g = rand_gmm(rng, 2, 2)
        p = np.zeros((4, 2))
        p[0, 0] = 1.0
        p[1, 1] = 1.0
        h = transform(g, AffineMap(p, np.zeros(4)))
        assert h.dim == 4
        for c in h.covs:
            assert np.linalg.matrix_rank(c, tol=1e-10) <= 2

    def test_dimension_mismatch(self, rng):
        g = rand_gmm(rng, 2, 3)
        with pytest.raises(DimensionMismatch):
            transform(g, AffineMap(np.eye(2), np.zeros(2)))

    def test_commutes_with_center(self, rng):
        # centering then rotating equals rotating then centering
        g = rand_gmm(rng, 3, 2)
        q = rand_orthogonal(rng, 2)
        rot = AffineMap(q, np.zeros(2))
        left, mu_left = center(transform(g, rot))
        right = transform(center(g)[0], rot)
        np.testing.assert_allclose(left.means, right.means, atol=1e-12)
        np.testing.assert_allclose(mu_left, q @ center(g)[1], atol=1e-12)


class TestCenter:
    def test_returns_zero_mean(self, rng):
        g = rand_gmm(rng, 4, 3)
        c, mu = center(g)
        np.testing.assert_allclose(mixture_mean(c), np.zeros(3), atol=1e-12)
        np.testing.assert_allclose(mu, mixture_mean(g), atol=1e-12)

    def test_leaves_covariances(self, rng):
        g = rand_gmm(rng, 4, 3)
        c, _ = center(g)
        np.testing.assert_allclose(c.covs, g.covs, atol=1e-12)

    def test_already_centered_is_noop(self):
        g = std_normal_1d()
        c, mu = center(g)
        assert mu[0] == pytest.approx(0.0, abs=1e-12)
        np.testing.assert_allclose(c.means, g.means, atol=1e-12)


class TestSerialization:
    def test_round_trip_dict(self, rng):
        g = rand_gmm(rng, 3, 2)
        h = gmm_from_dict(gmm_to_dict(g))
        np.testing.assert_array_equal(h.weights, g.weights)
        np.testing.assert_array_equal(h.means, g.means)
        np.testing.assert_array_equal(h.covs, g.covs)

    def test_round_trip_file(self, rng, tmp_path):
        g = rand_gmm(rng, 3, 2)
        path = tmp_path / "g.json"
        save_gmm(g, path)
        h = load_gmm(path)
        np.testing.assert_array_equal(h.weights, g.weights)
        np.testing.assert_array_equal(h.means, g.means)
        np.testing.assert_array_equal(h.covs, g.covs)

    def test_dict_schema_keys(self, rng):
        d = gmm_to_dict(rand_gmm(rng, 2, 3))
        assert set(d) == {"d", "weights", "components"}
        assert d["d"] == 3
        assert set(d["components"][0]) == {"mean", "cov"}

    def test_rejects_missing_key(self):
        with pytest.raises(ValueError):
            gmm_from_dict({"weights": [1.0], "components": []})

    def test_rejects_dim_mismatch_inside_document(self):
        doc = {
            "d": 2,
            "weights": [1.0],
            "components": [{"mean": [0.0], "cov": [[1.0]]}],
        }
        with pytest.raises(DimensionMismatch):
            gmm_from_dict(doc)

    def test_file_is_plain_json(self, rng, tmp_path):
        path = tmp_path / "g.json"
        save_gmm(rand_gmm(rng, 2, 2), path)
        doc = json.loads(path.read_text())
        assert doc["d"] == 2
