import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from erba import DuplicateNodesError, KernelFamily, RadialKernel, cross_matrix, gram_matrix, phi

from conftest import loop_matrix, random_nodes

FAMILIES = list(KernelFamily)


class TestPhi:
    def test_matern_c0_at_zero(self):
        assert phi(RadialKernel("matern-c0", 1.0), 0.0) == 1.0

    def test_matern_c0_at_ln2(self):
        assert phi(RadialKernel("matern-c0", 1.0), math.log(2)) == pytest.approx(0.5, abs=1e-15)

    def test_gaussian(self):
        assert phi(RadialKernel("gaussian", 2.0), 0.5) == pytest.approx(math.exp(-1), rel=1e-15)

    @pytest.mark.parametrize(
        "family, expected",
        [
            ("matern-c0", lambda e: math.exp(-e)),
            ("matern-c2", lambda e: math.exp(-e) * (1 + e)),
            ("gaussian", lambda e: math.exp(-e * e)),
            ("imq", lambda e: 1 / math.sqrt(1 + e * e)),
        ],
    )
    def test_closed_forms(self, family, expected):
        k = RadialKernel(family, 1.7)
        for r in (0.0, 0.1, 0.9, 3.2):
            assert k(r) == pytest.approx(expected(1.7 * r), rel=1e-14)

    @pytest.mark.parametrize("family", FAMILIES)
    def test_normalized(self, family):
        assert RadialKernel(family, 3.0)(0.0) == 1.0

    def test_negative_distance(self):
        with pytest.raises(ValueError):
            phi(RadialKernel(), -0.1)

    @pytest.mark.parametrize("eps", [0.0, -1.0, float("nan")])
    def test_bad_eps(self, eps):
        with pytest.raises(ValueError):
            RadialKernel("gaussian", eps)

    def test_unknown_family(self):
        with pytest.raises(ValueError):
            RadialKernel("thin-plate", 1.0)

    def test_array_input(self):
        out = phi(RadialKernel(), np.array([0.0, math.log(2)]))
        np.testing.assert_allclose(out, [1.0, 0.5])

    @given(
        st.sampled_from(FAMILIES),
        st.floats(0.05, 20),
        st.floats(0, 50),
        st.floats(0, 50),
    )
    def test_monotone(self, family, eps, r1, r2):
        k = RadialKernel(family, eps)
        lo, hi = sorted((r1, r2))
        assert k(lo) >= k(hi)


class TestGramMatrix:
    def test_single_point(self, matern):
        np.testing.assert_array_equal(gram_matrix(matern, [[0.3, 0.4]]), [[1.0]])

    def test_two_points_1d(self, matern):
        A = gram_matrix(matern, [0.0, math.log(2)])
        np.testing.assert_allclose(A, [[1, 0.5], [0.5, 1]], rtol=1e-15)

    def test_matches_loop(self, matern, rng):
        X = rng.uniform(-1, 1, (3, 2))
        np.testing.assert_allclose(gram_matrix(matern, X), loop_matrix(matern, X, X), rtol=1e-14)

    def test_duplicates_rejected(self, matern):
        with pytest.raises(DuplicateNodesError):
            gram_matrix(matern, [[0, 0], [1, 0], [0, 0]])

    def test_near_duplicates_allowed(self, matern):
        A = gram_matrix(matern, [[0, 0], [1e-12, 0]])
        assert A.shape == (2, 2)

    @pytest.mark.parametrize("family", FAMILIES)
    def test_symmetric_unit_diagonal(self, family, rng):
        X = rng.uniform(-1, 1, (30, 3))
        A = gram_matrix(RadialKernel(family, 1.3), X)
        np.testing.assert_array_equal(A, A.T)
        np.testing.assert_array_equal(np.diag(A), 1.0)

    @pytest.mark.parametrize("family", FAMILIES)
    @pytest.mark.parametrize("seed", range(10))
    def test_positive_definite(self, family, seed):
        # strict PD is a statement about exact arithmetic; on the unit cube the
        # flat Gaussian is numerically singular, so spread the points out
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 21))
        X = 5 * random_nodes(rng, n, int(rng.integers(1, 4)), sep=2e-4)
        np.linalg.cholesky(gram_matrix(RadialKernel(family, 1.0), X))


class TestCrossMatrix:
    def test_equals_gram_on_same_set(self, matern, rng):
        X = rng.uniform(size=(7, 2))
        np.testing.assert_array_equal(cross_matrix(matern, X, X), gram_matrix(matern, X))

    def test_identical_single_points(self, matern):
        np.testing.assert_array_equal(cross_matrix(matern, [[1.0, 2.0]], [[1.0, 2.0]]), [[1.0]])

    def test_matches_loop(self, rng):
        k = RadialKernel("imq", 0.7)
        X, Y = rng.normal(size=(4, 2)), rng.normal(size=(3, 2))
        K = cross_matrix(k, X, Y)
        assert K.shape == (4, 3)
        np.testing.assert_allclose(K, loop_matrix(k, X, Y), rtol=1e-14)

    def test_dimension_mismatch(self, matern):
        with pytest.raises(ValueError):
            cross_matrix(matern, np.zeros((2, 2)), np.zeros((2, 3)))
