import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kanfs.spline import (
    KnotVector,
    basis_functions,
    basis_tensor,
    build_knots,
    eval_basis,
    expand_batch,
    knots_for_column,
)
from oracles import basis_row


class TestKnots:
    def test_small_linear_grid(self):
        kv = build_knots(0.0, 2.0, 2, 1)
        np.testing.assert_allclose(kv.knots, [0, 0, 1, 2, 2])
        assert kv.n_basis == 3
        np.testing.assert_allclose(eval_basis(kv, 0.5).values, [0.5, 0.5, 0.0])

    def test_default_basis_count(self):
        assert build_knots(-1, 1, 5, 3).n_basis == 8

    @pytest.mark.parametrize("lo,hi", [(1.0, 1.0), (2.0, 1.0), (0.0, np.inf)])
    def test_invalid_range(self, lo, hi):
        with pytest.raises(ValueError, match="invalid range"):
            build_knots(lo, hi, 5, 3)

    @pytest.mark.parametrize("grid,degree", [(0, 3), (5, -1)])
    def test_invalid_size(self, grid, degree):
        with pytest.raises(ValueError, match="invalid size"):
            build_knots(0, 1, grid, degree)

    def test_rejects_unclamped(self):
        with pytest.raises(ValueError):
            KnotVector(np.array([0.0, 1.0, 2.0, 3.0]), 1)

    def test_constant_column_is_widened(self):
        kv = knots_for_column(np.full(10, 3.0))
        assert (kv.lo, kv.hi) == (2.5, 3.5)

    def test_column_range(self):
        kv = knots_for_column(np.array([-2.0, 0.5, 4.0]), grid_size=3, degree=2)
        assert (kv.lo, kv.hi) == (-2.0, 4.0)
        assert kv.n_basis == 5


class TestBasis:
    @pytest.mark.parametrize("degree", [0, 1, 2, 3])
    def test_matches_recursive_oracle(self, degree):
        kv = build_knots(-1.5, 2.0, 4, degree)
        xs = np.linspace(-1.5, 2.0, 57)
        B, _ = basis_functions(kv, xs)
        expected = np.array([basis_row(kv.knots, degree, x) for x in xs])
        np.testing.assert_allclose(B, expected, atol=1e-14)

    def test_right_endpoint_takes_last_basis(self):
        kv = build_knots(0, 1, 5, 3)
        B, _ = basis_functions(kv, np.array([1.0]))
        np.testing.assert_allclose(B[0], np.eye(8)[-1])

    def test_clamped_outside_domain(self):
        kv = build_knots(0, 1, 5, 3)
        B, dB = basis_functions(kv, np.array([-5.0, 0.0, 1.0, 7.0]))
        np.testing.assert_allclose(B[0], B[1])
        np.testing.assert_allclose(B[3], B[2])
        assert np.all(dB[[0, 3]] == 0.0)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 3), st.integers(1, 8), st.floats(-50, 50), st.floats(0.01, 100),
           st.lists(st.floats(0, 1), min_size=1, max_size=20))
    def test_partition_of_unity(self, degree, grid, lo, width, us):
        kv = build_knots(lo, lo + width, grid, degree)
        x = lo + width * np.array(us)
        B, _ = basis_functions(kv, x)
        assert np.all(B >= 0)
        np.testing.assert_allclose(B.sum(axis=1), 1.0, atol=1e-12)

    @pytest.mark.parametrize("degree", [1, 2, 3])
    def test_derivative_matches_central_difference(self, degree):
        kv = build_knots(-2, 3, 5, degree)
        rng = np.random.default_rng(degree)
        h = 1e-6
        x = rng.uniform(kv.lo + 2 * h, kv.hi - 2 * h, 400)
        x = x[np.min(np.abs(x[:, None] - kv.knots[None, :]), axis=1) > 2 * h]
        _, dB = basis_functions(kv, x)
        fd = (basis_functions(kv, x + h)[0] - basis_functions(kv, x - h)[0]) / (2 * h)
        assert np.max(np.abs(dB - fd)) <= 1e-6

    def test_derivative_rows_sum_to_zero(self):
        kv = build_knots(0, 1, 6, 3)
        _, dB = basis_functions(kv, np.linspace(0, 1, 31))
        np.testing.assert_allclose(dB.sum(axis=1), 0.0, atol=1e-10)


class TestBatch:
    def test_tensor_and_expansion_agree(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(12, 3))
        kvs = [knots_for_column(X[:, j]) for j in range(3)]
        B, dB = basis_tensor(kvs, X)
        assert B.shape == dB.shape == (12, 3, 8)
        E = expand_batch(kvs, X)
        np.testing.assert_array_equal(E, B.reshape(12, 24))
        for j in range(3):
            np.testing.assert_array_equal(B[:, j], basis_functions(kvs[j], X[:, j])[0])

    def test_dimension_mismatch(self):
        kvs = [build_knots(0, 1, 5, 3)] * 2
        with pytest.raises(ValueError, match="dimension mismatch"):
            basis_tensor(kvs, np.zeros((4, 3)))
