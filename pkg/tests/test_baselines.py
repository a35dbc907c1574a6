import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kanfs import baselines
from kanfs.baselines import SelectorSpec
from kanfs.data import make_classification, make_regression
from oracles import entropy_mi, lasso_orthonormal


def orthonormal_design(n, d, seed):
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.normal(size=(n, d)))
    return Q * np.sqrt(n)  # X^T X / n = I


class TestLasso:
    @pytest.mark.parametrize("lam", [0.05, 0.3, 1.0])
    def test_orthonormal_closed_form(self, lam):
        X = orthonormal_design(120, 6, 0)
        y = X @ np.array([1.5, -0.8, 0.0, 0.2, 0.0, 3.0]) + 0.3 * np.random.default_rng(1).normal(size=120)
        beta, converged, _ = baselines.lasso_coordinate_descent(X, y, lam, tol=1e-12)
        assert converged
        np.testing.assert_allclose(beta, lasso_orthonormal(X, y, lam), atol=1e-6)

    def test_kkt_conditions(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(80, 10))
        X -= X.mean(axis=0)
        y = X[:, 0] * 2 - X[:, 3] + rng.normal(size=80)
        y -= y.mean()
        lam = 0.2
        beta, converged, _ = baselines.lasso_coordinate_descent(X, y, lam, tol=1e-12)
        assert converged
        g = X.T @ (y - X @ beta) / 80
        active = beta != 0
        np.testing.assert_allclose(g[active], lam * np.sign(beta[active]), atol=1e-6)
        assert np.all(np.abs(g[~active]) <= lam + 1e-6)

    def test_logistic_kkt(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(150, 5))
        y = (X[:, 0] - X[:, 1] + 0.5 * rng.normal(size=150) > 0).astype(int)
        lam = 0.05
        b0, beta, converged = baselines.l1_logistic(X, y, lam, tol=1e-12)
        assert converged
        p = 1 / (1 + np.exp(-(b0 + X @ beta)))
        g = X.T @ (y - p) / 150
        assert abs(np.mean(y - p)) < 1e-6
        active = beta != 0
        np.testing.assert_allclose(g[active], lam * np.sign(beta[active]), atol=1e-6)
        assert np.all(np.abs(g[~active]) <= lam + 1e-6)

    def test_large_penalty_zeroes_everything(self):
        ds = make_regression(n=100, seed=0)
        iv = baselines.lasso_select(ds.X, ds.y, lam=1e6)
        assert iv.all_zero

    def test_cv_picks_a_grid_value(self):
        ds = make_regression(n=150, seed=4)
        iv = baselines.lasso_select(ds.X, ds.y, seed=0)
        assert iv.info["lambda"] in iv.info["lambda_grid"]
        assert set(np.argsort(-iv.scores)[:5]) == set(ds.informative)


class TestMutualInformation:
    def test_plugin_matches_counting_oracle(self):
        rng = np.random.default_rng(0)
        a, b = rng.integers(0, 4, 300), rng.integers(0, 3, 300)
        assert baselines.plugin_mutual_information(a, b) == pytest.approx(entropy_mi(a, b), abs=1e-12)

    def test_equal_frequency(self):
        codes = baselines.equal_frequency_bins(np.arange(800.0), 8)
        np.testing.assert_array_equal(np.bincount(codes), np.full(8, 100))

    def test_independent_columns_rank_low(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(2000, 4))
        y = X[:, 2] + 0.5 * rng.normal(size=2000)
        iv = baselines.mi_rank(X, y, "regression")
        assert np.argmax(iv.scores) == 2
        assert np.all(np.delete(iv.scores, 2) < 0.05)

    def test_constant_target_flagged(self):
        iv = baselines.mi_rank(np.random.default_rng(0).normal(size=(30, 3)), np.zeros(30), "regression")
        assert iv.all_zero and iv.info["degenerate"] == "constant target"


class TestSvmRfe:
    def test_separable_weights(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(200, 2))
        y = np.where(X[:, 0] > 0, 1.0, -1.0)
        w, _ = baselines.linear_svm(X, y, C=10.0, iterations=2000)
        assert abs(w[0]) > 5 * abs(w[1])

    def test_ranks_are_a_permutation(self):
        ds = make_classification(n=200, seed=1)
        iv = baselines.svm_rfe(ds.X, ds.y, "classification", 2)
        ranks = iv.raw_scores
        np.testing.assert_array_equal(np.sort(ranks), np.arange(1, 11))
        assert sorted(iv.info["elimination_order"]) == list(range(10))
        assert set(np.argsort(-iv.scores)[:5]) == set(ds.informative)


class TestForestSelectors:
    def test_rf_importance_finds_signal(self):
        ds = make_classification(n=300, seed=2)
        iv = baselines.rf_importance(ds.X, ds.y, "classification", 2, n_trees=30)
        assert set(np.argsort(-iv.scores)[:5]) == set(ds.informative)

    def test_permutation_is_seeded(self):
        ds = make_regression(n=200, seed=3)
        a = baselines.permutation_importance(ds.X, ds.y, "regression", n_trees=20, seed=7)
        b = baselines.permutation_importance(ds.X, ds.y, "regression", n_trees=20, seed=7)
        np.testing.assert_array_equal(a.scores, b.scores)
        assert np.all(a.raw_scores >= 0)


class TestSpec:
    def test_defaults_merge(self):
        spec = SelectorSpec("mi", {"n_bins": 4})
        assert spec.params == {"n_bins": 4}

    @pytest.mark.parametrize("kind,hp", [("nope", {}), ("mi", {"bins": 3})])
    def test_rejects_unknown(self, kind, hp):
        with pytest.raises(ValueError):
            SelectorSpec(kind, hp)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["mi", "lasso", "svm_rfe"]))
def test_cheap_selectors_normalise(seed, kind):
    ds = make_regression(n=60, d=5, n_informative=2, seed=seed)
    if kind == "mi":
        iv = baselines.mi_rank(ds.X, ds.y, "regression")
    elif kind == "lasso":
        iv = baselines.lasso_select(ds.X, ds.y, n_lambdas=4)
    else:
        iv = baselines.svm_rfe(ds.X, ds.y, "regression")
    assert np.all(iv.scores >= 0)
    assert iv.all_zero or abs(iv.scores.sum() - 1) <= 1e-9
