import numpy as np
import pytest

from kanfs import predictors
from kanfs.data import make_classification, make_regression
from kanfs.metrics import macro_f1, r2, task_score
from kanfs.predictors import PredictorSpec
from kanfs.trees import DecisionTree


class TestTree:
    def test_depth_two_solves_xor(self):
        X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]] * 3, float)
        y = np.array([0, 1, 1, 0] * 3)
        tree = DecisionTree("classification", max_depth=2, n_classes=2).fit(X, y)
        np.testing.assert_array_equal(tree.predict(X), y)

    def test_midpoint_threshold(self):
        X = np.array([[1.0], [2.0], [4.0], [8.0]])
        tree = DecisionTree("regression", max_depth=1).fit(X, np.array([0, 0, 1, 1.0]))
        assert tree.threshold[0] == 3.0

    def test_ties_go_to_lowest_feature(self):
        X = np.array([[0, 0], [0, 0], [1, 1], [1, 1]], float)
        tree = DecisionTree("classification", max_depth=1, n_classes=2).fit(X, np.array([0, 0, 1, 1]))
        assert tree.feature[0] == 0

    def test_min_samples_leaf(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(50, 3))
        tree = DecisionTree("regression", min_samples_leaf=7).fit(X, rng.normal(size=50))
        leaves = tree.feature < 0
        assert tree.n_node_samples[leaves].min() >= 7

    def test_pure_node_is_a_leaf(self):
        tree = DecisionTree("regression").fit(np.arange(5.0)[:, None], np.ones(5))
        assert tree.n_leaves == 1

    def test_importance_is_total_gain(self):
        X = np.array([[0.0], [1.0]])
        tree = DecisionTree("regression").fit(X, np.array([0.0, 2.0]))
        # parent variance 1, children pure: gain 1 times 2 samples
        assert tree.feature_importances_[0] == pytest.approx(2.0)


class TestPredictors:
    def test_ridge_closed_form(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(40, 3))
        y = X @ [1.0, -2.0, 0.5] + 3.0
        m = predictors.RidgeModel(alpha=2.0).fit(X, y)
        Xc, yc = X - X.mean(0), y - y.mean()
        np.testing.assert_allclose(m.coef, np.linalg.solve(Xc.T @ Xc + 2 * np.eye(3), Xc.T @ yc))

    @pytest.mark.parametrize("name", ["linear", "random_forest", "gradient_boosted_trees"])
    def test_regression_fits(self, name):
        ds = make_regression(n=200, seed=1)
        spec = PredictorSpec(name, "regression", {"n_trees": 30} if name != "linear" else {})
        model = predictors.fit(spec, ds.X[:150], ds.y[:150])
        assert r2(ds.y[150:], predictors.predict(model, ds.X[150:])) > 0.5

    @pytest.mark.parametrize("n_classes", [2, 3])
    @pytest.mark.parametrize("name", ["logreg", "rf", "gbt"])
    def test_classification_fits(self, name, n_classes):
        ds = make_classification(n=240, n_classes=n_classes, class_sep=1.5, seed=2)
        params = {} if name == "logreg" else {"n_trees": 30}
        model = predictors.fit(PredictorSpec(name, "classification", params), ds.X[:180], ds.y[:180])
        assert macro_f1(ds.y[180:], predictors.predict(model, ds.X[180:]), n_classes) > 0.7

    @pytest.mark.parametrize("task,n_classes", [("regression", None), ("classification", 2),
                                                ("classification", 3)])
    def test_boosting_loss_non_increasing(self, task, n_classes):
        if task == "regression":
            ds = make_regression(n=150, seed=3)
        else:
            ds = make_classification(n=150, n_classes=n_classes, seed=3)
        m = predictors.BoostedTreesModel(task, n_classes, n_trees=40).fit(ds.X, ds.y)
        assert np.all(np.diff(m.train_loss_) <= 1e-12)

    def test_forest_is_seeded(self):
        ds = make_classification(n=100, seed=4)
        spec = PredictorSpec("rf", "classification", {"n_trees": 10}, seed=5)
        a = predictors.fit(spec, ds.X, ds.y)
        b = predictors.fit(spec, ds.X, ds.y)
        np.testing.assert_array_equal(a.feature_importances_, b.feature_importances_)

    def test_xgboost_alias(self):
        assert PredictorSpec("xgboost", "regression").kind == "gradient_boosted_trees"

    def test_rejects_unknown(self):
        with pytest.raises(ValueError):
            PredictorSpec("svm", "regression")
        with pytest.raises(ValueError):
            PredictorSpec("rf", "regression", {"depth": 3})


class TestMetrics:
    def test_macro_f1_by_hand(self):
        y = [0, 0, 1, 1, 2]
        p = [0, 1, 1, 1, 0]
        # class 0: tp1 fp1 fn1 -> 0.5; class 1: tp2 fp1 fn0 -> 0.8; class 2: 0
        assert macro_f1(y, p) == pytest.approx((0.5 + 0.8 + 0.0) / 3)

    def test_macro_f1_absent_class_counts_zero(self):
        assert macro_f1([0, 0], [0, 0], n_classes=2) == pytest.approx(0.5)

    def test_r2(self):
        assert r2([1, 2, 3], [1, 2, 3]) == 1.0
        assert r2([1, 2, 3], [2, 2, 2]) == 0.0
        assert r2([5, 5], [5, 5]) == 1.0
        assert r2([5, 5], [4, 5]) == 0.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length mismatch"):
            task_score("regression", [1, 2], [1])
