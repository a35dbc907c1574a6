import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kanfs import importance, kan
from kanfs.importance import ImportanceVector, SensitivityConfig
from factories import random_model, targets
from oracles import naive_knockout_deltas


def _hand_model():
    """Two inputs, one output, K=2 (degree 1, one interval); weights chosen by hand."""
    X = np.array([[0.0, 0.0], [1.0, 1.0]])
    model = kan.init_model(X, grid_size=1, degree=1, activation="identity")
    layer = model.layers[0]
    layer.w_base[...] = [[3.0, 0.0]]
    layer.w_spline[...] = [[[3.0, -4.0], [0.0, 2.0]]]
    return model


class TestNorms:
    def test_l1_by_hand(self):
        iv = importance.importance_l1(_hand_model(), include_base=False)
        np.testing.assert_allclose(iv.raw_scores, [7.0, 2.0])
        np.testing.assert_allclose(iv.scores, [7 / 9, 2 / 9])

    def test_l2_by_hand(self):
        iv = importance.importance_l2(_hand_model(), include_base=False)
        np.testing.assert_allclose(iv.raw_scores, [5.0, 2.0])

    def test_base_column_added(self):
        iv = importance.importance_l2(_hand_model(), include_base=True)
        np.testing.assert_allclose(iv.raw_scores, [8.0, 2.0])
        assert iv.config == {"include_base": True}

    def test_two_feature_blocks(self):
        model = _hand_model()
        model.layers[0].w_spline[...] = [[[1.0, -2.0], [3.0, 4.0]]]
        l1 = importance.importance_l1(model, include_base=False)
        l2 = importance.importance_l2(model, include_base=False)
        np.testing.assert_allclose(l1.raw_scores, [3.0, 7.0])
        np.testing.assert_allclose(l1.scores, [0.3, 0.7])
        r5 = np.sqrt(5.0)
        np.testing.assert_allclose(l2.scores, [r5 / (r5 + 5), 5 / (r5 + 5)])

    @pytest.mark.parametrize("c", [1e-3, 0.5, 7.0])
    def test_scale_invariance(self, c):
        model, _ = random_model(1, 5, 3, depth=2)
        for fn in (importance.importance_l1, importance.importance_l2):
            before = fn(model, include_base=False).scores
            scaled = model.copy()
            scaled.layers[0].w_spline[...] *= c
            np.testing.assert_allclose(fn(scaled, include_base=False).scores, before, atol=1e-12)

    def test_zero_model_is_flagged(self):
        model = _hand_model()
        for a in model.parameters():
            a[...] = 0.0
        iv = importance.importance_l1(model)
        assert iv.all_zero and not iv.normalized
        assert np.all(iv.scores == 0)

    def test_only_first_layer_counts(self):
        model, _ = random_model(0, 3, 4, depth=2)
        before = importance.importance_l2(model).scores
        model.layers[1].w_spline[...] *= 10
        np.testing.assert_array_equal(importance.importance_l2(model).scores, before)


class TestKnockout:
    @pytest.mark.parametrize("seed", range(6))
    def test_matches_naive_oracle(self, seed):
        task = "classification" if seed % 2 else "regression"
        model, X = random_model(seed, 4, 3, depth=1 + seed % 2, task=task,
                                n_classes=3 if task == "classification" else None, scale=0.4)
        y = targets(model, X, seed)
        iv, rep = importance.importance_ko(model, X, y)
        np.testing.assert_allclose(rep.deltas, naive_knockout_deltas(model, X, y), atol=1e-10)
        assert np.all(rep.deltas >= 0)

    def test_zero_weight_feature_has_exact_zero(self):
        model, X = random_model(3, 4, 2, depth=2, scale=0.5)
        model.layers[0].w_base[:, 2] = 0.0
        model.layers[0].w_spline[:, 2, :] = 0.0
        _, rep = importance.importance_ko(model, X, targets(model, X, 3))
        assert rep.deltas[2] == 0.0

    def test_smoothed_formula(self):
        model, X = random_model(1, 3, scale=0.5)
        _, rep = importance.importance_ko(model, X, targets(model, X, 1), delta=0.5)
        np.testing.assert_allclose(rep.smoothed, rep.deltas / (rep.deltas.sum() + 0.5))

    def test_knockout_copy(self):
        model, _ = random_model(0, 3)
        ko = importance.knockout_feature(model, 1)
        assert np.all(ko.layers[0].w_spline[:, 1] == 0)
        assert np.any(model.layers[0].w_spline[:, 1] != 0)
        with pytest.raises(IndexError):
            importance.knockout_feature(model, 3)

    @pytest.mark.parametrize("tag", importance.FORBIDDEN_EVAL_SPLITS)
    def test_refuses_non_heldout_data(self, tag):
        model, X = random_model(0, 3)
        with pytest.raises(ValueError, match="held-out"):
            importance.importance_ko(model, X, targets(model, X, 0), evaluation_split=tag)


class TestSensitivity:
    def test_matches_finite_difference_oracle(self):
        model, X = random_model(4, 3, 3, depth=2, scale=0.4)
        Xe = 0.9 * X[:30]
        iv = importance.importance_si(model, Xe)
        h = 1e-6
        fd = np.zeros(3)
        for j in range(3):
            up, dn = Xe.copy(), Xe.copy()
            up[:, j] += h
            dn[:, j] -= h
            g = (kan.forward(model, up)[0][:, 0] - kan.forward(model, dn)[0][:, 0]) / (2 * h)
            fd[j] = np.mean(np.abs(g)) * Xe[:, j].std()
        np.testing.assert_allclose(iv.raw_scores, fd, rtol=1e-6)

    def test_constant_column_scores_zero(self):
        model, X = random_model(2, 3)
        X = X.copy()
        X[:, 1] = 0.7  # np.std of this column is not exactly zero
        iv = importance.importance_si(model, X)
        assert iv.scores[1] == 0.0

    def test_linear_function_scale_none(self):
        X = np.random.default_rng(0).normal(size=(30, 3))
        model = kan.init_model(X, activation="identity")
        layer = model.layers[0]
        layer.w_spline[...] = 0.0
        layer.w_base[...] = [[3.0, 0.0, 0.0]]
        iv = importance.importance_si(model, X, SensitivityConfig("none"))
        np.testing.assert_allclose(iv.raw_scores, [3.0, 0.0, 0.0])
        np.testing.assert_array_equal(iv.scores, [1.0, 0.0, 0.0])

    def test_permutation_equivariance(self):
        model, X = random_model(6, 4, 2, depth=2, scale=0.5)
        y = targets(model, X, 6)
        perm = np.array([2, 0, 3, 1])
        moved = model.copy()
        first = moved.layers[0]
        first.w_base[...] = first.w_base[:, perm]
        first.w_spline[...] = first.w_spline[:, perm]
        first.knots = tuple(first.knots[j] for j in perm)
        Xp = X[:, perm]
        for a, b in [(importance.importance_l1(model), importance.importance_l1(moved)),
                     (importance.importance_ko(model, X, y)[0], importance.importance_ko(moved, Xp, y)[0]),
                     (importance.importance_si(model, X), importance.importance_si(moved, Xp))]:
            np.testing.assert_allclose(b.scores, a.scores[perm], atol=1e-12)

    def test_iqr_scale(self):
        x = np.arange(1.0, 9.0)[:, None]
        assert importance.column_scale(x, "iqr")[0] == pytest.approx(3.5)

    def test_onehot_groups_sum(self):
        model, X = random_model(5, 4, scale=0.5)
        plain = importance.importance_si(model, X)
        grouped = importance.importance_si(model, X, SensitivityConfig(onehot_groups=[0, 1, 1, 2]))
        np.testing.assert_allclose(grouped.scores, [plain.scores[0], plain.scores[1] + plain.scores[2],
                                                    plain.scores[3]])

    def test_bad_scale(self):
        with pytest.raises(ValueError):
            SensitivityConfig(scale="mad")


class TestImportanceVector:
    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(0, 1e6), min_size=1, max_size=30))
    def test_normalize(self, raw):
        iv = importance.normalize(raw, "x")
        assert np.all(iv.scores >= 0)
        if iv.all_zero:
            assert not any(raw)
        else:
            assert iv.scores.sum() == pytest.approx(1.0, abs=1e-9)

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            importance.normalize([0.5, -0.1], "x")

    def test_json_round_trip(self):
        iv = importance.normalize([1.0, 3.0], "mi", feature_names=["a", "b"], info={"k": 1})
        back = ImportanceVector.from_json(iv.to_json())
        np.testing.assert_array_equal(back.scores, iv.scores)
        assert back.feature_names == ["a", "b"] and back.info == {"k": 1}

    def test_aggregate_groups(self):
        iv = importance.normalize([1.0, 1.0, 2.0], "mi")
        agg = importance.aggregate_groups(iv, [0, 1, 1], ["a", "b"])
        np.testing.assert_allclose(agg.scores, [0.25, 0.75])
        np.testing.assert_allclose(agg.raw_scores, [1.0, 3.0])
