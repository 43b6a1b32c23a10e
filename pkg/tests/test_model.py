from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dford.model import (DimensionError, KernelScorer, KernelSpec, LinearScorer, NumericError,
                         OrdinalModel, Thresholds, label_from_score, predict, score)


def linear_model(w, theta):
    theta = np.asarray(theta, dtype=float)
    return OrdinalModel(LinearScorer(np.asarray(w, dtype=float)), Thresholds(theta, len(theta) + 1))


class TestPredict:
    def test_between_thresholds(self):
        assert predict(linear_model([0.7], [0.5, 1.0]), [1.0]) == 2

    def test_below_all(self):
        assert predict(linear_model([-5.0], [0.0, 1.0]), [1.0]) == 1

    def test_above_all_uses_implicit_top(self):
        assert predict(linear_model([99.0], [0.0, 1.0]), [1.0]) == 3

    def test_tie_goes_to_lower_label(self):
        assert label_from_score(1.0, [0.0, 1.0, 2.0]) == 2

    def test_unsorted_thresholds_not_resorted(self):
        # f = 0.5 fails theta_1 = 1.0 first even though theta_2 = 0.0 < theta_1
        assert label_from_score(0.5, [1.0, 0.0]) == 1
        assert label_from_score(1.5, [1.0, 0.0]) == 3

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            predict(linear_model([1.0, 2.0], [0.0]), [1.0, 2.0, 3.0])

    def test_initial_model_predicts_one(self):
        model = linear_model(np.zeros(4), np.zeros(3))
        assert predict(model, np.ones(4)) == 1

    @given(st.lists(st.floats(-10, 10), min_size=1, max_size=7),
           st.floats(-12, 12))
    def test_count_form_matches_min_rule(self, theta, f):
        theta = sorted(theta)
        assert label_from_score(f, theta) == 1 + sum(f > t for t in theta)

    @given(st.lists(st.floats(-10, 10), min_size=1, max_size=7),
           st.floats(-12, 12), st.floats(-12, 12))
    def test_monotone_in_score(self, theta, f1, f2):
        theta = sorted(theta)
        lo, hi = min(f1, f2), max(f1, f2)
        assert label_from_score(lo, theta) <= label_from_score(hi, theta)


class TestScore:
    def test_linear(self):
        assert score(linear_model([1.0, 2.0], [0.0]), [3.0, 1.0]) == 5.0

    def test_kernel_single_term(self):
        a = np.array([2.0, 0.0])
        scorer = KernelScorer([2.0], [a], 0.5, KernelSpec("linear"))
        assert scorer(a) == pytest.approx(4.0)

    def test_kernel_empty(self):
        scorer = KernelScorer(np.zeros(0), np.zeros((0, 3)), 1.0)
        assert scorer(np.ones(3)) == 0.0

    def test_non_finite_score(self):
        with pytest.raises(NumericError):
            score(linear_model([np.inf], [0.0]), [1.0])

    def test_kernel_matches_manual_sum(self, rng):
        kern = KernelSpec.parse("poly:3")
        anchors = rng.normal(size=(6, 4))
        coef = rng.normal(size=6)
        x = rng.normal(size=4)
        expected = 0.25 * sum(c * (1 + a @ x) ** 3 for c, a in zip(coef, anchors))
        assert KernelScorer(coef, anchors, 0.25, kern)(x) == pytest.approx(expected, rel=1e-12)


class TestThresholds:
    def test_length_checked(self):
        with pytest.raises(ValueError):
            Thresholds(np.zeros(3), 3)

    def test_K_at_least_two(self):
        with pytest.raises(ValueError):
            Thresholds(np.zeros(0), 1)

    def test_finite(self):
        with pytest.raises(NumericError):
            Thresholds([0.0, np.inf], 3)

    def test_unsorted_allowed(self):
        th = Thresholds([1.0, 0.0], 3)
        assert not th.is_sorted()

    def test_read_only(self):
        th = Thresholds.zeros(4)
        with pytest.raises(ValueError):
            th.values[0] = 1.0


class TestKernelSpec:
    @pytest.mark.parametrize("text", ["poly:3:1", "poly:2:0.5", "rbf:0.25", "linear"])
    def test_parse_round_trip(self, text):
        spec = KernelSpec.parse(text)
        assert KernelSpec.parse(str(spec)) == spec

    def test_default_is_cubic_polynomial(self):
        assert KernelSpec()([1.0, 1.0], [1.0, 0.0]) == 8.0

    @pytest.mark.parametrize("bad", ["poly:0", "rbf:0", "rbf:-1", "sigmoid"])
    def test_invalid(self, bad):
        with pytest.raises(ValueError):
            KernelSpec.parse(bad)

    @settings(max_examples=50)
    @given(st.sampled_from(["poly:3", "poly:2:0.5", "rbf:0.5", "linear"]),
           st.lists(st.floats(-3, 3), min_size=3, max_size=3),
           st.lists(st.floats(-3, 3), min_size=3, max_size=3))
    def test_symmetric_and_nonnegative_diagonal(self, text, a, b):
        k = KernelSpec.parse(text)
        assert k(a, b) == pytest.approx(k(b, a))
        assert k(a, a) >= 0

    def test_gram_matches_pairwise(self, rng):
        for text in ["poly:3", "rbf:0.3", "linear"]:
            k = KernelSpec.parse(text)
            A, B = rng.normal(size=(4, 3)), rng.normal(size=(5, 3))
            G = k.gram(A, B)
            manual = np.array([[k(a, b) for b in B] for a in A])
            np.testing.assert_allclose(G, manual, rtol=1e-12, atol=1e-12)
            np.testing.assert_allclose(k.against(A, B[0]), manual[:, 0], rtol=1e-12)
