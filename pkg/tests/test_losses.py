from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dford.losses import (IntervalLabel, RunningMetrics, hinge_loss, interval_hinge_loss,
                          interval_signs, label_signs, mae_loss, regularized_loss,
                          regularized_subgradient, violation_count)
from dford.model import label_from_score


class TestMAE:
    def test_term_by_term(self):
        assert mae_loss(1.5, [0.0, 1.0, 2.0], 2) == 1

    def test_zero_inside_interval(self):
        assert mae_loss(0.5, [0.0, 1.0, 2.0], 2) == 0

    def test_equals_label_distance_when_sorted(self, rng):
        for _ in range(100_000 // 100):
            K = int(rng.integers(2, 8))
            theta = np.sort(rng.normal(size=(100, K - 1)), axis=1)
            f = rng.normal(scale=2, size=100)
            y = rng.integers(1, K + 1, size=100)
            for th, ff, yy in zip(theta, f, y):
                assert mae_loss(ff, th, int(yy)) == abs(label_from_score(ff, th) - yy)

    def test_exhaustive_grid(self):
        # grid offset so no score lands exactly on a threshold
        grid = np.linspace(-1.5, 1.5, 13) + 0.01
        for K in range(2, 7):
            theta = np.linspace(-1, 1, K - 1)
            for f in grid:
                for y in range(1, K + 1):
                    assert mae_loss(f, theta, y) == abs(label_from_score(f, theta) - y)

    def test_tie_counts_score_as_above(self):
        # the loss treats f = theta_i as past the threshold while prediction
        # sends the tie down; the two only disagree on this measure-zero set
        assert label_from_score(1.0, [0.0, 1.0, 2.0]) == 2
        assert mae_loss(1.0, [0.0, 1.0, 2.0], 2) == 1

    def test_range(self):
        with pytest.raises(ValueError):
            mae_loss(0.0, [0.0], 3)


class TestHinge:
    def test_example(self):
        assert hinge_loss(0.5, [0.0, 1.0], 1) == pytest.approx(0.5)

    def test_deep_inside(self):
        assert hinge_loss(5.0, [-1.0, 0.0, 1.0], 4) == 0.0

    def test_dominates_indicator(self, rng):
        for _ in range(2000):
            K = int(rng.integers(2, 7))
            theta = rng.normal(size=K - 1)
            f = float(rng.normal())
            y = int(rng.integers(1, K + 1))
            z = label_signs(y, K)
            indicator = int(np.sum(z * (f - theta) < 0))
            # hinge at unit margin bounds the count; the margin-free hinge bounds it scaled
            assert np.sum(np.maximum(0, 1 - z * (f - theta))) >= indicator
            assert hinge_loss(f, theta, y) >= 0

    def test_midpoint_convexity(self, rng):
        for _ in range(2000):
            K = int(rng.integers(2, 7))
            y = int(rng.integers(1, K + 1))
            a, b = rng.normal(size=K), rng.normal(size=K)
            m = 0.5 * (a + b)
            lhs = hinge_loss(m[0], m[1:], y)
            rhs = 0.5 * (hinge_loss(a[0], a[1:], y) + hinge_loss(b[0], b[1:], y))
            assert lhs <= rhs + 1e-9


class TestIntervalHinge:
    def test_singleton_equals_hinge(self, rng):
        for _ in range(500):
            K = int(rng.integers(2, 7))
            y = int(rng.integers(1, K + 1))
            theta = rng.normal(size=K - 1)
            f = float(rng.normal())
            assert interval_hinge_loss(f, theta, IntervalLabel(y, y, K)) == hinge_loss(f, theta, y)

    def test_signs_against_definition(self):
        for K in range(2, 7):
            for lo in range(1, K + 1):
                for hi in range(lo, K + 1):
                    z = interval_signs(IntervalLabel(lo, hi, K))
                    expected = [(1 if i < lo else 0) - (1 if hi <= i <= K else 0) for i in range(1, K)]
                    assert z.tolist() == expected

    def test_full_range_only_penalises_nothing_below(self):
        # (1, K): no +1 signs, and i >= K never occurs among stored thresholds
        assert interval_signs(IntervalLabel(1, 4, 4)).tolist() == [0, 0, 0]

    def test_wide_interval_is_zero(self):
        theta = [0.0, 1.0, 2.0, 3.0]
        assert interval_hinge_loss(1.5, theta, IntervalLabel(2, 4, 5)) == 0.0

    @given(st.integers(2, 6), st.data())
    def test_zero_iff_constraints_hold(self, K, data):
        lo = data.draw(st.integers(1, K))
        hi = data.draw(st.integers(lo, K))
        theta = sorted(data.draw(st.lists(st.floats(-3, 3), min_size=K - 1, max_size=K - 1)))
        f = data.draw(st.floats(-4, 4))
        loss = interval_hinge_loss(f, theta, IntervalLabel(lo, hi, K))
        ok = all(f >= theta[i - 1] for i in range(1, lo)) and all(f <= theta[i - 1] for i in range(hi, K))
        assert (loss == 0) == ok

    def test_invalid(self):
        with pytest.raises(ValueError):
            IntervalLabel(3, 2, 5)


class TestRegularized:
    def test_origin(self):
        assert regularized_loss([0, 0], [0, 0], [1, 2], 3, 2.0) == hinge_loss(0.0, [0, 0], 3)

    def test_lambda_zero_is_hinge(self, rng):
        w, theta, x = rng.normal(size=3), rng.normal(size=2), rng.normal(size=3)
        assert regularized_loss(w, theta, x, 2, 0.0) == pytest.approx(hinge_loss(w @ x, theta, 2))

    def test_kernel_form(self):
        assert regularized_loss(None, [1.0], None, 1, 2.0, f=0.0, f_norm_sq=3.0) == pytest.approx(4.0)

    def test_strong_convexity(self, rng):
        lam = 1.0
        for _ in range(10_000 // 10):
            K = int(rng.integers(2, 6))
            d = 3
            y = int(rng.integers(1, K + 1))
            x = rng.normal(size=d)
            u1 = rng.normal(size=d + K - 1)
            u0 = rng.normal(size=d + K - 1)
            gw, gt = regularized_subgradient(u0[:d], u0[d:], x, y, lam)
            g = np.concatenate([gw, gt])
            lhs = regularized_loss(u1[:d], u1[d:], x, y, lam) - regularized_loss(u0[:d], u0[d:], x, y, lam)
            rhs = g @ (u1 - u0) + 0.5 * lam * np.sum((u1 - u0) ** 2)
            assert lhs >= rhs - 1e-9


class TestViolations:
    def test_examples(self):
        assert violation_count([0, 1, 2]) == 0
        assert violation_count([3, 2, 1]) == 2
        assert violation_count([0, 2, 1, 3]) == 1


class TestRunningMetrics:
    def test_running_mean(self):
        m = RunningMetrics()
        maes = [2, 0, 1, 1, 3]
        for v in maes:
            m.update(v, 0.5, 1)
        snap = m.snapshot([0.0, 1.0])
        assert abs(snap.mean_mae - sum(maes) / 5) <= 1e-9
        assert snap.inst_mae == 3
        assert snap.cum_loss == pytest.approx(2.5)
        assert snap.mean_violations == 1
        assert snap.theta.tolist() == [0.0, 1.0]
