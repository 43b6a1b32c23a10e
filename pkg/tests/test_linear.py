from __future__ import annotations


import numpy as np
import pytest

from dford.data import ExampleStream
from dford.harness import DirectionalOracle, DivergenceError, run_online
from dford.linear import DFORDLinear, LinearLearnerConfig, run
from dford.sampling import mixture


class FixedUniform:
    """Stand-in generator whose uniforms are scripted."""

    def __init__(self, values):
        self.values = list(values)

    def random(self):
        return self.values.pop(0)


class RecordingOracle:
    def __init__(self, y):
        self._oracle = DirectionalOracle(y)
        self.queries = []

    def __call__(self, label):
        self.queries.append(label)
        return self._oracle(label)


def test_initial_prediction_is_one():
    learner = DFORDLinear(LinearLearnerConfig(K=4, dim=3))
    assert learner.t == 2
    assert learner.predict(np.array([5.0, -2.0, 1.0])) == 1


def test_hand_traced_step():
    gamma = 0.4
    cfg = LinearLearnerConfig(K=3, dim=2, lam=1.0, gamma=gamma)
    learner = DFORDLinear(cfg, rng=FixedUniform([0.0]))
    out = learner.step(np.array([1.0, 0.0]), DirectionalOracle(3))
    # independent arithmetic: counts for y_hat = 1, K = 3 are (3, 2, 1) / 6
    p1 = (1 - gamma) + gamma * 3 / 6
    assert mixture(3, 1, gamma).prob(1) == pytest.approx(p1)
    assert (out.predicted, out.sampled, out.d) == (1, 1, 1)
    assert out.tau == pytest.approx(1 / p1)
    np.testing.assert_allclose(learner.w, [0.5 / p1, 0.0])
    np.testing.assert_allclose(learner.theta, [-0.5 / p1, 0.0])
    assert learner.t == 3


def test_overshoot_without_exploration_only_shrinks():
    cfg = LinearLearnerConfig(K=3, dim=2, lam=1.0, gamma=0.0)
    learner = DFORDLinear(cfg)
    learner.w[:] = [1.0, 0.0]
    learner.theta[:] = [0.5, 2.0]
    x = np.array([1.0, 0.0])           # score 1 -> predicted 2
    out = learner.step(x, DirectionalOracle(1))
    assert out.sampled == 2 and out.d == 0 and out.tau == 0.0
    np.testing.assert_allclose(learner.w, [0.5, 0.0])
    np.testing.assert_allclose(learner.theta, [0.25, 1.0])


def test_no_exploration_labels_when_gamma_zero(small_linear):
    learner = DFORDLinear(LinearLearnerConfig(K=5, dim=5, gamma=0.0, seed=1))
    for x, y in zip(small_linear.features[:500], small_linear.labels[:500]):
        out = learner.step(x, DirectionalOracle(int(y)))
        assert out.sampled == out.predicted


def test_single_query_per_step(small_linear):
    learner = DFORDLinear(LinearLearnerConfig(K=5, dim=5, seed=2))
    for x, y in zip(small_linear.features[:200], small_linear.labels[:200]):
        oracle = RecordingOracle(int(y))
        out = learner.step(x, oracle)
        assert oracle.queries == [out.sampled]


def test_update_magnitude_bound(small_linear):
    learner = DFORDLinear(LinearLearnerConfig(K=5, dim=5, lam=2.0, seed=3))
    for x, y in zip(small_linear.features[:2000], small_linear.labels[:2000]):
        eta = 1 / (learner.lam * learner.t)
        before = np.linalg.norm(learner.w)
        out = learner.step(x, DirectionalOracle(int(y)))
        bound = (1 - eta * learner.lam) * before + eta * abs(out.tau) * np.linalg.norm(x)
        assert np.linalg.norm(learner.w) <= bound + 1e-12


def test_only_sampled_threshold_moves_beyond_shrink(small_linear):
    learner = DFORDLinear(LinearLearnerConfig(K=5, dim=5, seed=4))
    for x, y in zip(small_linear.features[:300], small_linear.labels[:300]):
        shrink = 1 - 1 / learner.t
        before = learner.theta.copy()
        out = learner.step(x, DirectionalOracle(int(y)))
        moved = np.flatnonzero(np.abs(learner.theta - shrink * before) > 1e-12)
        assert set(moved) <= ({out.sampled - 1} if out.sampled < 5 else set())


def test_clipping_bounds_step(small_linear):
    alpha = 0.5
    learner = DFORDLinear(LinearLearnerConfig(K=5, dim=5, lam=1.0, gamma=0.2, alpha=alpha, seed=5))
    for x, y in zip(small_linear.features[:1000], small_linear.labels[:1000]):
        eta = 1 / (learner.lam * learner.t)
        u0 = np.concatenate([learner.w, learner.theta])
        learner.step(x, DirectionalOracle(int(y)))
        u1 = np.concatenate([learner.w, learner.theta])
        assert np.linalg.norm(u1 - u0) <= eta * alpha * (1 + 1e-9) or \
            np.linalg.norm(u1 - u0) <= eta * np.linalg.norm(u0) * learner.lam + 1e-12


def test_clip_always_rescales_every_step():
    cfg = LinearLearnerConfig(K=3, dim=1, lam=1.0, gamma=0.5, alpha=10.0, clip_always=True)
    learner = DFORDLinear(cfg, rng=FixedUniform([0.0]))
    learner.step(np.array([1.0]), DirectionalOracle(3))
    step = np.concatenate([learner.w, learner.theta])
    assert np.linalg.norm(step) == pytest.approx(0.5 * 10.0)


def test_divergence_reported():
    learner = DFORDLinear(LinearLearnerConfig(K=3, dim=1))
    with pytest.raises(DivergenceError) as info:
        learner.step(np.array([1e308]), DirectionalOracle(3))
    assert info.value.t == 2


def test_dimension_check():
    learner = DFORDLinear(LinearLearnerConfig(K=3, dim=2))
    with pytest.raises(ValueError):
        learner.step(np.ones(3), DirectionalOracle(2))


@pytest.mark.parametrize("kwargs", [dict(K=1), dict(lam=0), dict(gamma=1.5), dict(alpha=0.0), dict(dim=0)])
def test_config_validation(kwargs):
    base = dict(K=3, dim=2)
    base.update(kwargs)
    with pytest.raises(ValueError):
        LinearLearnerConfig(**base)


class TestRun:
    def test_T_zero_rejected(self, small_linear):
        with pytest.raises(ValueError):
            run(LinearLearnerConfig(K=5, dim=5), ExampleStream(small_linear, 0), 0)

    def test_T_one(self, small_linear):
        rec = run(LinearLearnerConfig(K=5, dim=5), ExampleStream(small_linear, 0), 1)
        assert len(rec.checkpoints) == 1 and rec.checkpoints[0].t == 1

    def test_same_seed_identical(self, small_linear):
        cfg = LinearLearnerConfig(K=5, dim=5, seed=8)
        a = run(cfg, ExampleStream(small_linear, 8), 3000, cadence=500, record_theta=True)
        b = run(cfg, ExampleStream(small_linear, 8), 3000, cadence=500, record_theta=True)
        for ca, cb in zip(a.checkpoints, b.checkpoints):
            assert (ca.t, ca.mean_mae, ca.cum_loss, ca.violations) == (cb.t, cb.mean_mae, cb.cum_loss, cb.violations)
            np.testing.assert_array_equal(ca.theta, cb.theta)

    def test_checkpoints_increasing(self, small_linear):
        rec = run(LinearLearnerConfig(K=5, dim=5), ExampleStream(small_linear, 0), 2500, cadence=1000)
        assert [c.t for c in rec.checkpoints] == [1000, 2000, 2500]

    def test_learning_progress(self, small_linear):
        rec = run(LinearLearnerConfig(K=5, dim=5, gamma=0.4, seed=1), ExampleStream(small_linear, 1), 30_000)
        assert rec.final_mae < rec.checkpoints[0].mean_mae

    def test_sampled_mae_mode(self, small_linear):
        cfg = LinearLearnerConfig(K=5, dim=5, gamma=0.8, seed=1)
        a = run(cfg, ExampleStream(small_linear, 1), 2000)
        b = run(cfg, ExampleStream(small_linear, 1), 2000, mae_mode="sampled")
        assert b.final_mae > a.final_mae

    def test_loss_matches_definition(self, small_linear):
        from dford.losses import regularized_loss
        cfg = LinearLearnerConfig(K=5, dim=5, lam=3.0, seed=2)
        learner = DFORDLinear(cfg)
        stream = ExampleStream(small_linear, 2)
        rec = run_online(DFORDLinear(cfg), ExampleStream(small_linear, 2), 50, cadence=50)
        total = 0.0
        for i in stream.indices(50):
            x, y = small_linear.features[i], int(small_linear.labels[i])
            total += regularized_loss(learner.w, learner.theta, x, y, cfg.lam)
            learner.step(x, DirectionalOracle(y))
        assert rec.checkpoints[-1].cum_loss == pytest.approx(total, rel=1e-12)


def test_lambda_only_rescales_parameters(small_linear):
    # without clipping, u_t is (1 / (lam t)) times a lam-free sum, so
    # predictions and sampled labels do not depend on lambda
    runs = []
    for lam in (1.0, 8.0):
        learner = DFORDLinear(LinearLearnerConfig(K=5, dim=5, lam=lam, seed=6))
        outs = [learner.step(x, DirectionalOracle(int(y))).sampled
                for x, y in zip(small_linear.features[:1000], small_linear.labels[:1000])]
        runs.append((outs, learner.w * lam))
    assert runs[0][0] == runs[1][0]
    np.testing.assert_allclose(runs[0][1], runs[1][1], rtol=1e-9, atol=1e-12)
