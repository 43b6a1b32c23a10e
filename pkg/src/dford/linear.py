"""DFORD-Linear: online linear ordinal regression from directional feedback."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np

from .data import ExampleStream
from .estimation import clip_factor, sampled_tau
from .harness import DivergenceError, RunRecord, StepOutcome, run_online
from .model import LinearScorer, OrdinalModel, Thresholds, label_from_score
from .sampling import MixtureTable, make_rng, split_seed


@dataclass(frozen=True)
class LinearLearnerConfig:
    K: int
    dim: int
    lam: float = 1.0
    gamma: float = 0.4
    alpha: Optional[float] = None
    seed: int = 0
    clip_always: bool = False

    def __post_init__(self):
        if self.K < 2:
            raise ValueError("K must be >= 2")
        if not self.lam > 0:
            raise ValueError("lambda must be > 0")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.alpha is not None and not self.alpha > 0:
            raise ValueError("alpha must be > 0")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")


class DFORDLinear:
    """Learner state: ``w``, ``theta``, the trial counter and a private RNG.

    The trial counter starts at 2, so ``eta_t = 1 / (lam t)`` never wipes
    the parameters.  Only the queried label's threshold moves besides the
    uniform ``(1 - eta_t lam)`` shrinkage.
    """

    name = "dford-linear"
    feedback = "directional"

    def __init__(self, config: LinearLearnerConfig, rng: Optional[np.random.Generator] = None):
        self.config = config
        self.K = config.K
        self.lam = config.lam
        self.w = np.zeros(config.dim)
        self.theta = np.zeros(config.K - 1)
        self.t = 2
        self.norm_sq = 0.0
        self.rng = rng if rng is not None else make_rng(split_seed(config.seed)[1])
        self._table = MixtureTable(config.K, config.gamma)

    def describe(self) -> dict:
        return {"algorithm": self.name, **asdict(self.config)}

    @property
    def model(self) -> OrdinalModel:
        return OrdinalModel(LinearScorer(self.w.copy()), Thresholds(self.theta.copy(), self.K))

    def score(self, x) -> float:
        return float(np.dot(self.w, x))

    def predict(self, x) -> int:
        return label_from_score(self.score(x), self.theta)

    def step(self, x, oracle: Callable[[int], int], score: Optional[float] = None) -> StepOutcome:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != self.w.shape:
            raise ValueError(f"expected {self.w.shape[0]} features, got {x.shape}")
        f = self.score(x) if score is None else score
        theta = self.theta
        y_hat = label_from_score(f, theta)
        s = self._table.draw(y_hat, self.rng)
        p = self._table.probs[y_hat - 1][s - 1]
        d = oracle(s)
        tau = sampled_tau(p, d, f, theta[s - 1] if s < self.K else math.inf)

        t = self.t
        eta = 1.0 / (self.lam * t)
        if self.config.alpha is None:
            shrink = 1.0 - eta * self.lam
            self.w *= shrink
            theta *= shrink
            if tau != 0.0:
                self.w += (eta * tau) * x
                theta[s - 1] -= eta * tau
        else:
            g_w = self.lam * self.w - tau * x
            g_theta = self.lam * theta
            if tau != 0.0:
                g_theta[s - 1] += tau
            norm = math.sqrt(float(np.dot(g_w, g_w) + np.dot(g_theta, g_theta)))
            c = clip_factor(norm, self.config.alpha, self.config.clip_always)
            self.w -= (eta * c) * g_w
            theta -= (eta * c) * g_theta
        self.t = t + 1
        self.norm_sq = float(np.dot(self.w, self.w) + np.dot(theta, theta))
        if not math.isfinite(self.norm_sq):
            raise DivergenceError(t)
        return StepOutcome(y_hat, s, d, tau, p)


def run(config: LinearLearnerConfig, stream: ExampleStream, T: int, cadence: int = 1000,
        record_theta: bool = False, mae_mode: str = "predicted") -> RunRecord:
    learner = DFORDLinear(config)
    try:
        return run_online(learner, stream, T, cadence, record_theta, mae_mode)
    except DivergenceError as exc:
        raise DivergenceError(exc.t, f"dford-linear seed={config.seed}") from exc
