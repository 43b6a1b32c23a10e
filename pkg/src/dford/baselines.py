"""Linear baselines: regularized PRank and PRIL.

PRank sees the true label.  PRIL sees the directional bit for its own
deterministic prediction and turns it into an interval label.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np

from .harness import DivergenceError, StepOutcome
from .losses import IntervalLabel
from .model import LinearScorer, OrdinalModel, Thresholds, label_from_score


class ImpossibleFeedbackError(ValueError):
    """``d = 1`` reported for the top label, which no true label allows."""


@dataclass(frozen=True)
class BaselineConfig:
    K: int
    dim: int
    lam: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.K < 2 or self.dim < 1 or not self.lam > 0:
            raise ValueError("need K >= 2, dim >= 1 and lam > 0")


def directional_to_interval(y_hat: int, d: int, K: int) -> IntervalLabel:
    if not 1 <= y_hat <= K:
        raise ValueError(f"label {y_hat} outside [1, {K}]")
    if d == 1:
        if y_hat == K:
            raise ImpossibleFeedbackError(f"d=1 for the top label {K}")
        return IntervalLabel(y_hat + 1, K, K)
    return IntervalLabel(1, y_hat, K)


class _LinearBaseline:
    name = "baseline"

    def __init__(self, config: BaselineConfig):
        self.config = config
        self.K = config.K
        self.lam = config.lam
        self.w = np.zeros(config.dim)
        self.theta = np.zeros(config.K - 1)
        self.t = 1
        self.norm_sq = 0.0
        # labels i = 1..K-1 as a vector, for building sign patterns
        self._idx = np.arange(1, config.K)

    def describe(self) -> dict:
        return {"algorithm": self.name, **asdict(self.config)}

    @property
    def model(self) -> OrdinalModel:
        return OrdinalModel(LinearScorer(self.w.copy()), Thresholds(self.theta.copy(), self.K))

    def score(self, x) -> float:
        return float(np.dot(self.w, x))

    def predict(self, x) -> int:
        return label_from_score(self.score(x), self.theta)

    def _sgd(self, x, z: np.ndarray, f: float) -> float:
        """One step on the regularized hinge with sign pattern ``z``."""
        tau = np.where(z * (f - self.theta) <= 0, z, 0.0)
        t = self.t
        eta = 1.0 / (self.lam * t)
        shrink = 1.0 - eta * self.lam
        total = float(tau.sum())
        self.w *= shrink
        if total != 0.0:
            self.w += (eta * total) * x
        self.theta *= shrink
        self.theta -= eta * tau
        self.t = t + 1
        self.norm_sq = float(np.dot(self.w, self.w) + np.dot(self.theta, self.theta))
        if not math.isfinite(self.norm_sq):
            raise DivergenceError(t, self.name)
        return total


class PRank(_LinearBaseline):
    """Full-information SGD on the regularized hinge.

    Starts at ``t = 1``, so the first shrink factor is zero; harmless from
    the zero initialisation.
    """

    name = "prank"
    feedback = "full"

    def step(self, x, y_true: int, score: Optional[float] = None) -> StepOutcome:
        if not 1 <= y_true <= self.K:
            raise ValueError(f"label {y_true} outside [1, {self.K}]")
        x = np.asarray(x, dtype=np.float64)
        f = self.score(x) if score is None else score
        y_hat = label_from_score(f, self.theta)
        z = np.where(self._idx < y_true, 1.0, -1.0)
        total = self._sgd(x, z, f)
        return StepOutcome(y_hat, y_hat, None, total)


class PRIL(_LinearBaseline):
    """Interval-label SGD driven by the bit for the deterministic prediction."""

    name = "pril"
    feedback = "directional"

    def step(self, x, oracle: Callable[[int], int], score: Optional[float] = None) -> StepOutcome:
        x = np.asarray(x, dtype=np.float64)
        f = self.score(x) if score is None else score
        y_hat = label_from_score(f, self.theta)
        d = oracle(y_hat)
        interval = directional_to_interval(y_hat, d, self.K)
        idx = self._idx
        z = (idx < interval.y_l).astype(float) - (idx >= interval.y_r)
        total = self._sgd(x, z, f)
        return StepOutcome(y_hat, y_hat, d, total)


def prank_step(learner: PRank, x, y_true: int) -> PRank:
    learner.step(x, y_true)
    return learner


def pril_step(learner: PRIL, x, y_hat: int, d: int) -> PRIL:
    """Apply a PRIL update for an externally supplied ``(y_hat, d)`` pair."""
    x = np.asarray(x, dtype=np.float64)
    interval = directional_to_interval(y_hat, d, learner.K)
    idx = learner._idx
    z = (idx < interval.y_l).astype(float) - (idx >= interval.y_r)
    learner._sgd(x, z, learner.score(x))
    return learner


def train_prank(X: np.ndarray, y: np.ndarray, K: int, lam: float, epochs: int = 20,
                seed: int = 0) -> PRank:
    """Shuffled multi-epoch PRank; used to build a fixed comparator."""
    rng = np.random.default_rng(seed)
    learner = PRank(BaselineConfig(K=K, dim=X.shape[1], lam=lam, seed=seed))
    for _ in range(epochs):
        for i in rng.permutation(X.shape[0]):
            learner.step(X[i], int(y[i]))
    return learner
