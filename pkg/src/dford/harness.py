"""Drive an online learner over a stream and record its metrics.

The harness plays the environment: it holds the true labels and hands
directional learners nothing but a :class:`DirectionalOracle`.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .data import ExampleStream
from .losses import MetricsSnapshot, RunningMetrics
from .sampling import RNG_ALGORITHM


class DivergenceError(ArithmeticError):
    """Parameters became non-finite; carries the trial index."""

    def __init__(self, t: int, detail: str = ""):
        self.t = t
        super().__init__(f"parameters diverged at trial {t}" + (f": {detail}" if detail else ""))


class DirectionalOracle:
    """Answers ``1[label < y]`` for a label it keeps to itself."""

    __slots__ = ("_y",)

    def __init__(self, y: int):
        self._y = y

    def __call__(self, label: int) -> int:
        return 1 if label < self._y else 0


@dataclass
class StepOutcome:
    predicted: int
    sampled: int
    d: Optional[int]
    tau: float
    prob: float = 1.0
    mae: Optional[int] = None


@dataclass
class RunRecord:
    algorithm: str
    seed: int
    config: dict
    checkpoints: list[MetricsSnapshot] = field(default_factory=list)
    wall_time: float = 0.0
    rng_algorithm: str = RNG_ALGORITHM
    peak_buffer: Optional[int] = None
    error: Optional[str] = None

    @property
    def final_mae(self) -> float:
        return self.checkpoints[-1].mean_mae if self.checkpoints else float("nan")

    def curve(self, attr: str = "mean_mae") -> tuple[np.ndarray, np.ndarray]:
        t = np.array([c.t for c in self.checkpoints])
        return t, np.array([getattr(c, attr) for c in self.checkpoints], dtype=float)


def hinge_value(f: float, theta, y: int) -> float:
    """Scalar-loop hinge loss; quicker than numpy for a handful of thresholds."""
    total = 0.0
    for i, th in enumerate(theta):
        if i < y - 1:
            if th > f:
                total += th - f
        elif f > th:
            total += f - th
    return total


def _violations(theta: list) -> int:
    return sum(1 for a, b in zip(theta, theta[1:]) if b < a)


def run_online(learner, stream: ExampleStream, T: int, cadence: int = 1000,
               record_theta: bool = False, mae_mode: str = "predicted") -> RunRecord:
    """Run ``T`` steps of ``learner`` over ``stream``.

    ``learner.feedback`` is ``"directional"`` (the learner gets an oracle)
    or ``"full"`` (the learner gets the label).  MAE is scored on the
    deterministic prediction unless ``mae_mode="sampled"``.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    if cadence < 1:
        raise ValueError("cadence must be >= 1")
    record = RunRecord(algorithm=learner.name, seed=stream.seed if isinstance(stream.seed, int) else -1,
                       config=learner.describe())
    X, labels = stream.dataset.features, stream.dataset.labels
    idx = stream.indices(T)
    metrics = RunningMetrics()
    directional = learner.feedback == "directional"
    lam = learner.lam
    start = time.perf_counter()
    theta = learner.theta.tolist()
    for n in range(1, T + 1):
        i = idx[n - 1]
        x = X[i]
        y = int(labels[i])
        f = learner.score(x)
        loss = 0.5 * lam * learner.norm_sq + hinge_value(f, theta, y)
        out = learner.step(x, DirectionalOracle(y) if directional else y, score=f)
        label = out.sampled if mae_mode == "sampled" else out.predicted
        mae = abs(label - y)
        out.mae = mae
        theta = learner.theta.tolist()
        metrics.update(mae, loss, _violations(theta))
        if n % cadence == 0 or n == T:
            record.checkpoints.append(metrics.snapshot(learner.theta if record_theta else None))
    record.wall_time = time.perf_counter() - start
    record.peak_buffer = getattr(learner, "peak_buffer", None)
    return record
