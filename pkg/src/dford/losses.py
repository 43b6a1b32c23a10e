"""Losses and per-run metrics for threshold ordinal models.

Every loss sums over ``i = 1..K``; the ``i = K`` term involves
``theta_K = +inf`` and always vanishes, so only the stored ``K - 1``
thresholds are visited.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class IntervalLabel:
    y_l: int
    y_r: int
    K: int

    def __post_init__(self):
        if not 1 <= self.y_l <= self.y_r <= self.K:
            raise ValueError(f"invalid interval [{self.y_l}, {self.y_r}] for K={self.K}")


def label_signs(y: int, K: int) -> np.ndarray:
    """``z_i = +1`` for ``i < y`` and ``-1`` otherwise, ``i = 1..K-1``."""
    if not 1 <= y <= K:
        raise ValueError(f"label {y} outside [1, {K}]")
    z = -np.ones(K - 1)
    z[: y - 1] = 1.0
    return z


def interval_signs(interval: IntervalLabel) -> np.ndarray:
    """``z_i = 1[i < y_l] - 1[y_r <= i <= K]`` for ``i = 1..K-1``."""
    i = np.arange(1, interval.K)
    return (i < interval.y_l).astype(float) - (i >= interval.y_r).astype(float)


def active_tau(z: np.ndarray, f: float, theta: np.ndarray) -> np.ndarray:
    """``tau_i = z_i * 1[z_i (f - theta_i) <= 0]``."""
    return np.where(z * (f - theta) <= 0, z, 0.0)


def mae_loss(f: float, theta, y: int) -> int:
    theta = np.asarray(theta, dtype=np.float64)
    K = theta.shape[0] + 1
    if not 1 <= y <= K:
        raise ValueError(f"label {y} outside [1, {K}]")
    below = int(np.sum(f < theta[: y - 1]))
    above = int(np.sum(f >= theta[y - 1:]))
    return below + above


def _hinge(f: float, theta: np.ndarray, z: np.ndarray) -> float:
    return float(np.sum(np.maximum(0.0, -z * (f - theta))))


def hinge_loss(f: float, theta, y: int) -> float:
    theta = np.asarray(theta, dtype=np.float64)
    return _hinge(f, theta, label_signs(y, theta.shape[0] + 1))


def interval_hinge_loss(f: float, theta, interval: IntervalLabel) -> float:
    theta = np.asarray(theta, dtype=np.float64)
    return _hinge(f, theta, interval_signs(interval))


def regularized_loss(w, theta, x, y: int, lam: float, f: Optional[float] = None,
                     f_norm_sq: Optional[float] = None) -> float:
    """``(lam / 2) (|f|^2 + |theta|^2) + hinge``.

    For a linear model pass ``w`` and ``x``.  For a kernel model pass
    ``w=None`` together with the score ``f`` and the RKHS norm ``f_norm_sq``.
    """
    theta = np.asarray(theta, dtype=np.float64)
    if w is not None:
        w = np.asarray(w, dtype=np.float64)
        f = float(np.dot(w, x))
        f_norm_sq = float(np.dot(w, w))
    reg = 0.5 * lam * (f_norm_sq + float(np.dot(theta, theta)))
    return reg + hinge_loss(f, theta, y)


def regularized_subgradient(w, theta, x, y: int, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Subgradient of the regularized loss in ``(w, theta)``.

    At a kink the active branch is taken, matching the ``<= 0`` rule.
    """
    w = np.asarray(w, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    tau = active_tau(label_signs(y, theta.shape[0] + 1), float(np.dot(w, x)), theta)
    return lam * w - tau.sum() * x, lam * theta + tau


def violation_count(theta) -> int:
    """Number of adjacent pairs with ``theta_{i+1} < theta_i``."""
    theta = np.asarray(theta, dtype=np.float64)
    return int(np.sum(theta[1:] < theta[:-1]))


@dataclass
class MetricsSnapshot:
    t: int
    mean_mae: float
    inst_mae: float
    cum_loss: float
    violations: int
    mean_violations: float
    theta: Optional[np.ndarray] = None


class RunningMetrics:
    """Accumulates per-step MAE, surrogate loss and violation counts."""

    def __init__(self):
        self.t = 0
        self.sum_mae = 0
        self.cum_loss = 0.0
        self.sum_violations = 0
        self.last_mae = 0
        self.last_violations = 0

    def update(self, mae: int, loss: float, violations: int):
        self.t += 1
        self.sum_mae += mae
        self.cum_loss += loss
        self.sum_violations += violations
        self.last_mae = mae
        self.last_violations = violations

    def snapshot(self, theta=None) -> MetricsSnapshot:
        return MetricsSnapshot(
            t=self.t,
            mean_mae=self.sum_mae / self.t,
            inst_mae=float(self.last_mae),
            cum_loss=self.cum_loss,
            violations=self.last_violations,
            mean_violations=self.sum_violations / self.t,
            theta=None if theta is None else np.array(theta, dtype=np.float64),
        )
