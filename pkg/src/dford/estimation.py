"""Importance-weighted estimates built from a single directional bit.

Querying a label ``s`` drawn from ``P`` and observing ``d = 1[s < y]`` gives

* ``z~_s = (2d - 1) / P(s)`` and ``z~_i = 0`` for ``i != s``;
* ``tau~_i = z~_i * 1[z~_i (f - theta_i) <= 0]``;

both unbiased for the full-information ``z`` and ``tau``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .sampling import LabelDistribution


class InvariantError(RuntimeError):
    pass


@dataclass(frozen=True)
class DirectionalFeedback:
    sampled: int
    d: int

    def __post_init__(self):
        if self.d not in (0, 1):
            raise ValueError(f"feedback bit must be 0 or 1, got {self.d}")


@dataclass(frozen=True)
class EstimatedLabels:
    z_tilde: np.ndarray
    tau_tilde: np.ndarray
    sampled: int

    @property
    def tau(self) -> float:
        """The only possibly-nonzero entry, ``tau~`` at the sampled label."""
        return float(self.tau_tilde[self.sampled - 1])


@dataclass(frozen=True)
class GradientEstimate:
    d_w: np.ndarray
    d_theta: np.ndarray

    def norm(self) -> float:
        return math.sqrt(float(np.dot(self.d_w, self.d_w) + np.dot(self.d_theta, self.d_theta)))

    def scaled(self, c: float) -> "GradientEstimate":
        return GradientEstimate(self.d_w * c, self.d_theta * c)


def sampled_tau(p: float, d: int, f: float, theta_s: float) -> float:
    """``tau~`` at the sampled label ``s`` given ``P(s) = p``.

    ``theta_s`` is ``math.inf`` when ``s = K``; the constraint can never be
    active there, so the result is 0.
    """
    z = (2 * d - 1) / p
    if math.isinf(theta_s):
        return 0.0
    return z if z * (f - theta_s) <= 0 else 0.0


def estimate_labels(dist: LabelDistribution, fb: DirectionalFeedback, score: float,
                    thresholds) -> EstimatedLabels:
    K = dist.K
    s = fb.sampled
    if not 1 <= s <= K:
        raise ValueError(f"sampled label {s} outside [1, {K}]")
    p = dist.prob(s)
    if p <= 0:
        raise InvariantError(f"sampled label {s} has zero probability")
    theta = np.asarray(thresholds, dtype=np.float64)
    z = np.zeros(K)
    tau = np.zeros(K)
    z[s - 1] = (2 * fb.d - 1) / p
    theta_s = theta[s - 1] if s < K else math.inf
    tau[s - 1] = sampled_tau(p, fb.d, score, theta_s)
    return EstimatedLabels(z, tau, s)


def gradient_estimate_linear(w, theta, x, est: EstimatedLabels, lam: float) -> GradientEstimate:
    """``(lam w - sum(tau~) x, lam theta + tau~[:K-1])``."""
    w = np.asarray(w, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    tau = est.tau_tilde
    if tau.shape[0] != theta.shape[0] + 1:
        raise ValueError("estimate and thresholds disagree on K")
    return GradientEstimate(lam * w - tau.sum() * np.asarray(x, dtype=np.float64),
                            lam * theta + tau[:-1])


def clip_factor(norm: float, alpha: Optional[float], unconditional: bool = False) -> float:
    """Multiplier that brings a gradient of size ``norm`` down to ``alpha``.

    Conditional by default: gradients already within ``alpha`` are left
    alone.  A zero gradient is never rescaled.
    """
    if alpha is None or norm == 0.0:
        return 1.0
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    if unconditional or norm > alpha:
        return alpha / norm
    return 1.0


def clip(grad: GradientEstimate, alpha: float, unconditional: bool = False) -> GradientEstimate:
    c = clip_factor(grad.norm(), alpha, unconditional)
    return grad if c == 1.0 else grad.scaled(c)
