"""DFORD-Kernel: the kernelised learner with a truncated expansion.

The score function is kept in closed form, ``f = scale * sum_i c_i k(x_i, .)``,
with the outer scale stored apart from the coefficients.  Without
clipping the scale after trial ``t`` is exactly ``1 / (lam t)`` and each
coefficient is the raw estimated label, so dropping old terms never
renormalises the survivors.

With a finite window ``delta`` the buffer is a ring of ``delta + 1`` slots
indexed by ``trial mod (delta + 1)``: the slot a new trial writes to is
the one whose trial has just left the window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .data import ExampleStream
from .estimation import clip_factor, sampled_tau
from .harness import DivergenceError, RunRecord, StepOutcome, run_online
from .model import KernelScorer, KernelSpec, OrdinalModel, Thresholds, label_from_score
from .sampling import MixtureTable, make_rng, split_seed


class BufferCorruptionError(RuntimeError):
    """Internal bookkeeping of the truncation buffer is inconsistent."""


RECOMPUTE_EVERY = 10_000
# exact norm recomputation is skipped for unbounded buffers larger than this
RECOMPUTE_MAX = 4096


@dataclass(frozen=True)
class KernelLearnerConfig:
    K: int
    lam: float = 1.0
    gamma: float = 0.4
    alpha: Optional[float] = None
    seed: int = 0
    clip_always: bool = False
    kernel: KernelSpec = field(default_factory=KernelSpec)
    delta: Optional[int] = None

    def __post_init__(self):
        if self.K < 2:
            raise ValueError("K must be >= 2")
        if not self.lam > 0:
            raise ValueError("lambda must be > 0")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.alpha is not None and not self.alpha > 0:
            raise ValueError("alpha must be > 0")
        if self.delta is not None and self.delta < 1:
            raise ValueError("delta must be >= 1 or None for unbounded")

    def to_dict(self) -> dict:
        return {"K": self.K, "lam": self.lam, "gamma": self.gamma, "alpha": self.alpha,
                "seed": self.seed, "clip_always": self.clip_always,
                "kernel": str(self.kernel), "delta": self.delta}


class DFORDKernel:
    name = "dford-kernel"
    feedback = "directional"

    def __init__(self, config: KernelLearnerConfig, rng: Optional[np.random.Generator] = None):
        self.config = config
        self.K = config.K
        self.lam = config.lam
        self.kernel = config.kernel
        self.delta = config.delta
        self.theta = np.zeros(config.K - 1)
        self.t = 2
        # scale of f^t; 1/(lam (t-1)) without clipping
        self.scale = 1.0 / config.lam
        self.rng = rng if rng is not None else make_rng(split_seed(config.seed)[1])
        self._table = MixtureTable(config.K, config.gamma)
        self._cap = 0 if self.delta is None else self.delta + 1
        self.coef = np.zeros(self._cap)
        self.index = np.zeros(self._cap, dtype=np.int64)   # 0 marks an empty slot
        self.anchors: Optional[np.ndarray] = None
        self._gram: Optional[np.ndarray] = None
        self._used = 0          # slots in use (unbounded mode: prefix length)
        self.size = 0
        self.peak_buffer = 0
        self._sq = 0.0          # sum_ij c_i c_j k(x_i, x_j)
        self.norm_sq = 0.0      # ||f||^2 + ||theta||^2
        self._cache_x = None
        self._cache_k = None

    def describe(self) -> dict:
        return {"algorithm": self.name, **self.config.to_dict()}

    def _allocate(self, dim: int):
        if self.delta is not None:
            self.anchors = np.zeros((self._cap, dim))
            self._gram = np.zeros((self._cap, self._cap))
        else:
            self._cap = 64
            self.anchors = np.zeros((self._cap, dim))
            self.coef = np.zeros(self._cap)
            self.index = np.zeros(self._cap, dtype=np.int64)

    def _grow(self):
        cap = 2 * self._cap
        anchors = np.zeros((cap, self.anchors.shape[1]))
        anchors[: self._cap] = self.anchors
        self.anchors = anchors
        self.coef = np.concatenate([self.coef, np.zeros(cap - self._cap)])
        self.index = np.concatenate([self.index, np.zeros(cap - self._cap, dtype=np.int64)])
        self._cap = cap

    def _kvec(self, x: np.ndarray) -> np.ndarray:
        """Kernel row against every live slot; memoised for the last ``x``."""
        if x is self._cache_x:
            return self._cache_k
        n = self._cap if self.delta is not None else self._used
        k = self.kernel.against(self.anchors[:n], x) if n else np.zeros(0)
        self._cache_x, self._cache_k = x, k
        return k

    @property
    def f_norm_sq(self) -> float:
        return self.scale * self.scale * self._sq

    def evaluate_f(self, x) -> float:
        if self.size == 0:
            return 0.0
        x = np.asarray(x, dtype=np.float64)
        if x.shape != self.anchors.shape[1:]:
            raise ValueError(f"expected {self.anchors.shape[1]} features, got {x.shape}")
        k = self._kvec(x)
        return float(self.scale * np.dot(self.coef[: k.shape[0]], k))

    score = evaluate_f

    def predict(self, x) -> int:
        return label_from_score(self.evaluate_f(x), self.theta)

    @property
    def model(self) -> OrdinalModel:
        live = self.index > 0
        anchors = self.anchors[live] if self.anchors is not None else np.zeros((0, 1))
        scorer = KernelScorer(self.coef[live].copy(), anchors.copy(), self.scale, self.kernel)
        return OrdinalModel(scorer, Thresholds(self.theta.copy(), self.K))

    def window(self) -> list[int]:
        """Trial indices currently in the buffer, oldest first."""
        return sorted(int(i) for i in self.index[self.index > 0])

    def exact_f_norm_sq(self) -> float:
        live = self.index > 0
        if not live.any():
            return 0.0
        c = self.coef[live]
        A = self.anchors[live]
        return float(self.scale ** 2 * c @ self.kernel.gram(A, A) @ c)

    def _evict(self, t: int):
        slot = t % self._cap
        old = self.index[slot]
        if old == 0:
            return
        if old != t - self.delta - 1:
            raise BufferCorruptionError(f"slot {slot} holds trial {old} at trial {t}")
        c_e = self.coef[slot]
        g = self._gram[slot]
        self._sq -= 2.0 * c_e * float(np.dot(self.coef, g)) - c_e * c_e * g[slot]
        self.coef[slot] = 0.0
        self.index[slot] = 0
        self.size -= 1

    def _insert(self, t: int, x: np.ndarray, c_new: float, k: np.ndarray):
        kxx = self.kernel(x, x)
        if self.delta is not None:
            slot = t % self._cap
            if self.index[slot] != 0:
                raise BufferCorruptionError(f"slot {slot} still occupied at trial {t}")
            row = k.copy()
            row[slot] = kxx
            self._gram[slot, :] = row
            self._gram[:, slot] = row
            cross = float(np.dot(self.coef, row)) - self.coef[slot] * kxx
        else:
            if self._used == self._cap:
                self._grow()
            slot = self._used
            self._used += 1
            cross = float(np.dot(self.coef[: k.shape[0]], k))
        self._sq += 2.0 * c_new * cross + c_new * c_new * kxx
        self.anchors[slot] = x
        self.coef[slot] = c_new
        self.index[slot] = t
        self.size += 1
        self.peak_buffer = max(self.peak_buffer, self.size)

    def _recompute_sq(self):
        if self.delta is not None:
            self._sq = float(self.coef @ self._gram @ self.coef)
        elif self.size <= RECOMPUTE_MAX:
            self._sq = self.exact_f_norm_sq() / (self.scale ** 2) if self.scale else 0.0

    def step(self, x, oracle: Callable[[int], int], score: Optional[float] = None) -> StepOutcome:
        x = np.asarray(x, dtype=np.float64)
        if self.anchors is None:
            self._allocate(x.shape[0])
        elif x.shape != self.anchors.shape[1:]:
            raise ValueError(f"expected {self.anchors.shape[1]} features, got {x.shape}")
        k = self._kvec(x)
        f = float(self.scale * np.dot(self.coef[: k.shape[0]], k)) if self.size else 0.0
        theta = self.theta
        y_hat = label_from_score(f, theta)
        s = self._table.draw(y_hat, self.rng)
        p = self._table.probs[y_hat - 1][s - 1]
        d = oracle(s)
        tau = sampled_tau(p, d, f, theta[s - 1] if s < self.K else math.inf)

        t = self.t
        lam = self.lam
        eta = 1.0 / (lam * t)
        if self.config.alpha is None:
            c = 1.0
            new_scale = 1.0 / (lam * t)
            coef_new = tau
        else:
            g_f_sq = lam * lam * self.f_norm_sq - 2.0 * lam * tau * f + tau * tau * self.kernel(x, x)
            g_theta = lam * theta
            if tau != 0.0:
                g_theta[s - 1] += tau
            norm = math.sqrt(max(g_f_sq, 0.0) + float(np.dot(g_theta, g_theta)))
            c = clip_factor(norm, self.config.alpha, self.config.clip_always)
            new_scale = self.scale * (1.0 - eta * lam * c)
            coef_new = eta * c * tau / new_scale
        theta *= 1.0 - eta * lam * c
        if tau != 0.0:
            theta[s - 1] -= eta * c * tau
        self.scale = new_scale

        if self.delta is not None:
            self._evict(t)
        if tau != 0.0:
            self._insert(t, x, coef_new, k)
        self._cache_x = None
        if t % RECOMPUTE_EVERY == 0:
            self._recompute_sq()
        self.t = t + 1
        self.norm_sq = self.f_norm_sq + float(np.dot(theta, theta))
        if not math.isfinite(self.norm_sq) or not math.isfinite(self.scale) or self.scale == 0.0:
            raise DivergenceError(t)
        return StepOutcome(y_hat, s, d, tau, p)


def kernel_step(learner: DFORDKernel, x, oracle) -> StepOutcome:
    return learner.step(x, oracle)


def run(config: KernelLearnerConfig, stream: ExampleStream, T: int, cadence: int = 1000,
        record_theta: bool = False, mae_mode: str = "predicted") -> RunRecord:
    learner = DFORDKernel(config)
    try:
        return run_online(learner, stream, T, cadence, record_theta, mae_mode)
    except DivergenceError as exc:
        raise DivergenceError(exc.t, f"dford-kernel seed={config.seed}") from exc
