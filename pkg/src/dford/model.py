"""Ordinal threshold models and the shared prediction rule.

A model is a real-valued score function ``f`` (linear weights or a kernel
expansion) together with ``K - 1`` thresholds.  The last threshold
``theta_K = +inf`` is implicit and never stored.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np


class DimensionError(ValueError):
    """Feature vector does not match the model's dimension."""


class NumericError(ArithmeticError):
    """A score or parameter became non-finite."""


@dataclass(frozen=True)
class Thresholds:
    """The ``K - 1`` finite cut points of an ordinal model.

    Ordering is deliberately *not* enforced: DFORD only keeps thresholds
    sorted in expectation.
    """

    values: np.ndarray
    K: int

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        if self.K < 2:
            raise ValueError(f"K must be >= 2, got {self.K}")
        if values.shape[0] != self.K - 1:
            raise ValueError(f"expected {self.K - 1} thresholds, got {values.shape[0]}")
        if not np.all(np.isfinite(values)):
            raise NumericError("thresholds must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, K: int) -> "Thresholds":
        return cls(np.zeros(K - 1), K)

    def is_sorted(self) -> bool:
        return bool(np.all(np.diff(self.values) >= 0))


@dataclass(frozen=True)
class KernelSpec:
    """Kernel function ``k(a, b)``.

    ``kind`` is one of ``"polynomial"`` (``(offset + <a, b>) ** degree``),
    ``"rbf"`` (``exp(-gamma * |a - b|^2)``) or ``"linear"``.
    """

    kind: str = "polynomial"
    degree: int = 3
    offset: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in ("polynomial", "rbf", "linear"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "polynomial" and (int(self.degree) != self.degree or self.degree < 1):
            raise ValueError("polynomial degree must be an integer >= 1")
        if self.kind == "rbf" and not self.gamma > 0:
            raise ValueError("rbf gamma must be > 0")
        if not (np.isfinite(self.offset) and np.isfinite(self.gamma)):
            raise ValueError("kernel parameters must be finite")

    @classmethod
    def parse(cls, text: str) -> "KernelSpec":
        """Parse ``poly:3``, ``poly:2:1.0``, ``rbf:0.5`` or ``linear``."""
        parts = text.strip().lower().split(":")
        name = parts[0]
        if name in ("poly", "polynomial"):
            degree = int(parts[1]) if len(parts) > 1 else 3
            offset = float(parts[2]) if len(parts) > 2 else 1.0
            return cls("polynomial", degree=degree, offset=offset)
        if name == "rbf":
            return cls("rbf", gamma=float(parts[1]) if len(parts) > 1 else 1.0)
        if name == "linear":
            return cls("linear")
        raise ValueError(f"cannot parse kernel spec {text!r}")

    def __str__(self):
        if self.kind == "polynomial":
            return f"poly:{self.degree}:{self.offset:g}"
        if self.kind == "rbf":
            return f"rbf:{self.gamma:g}"
        return "linear"

    def __call__(self, a, b) -> float:
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        if self.kind == "rbf":
            diff = a - b
            return float(np.exp(-self.gamma * np.dot(diff, diff)))
        dot = np.dot(a, b)
        if self.kind == "linear":
            return float(dot)
        # numpy power overflows to inf rather than raising
        with np.errstate(over="ignore", invalid="ignore"):
            return float((self.offset + dot) ** self.degree)

    def against(self, anchors: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Vector of ``k(anchor_i, x)`` for each row of ``anchors``."""
        if anchors.shape[0] == 0:
            return np.zeros(0)
        if self.kind == "rbf":
            diff = anchors - x
            return np.exp(-self.gamma * np.einsum("ij,ij->i", diff, diff))
        dots = anchors @ x
        if self.kind == "linear":
            return dots
        with np.errstate(over="ignore", invalid="ignore"):
            return (self.offset + dots) ** self.degree

    def gram(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        if self.kind == "rbf":
            sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2 * A @ B.T
            return np.exp(-self.gamma * np.maximum(sq, 0.0))
        dots = A @ B.T
        if self.kind == "linear":
            return dots
        with np.errstate(over="ignore", invalid="ignore"):
            return (self.offset + dots) ** self.degree


@dataclass(frozen=True)
class LinearScorer:
    w: np.ndarray

    def __post_init__(self):
        w = np.array(self.w, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(w)):
            raise NumericError("weights must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)

    @property
    def dim(self) -> int:
        return self.w.shape[0]

    def __call__(self, x: np.ndarray) -> float:
        x = _check_dim(x, self.dim)
        return float(np.dot(self.w, x))


@dataclass(frozen=True)
class KernelScorer:
    """``f(x) = scale * sum_i coef_i * k(anchor_i, x)``."""

    coef: np.ndarray
    anchors: np.ndarray
    scale: float
    kernel: KernelSpec = field(default_factory=KernelSpec)

    def __post_init__(self):
        coef = np.array(self.coef, dtype=np.float64).reshape(-1)
        anchors = np.array(self.anchors, dtype=np.float64)
        if anchors.ndim == 1:
            anchors = anchors.reshape(len(coef), -1)
        if anchors.shape[0] != coef.shape[0]:
            raise ValueError("one anchor per coefficient required")
        object.__setattr__(self, "coef", coef)
        object.__setattr__(self, "anchors", anchors)

    @property
    def dim(self) -> int | None:
        return self.anchors.shape[1] if self.anchors.shape[0] else None

    def __call__(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=np.float64)
        if self.dim is not None:
            x = _check_dim(x, self.dim)
        if self.coef.shape[0] == 0:
            return 0.0
        return float(self.scale * np.dot(self.coef, self.kernel.against(self.anchors, x)))


Scorer = Union[LinearScorer, KernelScorer]


@dataclass(frozen=True)
class OrdinalModel:
    scorer: Scorer
    thresholds: Thresholds

    @property
    def K(self) -> int:
        return self.thresholds.K


def _check_dim(x, dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != dim:
        raise DimensionError(f"expected {dim} features, got {x.shape[0]}")
    return x


def label_from_score(f: float, thresholds: Sequence[float]) -> int:
    """``min{i : f - theta_i <= 0}`` with ``theta_K = +inf`` (1-based).

    Thresholds are scanned in index order, never re-sorted; ties go to the
    lower label.
    """
    for i, th in enumerate(thresholds):
        if f <= th:
            return i + 1
    return len(thresholds) + 1


def score(model: OrdinalModel, x) -> float:
    value = model.scorer(x)
    if not np.isfinite(value):
        raise NumericError(f"non-finite score {value}")
    return value


def predict(model: OrdinalModel, x) -> int:
    return label_from_score(score(model, x), model.thresholds.values)
