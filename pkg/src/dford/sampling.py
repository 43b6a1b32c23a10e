"""Explore-exploit label distribution used to choose which label to query.

The distribution mixes a point mass at the predicted label with an
exploration distribution whose weight decreases linearly with the distance
from the prediction.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

RNG_ALGORITHM = "numpy.random.Generator(PCG64)"


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def split_seed(seed: int) -> tuple[np.random.SeedSequence, np.random.SeedSequence]:
    """Independent (stream, learner) seed sequences for one run seed.

    Every algorithm run with the same seed sees the same example stream,
    while its own label sampling never touches the stream's generator.
    """
    stream, learner = np.random.SeedSequence(seed).spawn(2)
    return stream, learner


def _check_label(K: int, y_hat: int):
    if K < 2:
        raise ValueError(f"K must be >= 2, got {K}")
    if not 1 <= y_hat <= K:
        raise ValueError(f"label {y_hat} outside [1, {K}]")


def exploration_counts(K: int, y_hat: int) -> list[int]:
    """Unnormalised integer weights ``1 + d_max - |i - y_hat|``."""
    _check_label(K, y_hat)
    d_max = max(y_hat, K - y_hat)
    return [1 + d_max - abs(i - y_hat) for i in range(1, K + 1)]


def normalizer(K: int, y_hat: int) -> int:
    """Closed-form sum of :func:`exploration_counts` (exact integer)."""
    _check_label(K, y_hat)
    if 2 * y_hat >= K:
        return (2 * K + 1) * y_hat - y_hat * y_hat - K * (K - 1) // 2
    return K * (K + 1) // 2 - y_hat * (y_hat - 1)


def exploration_weights(K: int, y_hat: int) -> np.ndarray:
    counts = exploration_counts(K, y_hat)
    return np.array(counts, dtype=np.float64) / normalizer(K, y_hat)


@dataclass(frozen=True)
class LabelDistribution:
    probs: np.ndarray
    predicted: int
    gamma: float

    @property
    def K(self) -> int:
        return self.probs.shape[0]

    def prob(self, label: int) -> float:
        return float(self.probs[label - 1])


def mixture(K: int, y_hat: int, gamma: float) -> LabelDistribution:
    """``(1 - gamma) * point_mass(y_hat) + gamma * exploration_weights``."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    probs = gamma * exploration_weights(K, y_hat)
    probs[y_hat - 1] += 1.0 - gamma
    probs.setflags(write=False)
    return LabelDistribution(probs, y_hat, float(gamma))


def exact_mixture(K: int, y_hat: int, gamma) -> list[Fraction]:
    """Rational version of :func:`mixture` for exact reference checks."""
    gamma = Fraction(gamma)
    Z = normalizer(K, y_hat)
    probs = [gamma * Fraction(c, Z) for c in exploration_counts(K, y_hat)]
    probs[y_hat - 1] += 1 - gamma
    return probs


def sample(dist: LabelDistribution, rng: np.random.Generator) -> int:
    """Inverse-CDF draw; consumes exactly one uniform from ``rng``."""
    return sample_cdf(np.cumsum(dist.probs).tolist(), rng.random())


def sample_cdf(cdf, u: float) -> int:
    # bisect_right never lands on a zero-probability label
    i = bisect.bisect_right(cdf, u)
    K = len(cdf)
    if i >= K:
        # u above the rounded total; fall back to the last supported label
        i = K - 1
        while i > 0 and cdf[i] == cdf[i - 1]:
            i -= 1
    return i + 1


class MixtureTable:
    """Pre-built distributions and CDFs for every possible prediction."""

    def __init__(self, K: int, gamma: float):
        self.K = K
        self.gamma = float(gamma)
        self.dists = [mixture(K, y, gamma) for y in range(1, K + 1)]
        self.probs = [d.probs.tolist() for d in self.dists]
        self.cdfs = [np.cumsum(d.probs).tolist() for d in self.dists]

    def __getitem__(self, y_hat: int) -> LabelDistribution:
        return self.dists[y_hat - 1]

    def draw(self, y_hat: int, rng: np.random.Generator) -> int:
        return sample_cdf(self.cdfs[y_hat - 1], rng.random())
