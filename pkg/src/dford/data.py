"""Datasets: synthetic generation, CSV ingestion, normalisation, discretisers.

Also provides :class:`ExampleStream`, which resamples a dataset uniformly
with replacement so a run can be longer than the dataset.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .sampling import make_rng, split_seed


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    K: int
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.array(self.features, dtype=np.float64)
        y = np.array(self.labels).astype(np.int64).reshape(-1)
        if X.ndim != 2:
            raise DataError("features must be a 2-d matrix")
        if X.shape[0] != y.shape[0]:
            raise DataError(f"{X.shape[0]} feature rows but {y.shape[0]} labels")
        if self.K < 2:
            raise DataError(f"K must be >= 2, got {self.K}")
        if y.size and (y.min() < 1 or y.max() > self.K):
            raise DataError(f"labels must lie in [1, {self.K}]")
        if not np.all(np.isfinite(X)):
            raise DataError("features contain non-finite values")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def manifest(self) -> dict:
        return {"n": self.n, "d": self.d, "K": self.K, **self.provenance}

    def save(self, path: Union[str, Path]) -> Path:
        """Write ``features..., label`` as CSV plus a ``.json`` manifest."""
        path = Path(path)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"x{j}" for j in range(self.d)] + ["label"])
            for row, label in zip(self.features, self.labels):
                writer.writerow([repr(float(v)) for v in row] + [int(label)])
        path.with_suffix(".json").write_text(json.dumps(self.manifest(), indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def load(cls, path: Union[str, Path], K: Optional[int] = None) -> "Dataset":
        path = Path(path)
        manifest_path = path.with_suffix(".json")
        provenance = {}
        if manifest_path.exists():
            provenance = json.loads(manifest_path.read_text())
            K = K or provenance.get("K")
        X, y, _ = ingest_csv(path, target_column=-1, header=True)
        labels = y.astype(np.int64)
        if np.any(labels != y):
            raise DataError(f"{path}: label column is not integral")
        K = K or int(labels.max())
        provenance = {k: v for k, v in provenance.items() if k not in ("n", "d", "K")}
        provenance.setdefault("source", str(path))
        return cls(X, labels, int(K), provenance)


class ExampleStream:
    """Uniform with-replacement resampling of a dataset.

    Indices are drawn in fixed-size chunks, so the first ``T`` indices are
    the same whatever total length is later requested.
    """

    CHUNK = 4096

    def __init__(self, dataset: Dataset, seed):
        self.dataset = dataset
        self.seed = seed
        self._rng = make_rng(split_seed(seed)[0] if isinstance(seed, (int, np.integer)) else seed)
        self._buffer = np.empty(0, dtype=np.int64)

    def indices(self, T: int) -> np.ndarray:
        while self._buffer.shape[0] < T:
            chunk = self._rng.integers(0, self.dataset.n, size=self.CHUNK)
            self._buffer = np.concatenate([self._buffer, chunk])
        return self._buffer[:T]

    def __iter__(self):
        X, y = self.dataset.features, self.dataset.labels
        t = 0
        while True:
            idx = self.indices(t + self.CHUNK)[t:]
            for i in idx:
                yield X[i], int(y[i])
            t += self.CHUNK


def generate_synthetic(n: int, d: int, K: int, noise_sd: float = 0.0,
                       structure: str = "linear", degree: int = 2, seed: int = 0) -> Dataset:
    """Ordinal data with equi-frequent classes cut from a latent score.

    ``structure="linear"`` uses ``s = <w*, x>``; ``"polynomial"`` uses
    ``s = (1 + <w*, x>) ** degree``, which is a single term of the
    matching polynomial kernel.  Cut points are the empirical
    ``j / K`` quantiles of ``s``, and labels are read off ``s + noise``.
    """
    if n < 1 or d < 1 or K < 2:
        raise DataError("need n >= 1, d >= 1 and K >= 2")
    rng = make_rng(np.random.SeedSequence(seed))
    X = rng.uniform(-1.0, 1.0, size=(n, d))
    w_star = rng.normal(size=d)
    w_star /= np.linalg.norm(w_star)
    if structure == "linear":
        s = X @ w_star
    elif structure == "polynomial":
        # sqrt(3) puts <w*, x> at roughly unit variance
        s = (1.0 + math.sqrt(3.0) * (X @ w_star)) ** degree
    else:
        raise DataError(f"unknown structure {structure!r}")
    if np.ptp(s) == 0:
        raise DataError("latent scores are all equal")
    cuts = np.quantile(s, np.arange(1, K) / K)
    noisy = s + rng.normal(scale=noise_sd, size=n) if noise_sd > 0 else s
    labels = 1 + np.sum(noisy[:, None] > cuts[None, :], axis=1)
    provenance = {
        "name": "synthetic",
        "structure": structure if structure == "linear" else f"polynomial:{degree}",
        "noise_sd": noise_sd,
        "seed": seed,
        "discretizer": "quantile",
    }
    return Dataset(X, labels, K, provenance)


def _column_index(names: Optional[Sequence[str]], target, ncols: int) -> int:
    if isinstance(target, str) and not target.lstrip("-").isdigit():
        if names is None:
            raise DataError(f"column {target!r} requested by name but file has no header")
        if target not in names:
            raise DataError(f"no column named {target!r}")
        return list(names).index(target)
    idx = int(target)
    if idx < 0:
        idx += ncols
    if not 0 <= idx < ncols:
        raise DataError(f"column index {target} out of range for {ncols} columns")
    return idx


def ingest_csv(path: Union[str, Path], target_column: Union[int, str] = -1,
               header: bool = True) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Read a numeric CSV into ``(features, raw_target, feature_names)``."""
    path = Path(path)
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: empty file")
    names = [c.strip() for c in rows[0]] if header else None
    body = rows[1:] if header else rows
    ncols = len(rows[0])
    if not body:
        raise DataError(f"{path}: no data rows")
    table = np.empty((len(body), ncols))
    first_line = 2 if header else 1
    for r, row in enumerate(body):
        if len(row) != ncols:
            raise DataError(f"{path}: row {r + first_line} has {len(row)} columns, expected {ncols}")
        for c, cell in enumerate(row):
            try:
                table[r, c] = float(cell)
            except ValueError:
                raise DataError(f"{path}: non-numeric cell {cell!r} at row {r + first_line}, "
                                f"column {c + 1}") from None
    idx = _column_index(names, target_column, ncols)
    keep = [c for c in range(ncols) if c != idx]
    feature_names = [names[c] for c in keep] if names else [f"x{c}" for c in keep]
    return table[:, keep], table[:, idx], feature_names


def normalize(table: np.ndarray) -> np.ndarray:
    """Per-column z-score; constant columns become zeros."""
    table = np.asarray(table, dtype=np.float64)
    mean = table.mean(axis=0)
    std = table.std(axis=0)
    centred = table - mean
    safe = np.where(std > 0, std, 1.0)
    out = centred / safe
    out[:, std == 0] = 0.0
    return out


def discretize_equifrequent(targets, bins: int = 10) -> np.ndarray:
    """Rank-based equal-frequency binning into labels ``1..bins``.

    Tied targets share the bin of their lowest rank.
    """
    targets = np.asarray(targets, dtype=np.float64).reshape(-1)
    if bins < 1:
        raise DataError("bins must be >= 1")
    n = targets.shape[0]
    min_rank = np.searchsorted(np.sort(targets), targets, side="left")
    return (min_rank * bins) // n + 1


def discretize_abalone(target) -> np.ndarray:
    """Rings ``[1, 7] -> 1``, ``(7, 9] -> 2``, ``(9, 12] -> 3``, above -> 4."""
    t = np.asarray(target, dtype=np.float64)
    if np.any(t < 1):
        raise DataError("abalone targets start at 1")
    return 1 + (t > 7).astype(np.int64) + (t > 9) + (t > 12)


def discretize_multiple5(target) -> np.ndarray:
    """Bins of width 5: ``[0, 5) -> 1``, ``[5, 10) -> 2``, ..."""
    t = np.asarray(target, dtype=np.float64)
    if np.any(t < 0):
        raise DataError("multiple-of-5 discretisation expects non-negative targets")
    return np.floor(t / 5).astype(np.int64) + 1


DISCRETIZERS = {
    "equifrequent": discretize_equifrequent,
    "abalone": discretize_abalone,
    "multiple5": discretize_multiple5,
}


def build_dataset(path, target_column=-1, header=True, discretizer="equifrequent",
                  bins: int = 10, name: Optional[str] = None, do_normalize: bool = True) -> Dataset:
    X, raw, _ = ingest_csv(path, target_column, header)
    if do_normalize:
        X = normalize(X)
    if discretizer == "equifrequent":
        labels = discretize_equifrequent(raw, bins)
    elif discretizer == "none":
        labels = raw.astype(np.int64)
        if np.any(labels != raw):
            raise DataError("discretizer 'none' needs integer targets")
    else:
        labels = DISCRETIZERS[discretizer](raw)
    K = max(int(labels.max()), 2)
    provenance = {"name": name or Path(path).stem, "discretizer": discretizer,
                  "normalized": do_normalize, "source": str(path)}
    if discretizer == "equifrequent":
        provenance["bins"] = bins
        K = max(bins, 2)
    return Dataset(X, labels, K, provenance)
