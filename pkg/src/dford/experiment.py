"""Experiment orchestration: multi-seed runs, grid search, sweeps, exports.

Every run is identified by a sortable key and executed independently, so
serial and process-parallel execution produce the same records and the
same output bytes.  Curves are written as long-format CSV; see
``CURVE_COLUMNS`` for the fixed column order.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import __version__
from .baselines import PRIL, BaselineConfig, PRank, train_prank
from .data import Dataset, ExampleStream, generate_synthetic
from .harness import DivergenceError, RunRecord, hinge_value, run_online
from .kernel import DFORDKernel, KernelLearnerConfig
from .linear import DFORDLinear, LinearLearnerConfig
from .model import KernelSpec
from .sampling import RNG_ALGORITHM

ALGORITHMS = ("dford-linear", "dford-kernel", "prank", "pril")
LAMBDA_GRID = (1.0, 2.0, 4.0, 8.0, 16.0, 32.0)
GAMMA_GRID = (0.2, 0.4, 0.6, 0.8)
DELTA_GRID = (100, 500, 750, 1000, 2000)

CURVE_SCHEMA = "dford-curves/1"
CURVE_COLUMNS = ("algorithm", "lam", "gamma", "delta", "seed", "t", "mean_mae", "inst_mae",
                 "violations", "mean_violations", "cum_loss")
GRID_SCHEMA = "dford-grid/1"
GRID_COLUMNS = ("lam", "gamma", "delta", "valid", "converged_mae", "runs", "errors")
STUDY_SCHEMA = "dford-explore/1"
MANIFEST_SCHEMA = "dford-manifest/1"


@dataclass(frozen=True)
class RunParams:
    """Hyperparameters of one run; unused fields are ignored by the algorithm."""

    algorithm: str = "dford-linear"
    lam: float = 1.0
    gamma: float = 0.4
    alpha: Optional[float] = None
    delta: Optional[int] = None
    kernel: str = "poly:3"

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")

    def key(self) -> tuple:
        return (self.algorithm, self.lam, self.gamma, -1 if self.delta is None else self.delta)


@dataclass(frozen=True)
class ExperimentConfig:
    params: RunParams = field(default_factory=RunParams)
    T: int = 10_000
    runs: int = 10
    seed: int = 0
    cadence: int = 1000
    lambdas: tuple = LAMBDA_GRID
    gammas: tuple = GAMMA_GRID
    deltas: tuple = DELTA_GRID
    workers: int = 1
    record_theta: bool = False

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if not self.lambdas or not self.gammas or not self.deltas:
            raise ValueError("grids must be non-empty")

    @property
    def seeds(self) -> list[int]:
        return [self.seed + r for r in range(self.runs)]

    def to_dict(self) -> dict:
        return asdict(self)


def make_learner(params: RunParams, K: int, dim: int, seed: int):
    if params.algorithm == "dford-linear":
        return DFORDLinear(LinearLearnerConfig(K=K, dim=dim, lam=params.lam, gamma=params.gamma,
                                               alpha=params.alpha, seed=seed))
    if params.algorithm == "dford-kernel":
        return DFORDKernel(KernelLearnerConfig(K=K, lam=params.lam, gamma=params.gamma,
                                               alpha=params.alpha, seed=seed,
                                               kernel=KernelSpec.parse(params.kernel),
                                               delta=params.delta))
    cls = PRank if params.algorithm == "prank" else PRIL
    return cls(BaselineConfig(K=K, dim=dim, lam=params.lam, seed=seed))


def run_single(params: RunParams, dataset: Dataset, seed: int, T: int, cadence: int = 1000,
               record_theta: bool = False) -> RunRecord:
    """One seeded run; a numeric divergence is recorded rather than raised."""
    learner = make_learner(params, dataset.K, dataset.d, seed)
    stream = ExampleStream(dataset, seed)
    try:
        return run_online(learner, stream, T, cadence, record_theta)
    except DivergenceError as exc:
        return RunRecord(algorithm=learner.name, seed=seed, config=learner.describe(),
                         error=str(exc))


def _execute(job):
    key, params, dataset, seed, T, cadence, record_theta = job
    return key, run_single(params, dataset, seed, T, cadence, record_theta)


def run_many(params_list: Sequence[RunParams], dataset: Dataset, seeds: Sequence[int], T: int,
             cadence: int = 1000, workers: int = 1, record_theta: bool = False) -> list[tuple]:
    """Run every ``(params, seed)`` pair; returns ``[(key, RunRecord)]`` sorted by key."""
    jobs = [(params.key() + (seed,), params, dataset, seed, T, cadence, record_theta)
            for params in params_list for seed in seeds]
    if len(set(j[0] for j in jobs)) != len(jobs):
        raise ValueError("duplicate (params, seed) pairs")
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_execute, jobs))
    else:
        results = [_execute(j) for j in jobs]
    return sorted(results, key=lambda kv: kv[0])


# ---------------------------------------------------------------------------
# aggregation


def mean_curve(records: Iterable[RunRecord], attr: str = "mean_mae") -> tuple[np.ndarray, np.ndarray]:
    records = list(records)
    t, first = records[0].curve(attr)
    stack = [first] + [r.curve(attr)[1] for r in records[1:]]
    return t, np.mean(np.vstack(stack), axis=0)


def converged_value(curve: np.ndarray, tail: float = 0.1) -> float:
    """Mean over the final ``tail`` fraction of checkpoints (at least one)."""
    n = len(curve)
    if n == 0:
        return math.nan
    k = max(1, int(math.ceil(tail * n)))
    return float(np.mean(curve[-k:]))


@dataclass
class CellResult:
    params: RunParams
    records: list[RunRecord]
    converged_mae: float
    valid: bool
    errors: list[str] = field(default_factory=list)

    def row(self) -> dict:
        return {"lam": self.params.lam, "gamma": self.params.gamma, "delta": self.params.delta,
                "valid": int(self.valid), "converged_mae": self.converged_mae,
                "runs": len(self.records), "errors": len(self.errors)}


def _cells(params_list, results) -> list[CellResult]:
    by_key: dict = {}
    for key, rec in results:
        by_key.setdefault(key[:-1], []).append(rec)
    cells = []
    for params in params_list:
        recs = by_key[params.key()]
        errors = [r.error for r in recs if r.error]
        if errors:
            cells.append(CellResult(params, recs, math.nan, False, errors))
            continue
        _, curve = mean_curve(recs)
        value = converged_value(curve)
        cells.append(CellResult(params, recs, value, math.isfinite(value)))
    return cells


@dataclass
class GridResult:
    best: Optional[RunParams]
    cells: list[CellResult]

    @property
    def records(self) -> list[RunRecord]:
        return [r for c in self.cells for r in c.records]


def _pick_best(cells: list[CellResult], tiebreak) -> Optional[RunParams]:
    valid = [c for c in cells if c.valid]
    if not valid:
        return None
    return min(valid, key=lambda c: (c.converged_mae,) + tiebreak(c.params)).params


def grid_search(config: ExperimentConfig, dataset: Dataset) -> GridResult:
    """Evaluate every (lambda, gamma) cell; argmin of converged MAE.

    Ties go to the smaller lambda, then the smaller gamma.
    """
    base = config.params
    params_list = [replace(base, lam=float(lam), gamma=float(g))
                   for lam in config.lambdas for g in config.gammas]
    results = run_many(params_list, dataset, config.seeds, config.T, config.cadence, config.workers)
    cells = _cells(params_list, results)
    return GridResult(_pick_best(cells, lambda p: (p.lam, p.gamma)), cells)


def truncation_sweep(config: ExperimentConfig, dataset: Dataset,
                     include_unbounded: bool = True) -> GridResult:
    """One averaged curve per window size; ties go to the smaller window.

    The unbounded run is a reference only and is never selected.  Each
    run's peak buffer size is checked against ``delta + 1``.
    """
    base = replace(config.params, algorithm="dford-kernel")
    deltas = list(config.deltas) + ([None] if include_unbounded else [])
    params_list = [replace(base, delta=None if d is None else int(d)) for d in deltas]
    results = run_many(params_list, dataset, config.seeds, config.T, config.cadence, config.workers)
    cells = _cells(params_list, results)
    for cell in cells:
        delta = cell.params.delta
        for rec in cell.records:
            if delta is not None and rec.peak_buffer is not None and rec.peak_buffer > delta + 1:
                raise RuntimeError(f"buffer reached {rec.peak_buffer} > delta + 1 = {delta + 1}")
    bounded = [c for c in cells if c.params.delta is not None]
    return GridResult(_pick_best(bounded, lambda p: (p.delta,)), cells)


def compare(algorithms: Sequence[RunParams], dataset: Dataset, T: int, seeds: Sequence[int],
            cadence: int = 1000, workers: int = 1) -> list[tuple]:
    """Run each algorithm on the same seeded streams."""
    params_list = list(dict.fromkeys(algorithms))
    return run_many(params_list, dataset, seeds, T, cadence, workers)


@dataclass
class ExplorationTable:
    gammas: list[float]
    t: list[int]
    mean_mae: dict            # gamma -> list over checkpoints, averaged over seeds
    final_by_seed: dict       # gamma -> {seed: final running MAE}


def exploration_study(dataset: Dataset, gammas: Sequence[float] = (0.0, 0.4, 0.8),
                      T: int = 10_000, cadence: int = 1000, seeds: Sequence[int] = tuple(range(10)),
                      lam: float = 1.0, algorithm: str = "dford-linear", kernel: str = "poly:3",
                      delta: Optional[int] = None, workers: int = 1) -> ExplorationTable:
    params_list = [RunParams(algorithm, lam=lam, gamma=float(g), kernel=kernel, delta=delta)
                   for g in gammas]
    results = run_many(params_list, dataset, seeds, T, cadence, workers)
    mean_mae, final = {}, {}
    t_axis: list[int] = []
    for cell in _cells(params_list, results):
        g = cell.params.gamma
        if cell.errors:
            raise DivergenceError(-1, "; ".join(cell.errors))
        t, curve = mean_curve(cell.records)
        t_axis = [int(v) for v in t]
        mean_mae[g] = [float(v) for v in curve]
        final[g] = {r.seed: r.final_mae for r in cell.records}
    return ExplorationTable([float(g) for g in gammas], t_axis, mean_mae, final)


# ---------------------------------------------------------------------------
# regret


def comparator_losses(dataset: Dataset, lam: float, epochs: int = 20, seed: int = 0) -> np.ndarray:
    """Per-example regularized loss of a PRank model trained offline on the dataset."""
    model = train_prank(dataset.features, dataset.labels, dataset.K, lam, epochs, seed)
    scores = dataset.features @ model.w
    theta = model.theta.tolist()
    reg = 0.5 * lam * model.norm_sq
    return np.array([reg + hinge_value(float(f), theta, int(y))
                     for f, y in zip(scores, dataset.labels)])


def average_regret(record: RunRecord, dataset: Dataset, comparator: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(t, (learner_cum_loss - comparator_cum_loss) / t)`` at each checkpoint."""
    t, cum = record.curve("cum_loss")
    idx = ExampleStream(dataset, record.seed).indices(int(t[-1]))
    comp_cum = np.cumsum(comparator[idx])[t.astype(int) - 1]
    return t, (cum - comp_cum) / t


# ---------------------------------------------------------------------------
# output


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _param(rec: RunRecord, name: str):
    return rec.config.get(name)


def curve_rows(results: Iterable[tuple]) -> list[list[str]]:
    rows = []
    for _, rec in results:
        for c in rec.checkpoints:
            rows.append([rec.algorithm, fmt(_param(rec, "lam")), fmt(_param(rec, "gamma")),
                         fmt(_param(rec, "delta")), fmt(rec.seed), fmt(c.t), fmt(c.mean_mae),
                         fmt(c.inst_mae), fmt(c.violations), fmt(c.mean_violations),
                         fmt(c.cum_loss)])
    return rows


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> str:
    """Write CSV with ``\\n`` line endings; returns the sha256 of the bytes."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) if not isinstance(v, str) else v for v in row])
    data = buf.getvalue().encode()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data)
    return hashlib.sha256(data).hexdigest()


def write_curves(path: Path, results: Iterable[tuple]) -> str:
    return write_csv(path, CURVE_COLUMNS, curve_rows(results))


def write_grid(path: Path, cells: Sequence[CellResult]) -> str:
    return write_csv(path, GRID_COLUMNS, ([c.row()[k] for k in GRID_COLUMNS] for c in cells))


def write_manifest(path: Path, command: str, config: dict, dataset: Optional[Dataset],
                   outputs: dict, results: Sequence[tuple] = (), extra: Optional[dict] = None,
                   wall_time: Optional[float] = None) -> dict:
    manifest = {
        "schema": MANIFEST_SCHEMA,
        "package_version": __version__,
        "command": command,
        "config": config,
        "rng_algorithm": RNG_ALGORITHM,
        "dataset": dataset.manifest() if dataset is not None else None,
        "outputs": outputs,
        "runs": [{"algorithm": rec.algorithm, "seed": rec.seed, "config": rec.config,
                  "error": rec.error, "peak_buffer": rec.peak_buffer,
                  "wall_time_s": rec.wall_time} for _, rec in results],
        "wall_time_s": wall_time,
    }
    if extra:
        manifest.update(extra)
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n")
    return manifest


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start


def synthetic_dataset(n: int = 10_000, d: int = 10, K: int = 5, noise_sd: float = 0.0,
                      structure: str = "linear", degree: int = 2, seed: int = 0) -> Dataset:
    return generate_synthetic(n, d, K, noise_sd, structure, degree, seed)
