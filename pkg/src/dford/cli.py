"""Command-line entry point: ``dford <subcommand> [options]``.

Exit status is 0 when every run finished, 1 when any run diverged or a
verification failed, and 2 for usage errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import experiment as ex
from . import oracle
from .data import DISCRETIZERS, DataError, Dataset, build_dataset, generate_synthetic

log = logging.getLogger("dford")


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _deltas(text: str) -> list[Optional[int]]:
    out = []
    for v in text.split(","):
        v = v.strip()
        if not v:
            continue
        out.append(None if v in ("none", "inf", "unbounded") else int(v))
    return out


def _single(values, flag):
    if len(values) != 1:
        raise SystemExit(f"{flag} takes a single value for this command")
    return values[0]


def _add_dataset_args(p: argparse.ArgumentParser):
    g = p.add_argument_group("dataset")
    g.add_argument("--data", type=Path, help="CSV written by 'generate' or 'ingest'; "
                   "otherwise a synthetic dataset is generated from the flags below")
    g.add_argument("--n", type=int, default=10_000)
    g.add_argument("--d", type=int, default=10)
    g.add_argument("--K", type=int, default=5)
    g.add_argument("--noise", type=float, default=0.0)
    g.add_argument("--structure", choices=("linear", "polynomial"), default="linear")
    g.add_argument("--degree", type=int, default=2)
    g.add_argument("--data-seed", type=int, default=0)


def _add_run_args(p: argparse.ArgumentParser, lam="1", gamma="0.4", delta="none"):
    p.add_argument("--seed", type=int, default=0, help="first run seed; run r uses seed + r")
    p.add_argument("--runs", type=int, default=10)
    p.add_argument("--iters", type=int, default=10_000, help="online trials per run")
    p.add_argument("--cadence", type=int, default=1000, help="checkpoint every this many trials")
    p.add_argument("--lambda", dest="lam", type=_floats, default=_floats(lam))
    p.add_argument("--gamma", type=_floats, default=_floats(gamma))
    p.add_argument("--delta", type=_deltas, default=_deltas(delta))
    p.add_argument("--alpha", type=float, default=None, help="gradient clipping threshold")
    p.add_argument("--kernel", default="poly:3", help="poly:DEG[:OFFSET], rbf:GAMMA or linear")
    p.add_argument("--workers", type=int, default=1, help="worker processes")
    p.add_argument("--out", type=Path, required=True, help="output directory")


def _dataset(args) -> Dataset:
    if args.data is not None:
        return Dataset.load(args.data)
    return generate_synthetic(args.n, args.d, args.K, args.noise, args.structure, args.degree,
                              args.data_seed)


def _config(args, algorithm: str) -> ex.ExperimentConfig:
    params = ex.RunParams(algorithm, lam=args.lam[0], gamma=args.gamma[0], alpha=args.alpha,
                          delta=args.delta[0], kernel=args.kernel)
    return ex.ExperimentConfig(params=params, T=args.iters, runs=args.runs, seed=args.seed,
                               cadence=args.cadence, lambdas=tuple(args.lam),
                               gammas=tuple(args.gamma),
                               deltas=tuple(d for d in args.delta if d is not None) or (1,),
                               workers=args.workers)


def _echo(args) -> dict:
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items())
            if k != "func"}


def _errors(results) -> int:
    bad = [rec for _, rec in results if rec.error]
    for rec in bad:
        log.error("%s seed=%s: %s", rec.algorithm, rec.seed, rec.error)
    return 1 if bad else 0


def _summarise(results):
    by_alg: dict = {}
    for key, rec in results:
        if not rec.error:
            by_alg.setdefault(key[:-1], []).append(rec.final_mae)
    for key, maes in by_alg.items():
        label = f"{key[0]} lam={key[1]}"
        if key[0].startswith("dford"):
            label += f" gamma={key[2]}"
        if key[3] >= 0:
            label += f" delta={key[3]}"
        print(f"{label}: median final running MAE {float(np.median(maes)):.4f} over {len(maes)} runs")


def cmd_generate(args) -> int:
    ds = generate_synthetic(args.n, args.d, args.K, args.noise, args.structure, args.degree,
                            args.data_seed)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    ds.save(args.out)
    print(f"wrote {args.out} (n={ds.n}, d={ds.d}, K={ds.K})")
    return 0


def cmd_ingest(args) -> int:
    target = args.target
    ds = build_dataset(args.input, target, not args.no_header, args.discretizer, args.bins,
                       args.name, not args.no_normalize)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    ds.save(args.out)
    print(f"wrote {args.out} (n={ds.n}, d={ds.d}, K={ds.K})")
    return 0


def _finish(args, command, ds, results, outputs, extra=None, wall=None) -> int:
    ex.write_manifest(args.out / "manifest.json", command, _echo(args), ds, outputs, results,
                      extra, wall)
    return _errors(results)


def cmd_train(args) -> int:
    ds = _dataset(args)
    cfg = _config(args, args.algorithm)
    _single(args.lam, "--lambda")
    _single(args.gamma, "--gamma")
    _single(args.delta, "--delta")
    with ex.Timer() as timer:
        results = ex.run_many([cfg.params], ds, cfg.seeds, cfg.T, cfg.cadence, cfg.workers)
    outputs = {"curves.csv": ex.write_curves(args.out / "curves.csv", results)}
    _summarise(results)
    return _finish(args, "train", ds, results, outputs, {"csv_schema": ex.CURVE_SCHEMA},
                   timer.elapsed)


def cmd_grid_search(args) -> int:
    ds = _dataset(args)
    cfg = _config(args, args.algorithm)
    with ex.Timer() as timer:
        result = ex.grid_search(cfg, ds)
    results = sorted(((c.params.key() + (r.seed,), r) for c in result.cells for r in c.records),
                     key=lambda kv: kv[0])
    outputs = {"grid.csv": ex.write_grid(args.out / "grid.csv", result.cells),
               "curves.csv": ex.write_curves(args.out / "curves.csv", results)}
    best = result.best
    if best is None:
        print("no valid grid cell")
    else:
        print(f"best lam={best.lam} gamma={best.gamma}")
    extra = {"csv_schema": ex.CURVE_SCHEMA, "grid_schema": ex.GRID_SCHEMA,
             "best": None if best is None else {"lam": best.lam, "gamma": best.gamma}}
    return _finish(args, "grid-search", ds, results, outputs, extra, timer.elapsed)


def cmd_trunc_sweep(args) -> int:
    ds = _dataset(args)
    cfg = _config(args, "dford-kernel")
    cfg = replace(cfg, deltas=tuple(d for d in args.delta if d is not None))
    if not cfg.deltas:
        raise SystemExit("--delta needs at least one finite window")
    with ex.Timer() as timer:
        result = ex.truncation_sweep(cfg, ds, include_unbounded=not args.no_unbounded)
    results = sorted(((c.params.key() + (r.seed,), r) for c in result.cells for r in c.records),
                     key=lambda kv: kv[0])
    outputs = {"sweep.csv": ex.write_grid(args.out / "sweep.csv", result.cells),
               "curves.csv": ex.write_curves(args.out / "curves.csv", results)}
    best = result.best
    print("no valid window" if best is None else f"best delta={best.delta}")
    extra = {"csv_schema": ex.CURVE_SCHEMA, "grid_schema": ex.GRID_SCHEMA,
             "best": None if best is None else {"delta": best.delta}}
    return _finish(args, "trunc-sweep", ds, results, outputs, extra, timer.elapsed)


def cmd_compare(args) -> int:
    ds = _dataset(args)
    cfg = _config(args, "dford-linear")
    params = [replace(cfg.params, algorithm=a.strip()) for a in args.algorithms.split(",")]
    with ex.Timer() as timer:
        results = ex.compare(params, ds, cfg.T, cfg.seeds, cfg.cadence, cfg.workers)
    outputs = {"curves.csv": ex.write_curves(args.out / "curves.csv", results)}
    _summarise(results)
    return _finish(args, "compare", ds, results, outputs, {"csv_schema": ex.CURVE_SCHEMA},
                   timer.elapsed)


def cmd_explore_study(args) -> int:
    ds = _dataset(args)
    cfg = _config(args, args.algorithm)
    params_list = [replace(cfg.params, gamma=float(g)) for g in args.gamma]
    with ex.Timer() as timer:
        results = ex.run_many(params_list, ds, cfg.seeds, cfg.T, cfg.cadence, cfg.workers)
    rows = []
    for params in params_list:
        recs = [r for k, r in results if k[:-1] == params.key() and not r.error]
        if not recs:
            continue
        t, curve = ex.mean_curve(recs)
        rows += [[params.gamma, int(tt), float(v)] for tt, v in zip(t, curve)]
        print(f"gamma={params.gamma}: " + " ".join(f"{v:.3f}" for v in curve))
    outputs = {"explore.csv": ex.write_csv(args.out / "explore.csv", ("gamma", "t", "mean_mae"), rows),
               "curves.csv": ex.write_curves(args.out / "curves.csv", results)}
    extra = {"csv_schema": ex.CURVE_SCHEMA, "study_schema": ex.STUDY_SCHEMA}
    return _finish(args, "explore-study", ds, results, outputs, extra, timer.elapsed)


def cmd_verify(args) -> int:
    unbiased = oracle.unbiasedness_sweep(draws=args.draws, seed=args.seed)
    grads = oracle.gradient_sweep(points=args.points, seed=args.seed)
    bounds = oracle.bound_checks(draws=args.draws, seed=args.seed, trajectory=not args.quick)
    checks = [
        ("E[z~] = z", unbiased["max_err_z"], 1e-10),
        ("E[tau~] = tau", unbiased["max_err_tau"], 1e-10),
        ("E[g] = subgradient", grads["max_err_enumerated"], 1e-9),
        ("subgradient = finite differences", grads["max_err_finite_difference"], 1e-6),
    ]
    ok = True
    for name, err, tol in checks:
        passed = err <= tol
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'}  {name}: max deviation {err:.3e} (tol {tol:g})")
    for c in bounds.checks:
        ok &= c.passed
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: max ratio {c.max_ratio:.4f}, "
              f"{c.violations} violations over {c.n}")
    if args.out is not None:
        report = {"schema": "dford-verify/1", "passed": ok, "unbiasedness": unbiased,
                  "gradient": grads, "bounds": bounds.to_dict()}
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dford", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic ordinal dataset")
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--d", type=int, default=10)
    p.add_argument("--K", type=int, default=5)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--structure", choices=("linear", "polynomial"), default="linear")
    p.add_argument("--degree", type=int, default=2)
    p.add_argument("--seed", dest="data_seed", type=int, default=0)
    p.add_argument("--out", type=Path, required=True, help="output CSV path")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("ingest", help="normalise and discretise a numeric CSV")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--target", default="-1", help="target column index or name")
    p.add_argument("--no-header", action="store_true")
    p.add_argument("--discretizer", choices=sorted(DISCRETIZERS) + ["none"], default="equifrequent")
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--name")
    p.add_argument("--no-normalize", action="store_true")
    p.add_argument("--out", type=Path, required=True, help="output CSV path")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="multi-seed runs of one algorithm")
    p.add_argument("--algorithm", choices=ex.ALGORITHMS, default="dford-linear")
    _add_dataset_args(p)
    _add_run_args(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("grid-search", help="select (lambda, gamma) by converged MAE")
    p.add_argument("--algorithm", choices=("dford-linear", "dford-kernel"), default="dford-linear")
    _add_dataset_args(p)
    _add_run_args(p, lam="1,2,4,8,16,32", gamma="0.2,0.4,0.6,0.8")
    p.set_defaults(func=cmd_grid_search)

    p = sub.add_parser("trunc-sweep", help="compare kernel truncation windows")
    _add_dataset_args(p)
    _add_run_args(p, delta="100,500,750,1000,2000")
    p.add_argument("--no-unbounded", action="store_true", help="skip the unbounded reference")
    p.set_defaults(func=cmd_trunc_sweep)

    p = sub.add_parser("compare", help="run several algorithms on shared streams")
    p.add_argument("--algorithms", default="dford-linear,prank,pril")
    _add_dataset_args(p)
    _add_run_args(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("explore-study", help="running MAE for several exploration rates")
    p.add_argument("--algorithm", choices=("dford-linear", "dford-kernel"), default="dford-linear")
    _add_dataset_args(p)
    _add_run_args(p, gamma="0,0.4,0.8")
    p.set_defaults(func=cmd_explore_study)

    p = sub.add_parser("verify", help="run the exact-enumeration checks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--draws", type=int, default=50)
    p.add_argument("--points", type=int, default=1000)
    p.add_argument("--quick", action="store_true", help="skip trajectory bound checks")
    p.add_argument("--out", type=Path, help="write a JSON report here")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (DataError, ValueError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
