"""Batch front end: single runs, ensembles, probe suites, config echo.

Output layout is deliberately boring: a manifest written before any
compute, one CSV per trajectory, one JSON with the ensemble fit, binary
snapshots only when asked.  Identical (config, seed) pairs must produce
identical bytes, so nothing here records wall-clock time or hostnames.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import SimConfig, default_config, parse_config_file, to_text, validate
from .diagnostics import ensemble_energy_bound, probe_suite
from .errors import ConfigError
from .fields import write_snapshot
from .integrators import _SERIES_KEYS, TrajectoryRecord, run_trajectory

WORKERS_ENV = "SLCSIM_WORKERS"


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _load_config(args) -> SimConfig:
    cfg = parse_config_file(args.config) if args.config else default_config()
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "trajectories", None) is not None:
        overrides["trajectories"] = args.trajectories
    if getattr(args, "scheme", None) is not None:
        overrides["scheme"] = args.scheme
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
        validate(cfg)
    return cfg


def _workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from exc
    if n < 1:
        raise ConfigError(f"{WORKERS_ENV} must be >= 1")
    return n


def _write_manifest(out: Path, verb: str, cfg: SimConfig, outputs: list[str]) -> None:
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "verb": verb,
        "version": __version__,
        "seed": cfg.seed,
        "trajectories": cfg.trajectories,
        "scheme": cfg.scheme,
        "config": to_text(cfg),
        "outputs": sorted(outputs),
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _write_series_csv(path: Path, rec: TrajectoryRecord) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", *_SERIES_KEYS])
        for i in range(len(rec.times)):
            w.writerow(
                [_fmt(float(rec.times[i]))]
                + [_fmt(float(rec.series[k][i])) for k in _SERIES_KEYS]
            )


def _traj_summary(rec: TrajectoryRecord) -> dict:
    return {
        "trajectory": rec.trajectory,
        "status": rec.status,
        "steps_completed": rec.steps_completed,
        "tau_hits": {_fmt(k): _fmt(t) for k, t in sorted(rec.stopping.hits.items())},
        "windows": [
            {
                "start_time": _fmt(w.start_time),
                "iterations": w.iterations,
                "converged": w.converged,
                "min_theta": _fmt(w.min_theta),
            }
            for w in rec.windows
        ],
    }


def _snapshot_sink(out: Path, tag: str):
    def sink(step: int, state) -> None:
        write_snapshot(out / f"{tag}_step{step:08d}_v.slcf", state.grid, state.v, state.t)
        write_snapshot(out / f"{tag}_step{step:08d}_d.slcf", state.grid, state.d, state.t)

    return sink


def _run_one(payload: tuple[SimConfig, int]) -> TrajectoryRecord:
    cfg, idx = payload
    return run_trajectory(cfg, trajectory=idx)


# ---------------------------------------------------------------------------
# verbs
# ---------------------------------------------------------------------------

def _cmd_run(args) -> int:
    cfg = _load_config(args)
    out = Path(args.out)
    _write_manifest(out, "run", cfg, ["trajectory_000000.csv", "run.json"])
    sink = _snapshot_sink(out, "trajectory_000000") if cfg.save_snapshots else None
    rec = run_trajectory(cfg, trajectory=0, snapshot_sink=sink)
    _write_series_csv(out / "trajectory_000000.csv", rec)
    with open(out / "run.json", "w") as fh:
        json.dump(_traj_summary(rec), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"trajectory 0: {rec.status} ({rec.steps_completed} steps)")
    return 1 if rec.status == "iteration_failed" else 0


def _cmd_ensemble(args) -> int:
    cfg = _load_config(args)
    out = Path(args.out)
    names = [f"trajectory_{i:06d}.csv" for i in range(cfg.trajectories)]
    _write_manifest(out, "ensemble", cfg, names + ["summary.csv", "ensemble.json"])

    jobs = [(cfg, i) for i in range(cfg.trajectories)]
    workers = _workers()
    if workers == 1:
        records = [_run_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_one, jobs))

    for rec, name in zip(records, names):
        _write_series_csv(out / name, rec)

    fit = ensemble_energy_bound(records, cfg.q)
    n = len(fit.times)
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"mean_{k}" for k in _SERIES_KEYS])
        means = {
            k: np.mean([r.series[k][:n] for r in records], axis=0) for k in _SERIES_KEYS
        }
        for i in range(n):
            w.writerow([_fmt(float(fit.times[i]))] + [_fmt(float(means[k][i])) for k in _SERIES_KEYS])

    statuses = sorted({r.status for r in records})
    blowups = sum(1 for r in records if r.status == "stopped_at_tau")
    report = {
        "n_trajectories": cfg.trajectories,
        "seed": cfg.seed,
        "c_growth": float(fit.c_growth),
        "violation_count": fit.violation_count,
        "blowup_count": blowups,
        "statuses": statuses,
        "trajectories": [_traj_summary(r) for r in records],
    }
    with open(out / "ensemble.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")

    print(
        f"ensemble: {cfg.trajectories} trajectories, "
        f"C_growth={fit.c_growth:.6g}, blowups={blowups}"
    )
    return 1 if any(r.status == "iteration_failed" for r in records) else 0


def _cmd_probes(args) -> int:
    cfg = _load_config(args)
    out = Path(args.out)
    _write_manifest(out, "probes", cfg, ["probes_report.json"])
    results = probe_suite(
        seed=cfg.seed, include_contraction=not args.skip_contraction, cfg=cfg
    )
    payload = {
        "all_passed": all(r.passed for r in results),
        "probes": [
            {
                "name": r.name,
                "value": float(r.value),
                "low": float(r.low),
                "high": float(r.high),
                "passed": r.passed,
                "detail": r.detail,
            }
            for r in results
        ],
    }
    with open(out / "probes_report.json", "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for r in results:
        mark = "pass" if r.passed else "FAIL"
        print(f"{mark}  {r.name} = {r.value:.6g}  (allowed [{r.low:g}, {r.high:g}])")
    return 0


def _cmd_describe_config(args) -> int:
    cfg = _load_config(args)
    sys.stdout.write(to_text(cfg))
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="slcsim",
        description="Stochastic nematic liquid-crystal simulator and verification lab",
    )
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp, with_out=True):
        sp.add_argument("--config", type=str, default=None, help="config file path")
        sp.add_argument("--seed", type=int, default=None, help="override run.seed")
        sp.add_argument(
            "--trajectories", type=int, default=None, help="override run.trajectories"
        )
        sp.add_argument(
            "--scheme", choices=("em", "picard"), default=None, help="override time.scheme"
        )
        if with_out:
            sp.add_argument("--out", type=str, default="slcsim_out", help="output directory")

    sp = sub.add_parser("run", help="integrate a single trajectory")
    common(sp)
    sp.set_defaults(fn=_cmd_run)

    sp = sub.add_parser("ensemble", help="Monte Carlo ensemble")
    common(sp)
    sp.set_defaults(fn=_cmd_ensemble)

    sp = sub.add_parser("probes", help="operator and inequality probe suite")
    common(sp)
    sp.add_argument(
        "--skip-contraction",
        action="store_true",
        help="omit the (slower) fixed-point contraction probe",
    )
    sp.set_defaults(fn=_cmd_probes)

    sp = sub.add_parser("describe-config", help="print the resolved config")
    common(sp, with_out=False)
    sp.set_defaults(fn=_cmd_describe_config)
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
