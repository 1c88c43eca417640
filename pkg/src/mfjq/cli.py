"""Command-line entry point: run scenarios and verification suites.

Exit codes: 0 success, 2 invalid configuration, 3 runtime invariant
violation (a report is written next to the outputs).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .scenarios import (BUILTIN_SCENARIOS, ScenarioSpec, run_concentration_demo,
                        run_hk_controlled, run_hk_uncontrolled,
                        default_epsilon_schedule)
from .solver import SupportEscapeError
from .verify import SUITES, run_suite


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mfjq")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario and write logs/snapshots")
    run.add_argument("--scenario", help=f"one of {', '.join(BUILTIN_SCENARIOS)}")
    run.add_argument("--config", type=Path, help="inline scenario spec (JSON file)")
    run.add_argument("--out", type=Path, default=Path("out"))
    run.add_argument("--seed", type=int)
    run.add_argument("--dt", type=float)
    run.add_argument("--cells", type=int)
    run.add_argument("--backend", choices=("grid", "particles"))
    run.add_argument("--t-end", dest="t_end", type=float)
    run.add_argument("--h", type=float)
    run.add_argument("--c", type=float)
    run.add_argument("--kappa", type=float)

    ver = sub.add_parser("verify", help="run a named invariant suite")
    ver.add_argument("suite", choices=SUITES)
    ver.add_argument("--run-dir", type=Path,
                     help="audit a finished run directory (constraints suite)")
    return p


def _load_spec(args) -> ScenarioSpec:
    if (args.scenario is None) == (args.config is None):
        raise ValueError("give exactly one of --scenario or --config")
    if args.config is not None:
        spec = ScenarioSpec.from_json(args.config)
    else:
        spec = ScenarioSpec.builtin(args.scenario)
    return spec.apply_overrides(seed=args.seed, dt=args.dt, cells=args.cells,
                                backend=args.backend, t_end=args.t_end,
                                h=args.h, c=args.c, kappa=args.kappa)


def _write_outputs(out: Path, spec: ScenarioSpec, log, extra: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    log.to_csv(out / "trajectory.csv")
    snap_dir = out / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    for t, mu in log.snapshots:
        mu.to_csv(snap_dir / f"snapshot_t{t:.6g}.csv")
    meta = dict(version=__version__, seed=spec.seed, spec=spec.to_dict(),
                n_switches=log.n_switches, **extra)
    with open(out / "meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, default=str)


def cmd_run(args) -> int:
    try:
        spec = _load_spec(args)
    except (ValueError, KeyError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        if spec.concentration is not None:
            conc = spec.concentration
            sched = default_epsilon_schedule(conc["c"], conc.get("n_intervals", 20))
            log, report = run_concentration_demo(
                conc["c"], sched, n_particles=conc.get("n_particles", 5000),
                dt=spec.dt, seed=spec.seed)
            extra = dict(max_omega_mass=float(report["omega_mass"].max()),
                         final_window_mass=float(report["window_mass"][-1]))
        elif spec.controller is not None:
            log, report = run_hk_controlled(spec)
            extra = dict(consensus=report.consensus,
                         consensus_time=log.meta.get("consensus_time"),
                         n_clusters=report.n_clusters)
        else:
            log, report = run_hk_uncontrolled(spec)
            extra = dict(consensus=report.consensus, n_clusters=report.n_clusters)
    except SupportEscapeError as exc:
        args.out.mkdir(parents=True, exist_ok=True)
        report_path = args.out / "violation.txt"
        report_path.write_text(f"{exc}\n")
        print(f"invariant violation: {exc} (see {report_path})", file=sys.stderr)
        return 3
    _write_outputs(args.out, spec, log, extra)
    print(f"wrote {args.out}/trajectory.csv ({len(log.rows)} rows, "
          f"{len(log.snapshots)} snapshots)")
    return 0


def cmd_verify(args) -> int:
    try:
        rows = run_suite(args.suite, args.run_dir)
    except KeyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    width = max(len(name) for name, _, _ in rows)
    ok_all = True
    for name, ok, detail in rows:
        ok_all &= ok
        print(f"{name:<{width}}  {'PASS' if ok else 'FAIL'}  {detail}")
    return 0 if ok_all else 1


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args)
    return cmd_verify(args)


if __name__ == "__main__":
    sys.exit(main())
