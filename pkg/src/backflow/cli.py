"""Command-line front end: scenario-driven simulation, divisibility checks,
classification and the qubit transformability test.

Exit codes: 0 success, 1 usage or configuration error, 2 internal analysis
inconsistency, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .analysis import (
    ClassifyConfig,
    alberti_check,
    check_cpd,
    check_gtde,
    check_p_divisibility,
    classify,
    monotonicity_report,
)
from .config import ScenarioConfig, load_alberti_states, load_scenario
from .errors import BackflowError, ConfigError, InconsistencyError
from .quantifiers import evaluate_trajectory
from .reporting import build_summary, fmt, write_scan_csv, write_trajectory_csv

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INCONSISTENT = 2
EXIT_NUMERIC = 3


def _grid_desc(cfg: ScenarioConfig) -> str:
    t = cfg.grid.times
    return f"[0, {fmt(float(t[-1]))}] x {t.size}"


def _family_desc(cfg: ScenarioConfig) -> str:
    return f"{cfg.family.label} ({cfg.family.kind}, dim {cfg.family.dim})"


def run_scenario(cfg: ScenarioConfig, out_dir) -> Path:
    """Run every requested analysis and write CSVs plus a summary report.

    Returns the summary path. Deterministic for a fixed config and seed.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tol = cfg.tolerances
    smp = cfg.sampling

    trajectory_entries = []
    if "trajectories" in cfg.analyses:
        for i, ens in enumerate(cfg.ensembles):
            for j, spec in enumerate(cfg.quantifiers):
                if spec.space != ens.space.kind:
                    continue
                traj = evaluate_trajectory(spec, ens, cfg.family, cfg.grid)
                mono = monotonicity_report(traj, tol=tol.monotonicity)
                name = f"traj_e{i}_q{j}_{spec.label()}"
                write_trajectory_csv(out / f"{name}.csv", traj, mono)
                trajectory_entries.append((name, mono, traj))

    scan_reports = {}
    classify_lines = None
    if "classify" in cfg.analyses:
        report = classify(cfg.family, cfg.grid, ClassifyConfig(
            seed=cfg.seed, cp_tol=tol.cp, pdiv_tol=tol.pdiv,
            mono_tol=tol.monotonicity, inv_scan_tol=tol.inv_scan,
            pdiv_samples=smp.pdiv_samples, gtde_trials=smp.gtde_trials,
            pq_ensembles=smp.pq_ensembles))
        classify_lines = report.summary_lines()
        names = {"CPD": "cpd", "PD": "pdiv", "GTDE": "gtde"}
        scan_reports.update(
            (names[k], v) for k, v in report.criterion_reports.items())
    if "cpd" in cfg.analyses and "cpd" not in scan_reports:
        scan_reports["cpd"] = check_cpd(cfg.family, cfg.grid, tol=tol.cp,
                                        inv_scan_tol=tol.inv_scan)
    if "pdiv" in cfg.analyses and "pdiv" not in scan_reports:
        scan_reports["pdiv"] = check_p_divisibility(
            cfg.family, cfg.grid, samples=smp.pdiv_samples, tol=tol.pdiv,
            seed=cfg.seed + 1, inv_scan_tol=tol.inv_scan)
    if "gtde" in cfg.analyses and "gtde" not in scan_reports:
        scan_reports["gtde"] = check_gtde(cfg.family, cfg.grid,
                                          trials=smp.gtde_trials,
                                          seed=cfg.seed + 2, tol=tol.monotonicity)

    for name, rep in scan_reports.items():
        write_scan_csv(out / f"scan_{name}.csv", rep)

    summary = build_summary(
        cfg.label, __version__, cfg.seed, tol, smp,
        _family_desc(cfg), _grid_desc(cfg),
        trajectory_entries, scan_reports, classify_lines)
    summary_path = out / "summary.txt"
    summary_path.write_text(summary, encoding="utf-8")
    return summary_path


def _apply_overrides(cfg: ScenarioConfig, args, tol_field: str | None) -> ScenarioConfig:
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    if tol_field and getattr(args, "tol", None) is not None:
        cfg = replace(cfg, tolerances=replace(cfg.tolerances, **{tol_field: args.tol}))
    return cfg


def _print_report(rep) -> None:
    print(f"criterion: {rep.criterion}")
    print(f"verdict: {'pass (no violation found)' if rep.verdict else 'VIOLATION'}")
    if rep.witness is not None:
        s, t, w = rep.witness
        print(f"witness: value {fmt(w)} on step [{fmt(s)}, {fmt(t)}]")
    if rep.excluded_times:
        print(f"excluded non-invertible times: {', '.join(fmt(x) for x in rep.excluded_times)}")
    if "caveat" in rep.meta:
        print(f"note: {rep.meta['caveat']}")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="backflow",
        description="Analyze divisibility and information backflow of open-system dynamics.")
    parser.add_argument("--version", action="version", version=f"backflow {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a scenario file and write CSV/report artifacts")
    sim.add_argument("--config", required=True, help="scenario TOML file")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--seed", type=int, help="override the scenario seed")
    sim.add_argument("--tol", type=float, help="override the monotonicity tolerance")

    chk = sub.add_parser("check", help="run a single divisibility/monotonicity criterion")
    chk.add_argument("criterion", choices=("cpd", "pdiv", "gtde"))
    chk.add_argument("--config", required=True)
    chk.add_argument("--out", help="optional directory for the scan CSV")
    chk.add_argument("--seed", type=int)
    chk.add_argument("--tol", type=float, help="override the criterion tolerance")

    cls = sub.add_parser("classify", help="full hierarchy classification of a scenario family")
    cls.add_argument("--config", required=True)
    cls.add_argument("--out", help="optional directory for scan CSVs")
    cls.add_argument("--seed", type=int)
    cls.add_argument("--tol", type=float, help="override the monotonicity tolerance")

    alb = sub.add_parser("alberti", help="qubit two-pair transformability check")
    alb.add_argument("--states", required=True, help="TOML file with rho1/rho2/sigma1/sigma2")
    return parser


def _cmd_simulate(args) -> int:
    cfg = _apply_overrides(load_scenario(args.config), args, "monotonicity")
    summary_path = run_scenario(cfg, args.out)
    print(summary_path.read_text(encoding="utf-8"), end="")
    return EXIT_OK


def _cmd_check(args) -> int:
    field = {"cpd": "cp", "pdiv": "pdiv", "gtde": "monotonicity"}[args.criterion]
    cfg = _apply_overrides(load_scenario(args.config), args, field)
    tol = cfg.tolerances
    if args.criterion == "cpd":
        rep = check_cpd(cfg.family, cfg.grid, tol=tol.cp, inv_scan_tol=tol.inv_scan)
    elif args.criterion == "pdiv":
        rep = check_p_divisibility(cfg.family, cfg.grid,
                                   samples=cfg.sampling.pdiv_samples,
                                   tol=tol.pdiv, seed=cfg.seed + 1,
                                   inv_scan_tol=tol.inv_scan)
    else:
        rep = check_gtde(cfg.family, cfg.grid, trials=cfg.sampling.gtde_trials,
                         seed=cfg.seed + 2, tol=tol.monotonicity)
    _print_report(rep)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        path = write_scan_csv(out / f"scan_{args.criterion}.csv", rep)
        print(f"scan written to {path}")
    return EXIT_OK


def _cmd_classify(args) -> int:
    cfg = _apply_overrides(load_scenario(args.config), args, "monotonicity")
    report = classify(cfg.family, cfg.grid, ClassifyConfig(
        seed=cfg.seed, cp_tol=cfg.tolerances.cp, pdiv_tol=cfg.tolerances.pdiv,
        mono_tol=cfg.tolerances.monotonicity, inv_scan_tol=cfg.tolerances.inv_scan,
        pdiv_samples=cfg.sampling.pdiv_samples, gtde_trials=cfg.sampling.gtde_trials,
        pq_ensembles=cfg.sampling.pq_ensembles))
    for line in report.summary_lines():
        print(line)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for key, rep in report.criterion_reports.items():
            write_scan_csv(out / f"scan_{key.lower()}.csv", rep)
    return EXIT_OK


def _cmd_alberti(args) -> int:
    rho1, rho2, sigma1, sigma2, x_grid = load_alberti_states(args.states)
    res = alberti_check(rho1, rho2, sigma1, sigma2, x_grid)
    print(f"feasible_evidence: {res.feasible_evidence}")
    print(f"worst_ratio: {fmt(res.worst_ratio)} at x = {fmt(res.worst_x)}")
    if res.skipped_x:
        print(f"skipped degenerate x: {', '.join(fmt(x) for x in res.skipped_x)}")
    print(f"note: {res.note} (grid evidence, not a certificate)")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    handlers = {
        "simulate": _cmd_simulate,
        "check": _cmd_check,
        "classify": _cmd_classify,
        "alberti": _cmd_alberti,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InconsistencyError as exc:
        print(f"analysis inconsistency: {exc}", file=sys.stderr)
        return EXIT_INCONSISTENT
    except BackflowError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
