"""CSV and text-report emission with deterministic formatting.

All numbers are written with 12 significant digits so identical runs produce
byte-identical files. Trajectory CSVs carry ``t,phi,dphi_dt,violation_flag``;
divisibility/monotonicity scans carry ``t,witness,verdict``.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .analysis import MarkovReport
from .quantifiers import Trajectory

TRAJECTORY_COLUMNS = ("t", "phi", "dphi_dt", "violation_flag")
SCAN_COLUMNS = ("t", "witness", "verdict")


def fmt(x: float) -> str:
    """Deterministic 12-significant-digit decimal rendering."""
    return f"{x:.12g}"


def write_trajectory_csv(path, traj: Trajectory, mono: MarkovReport) -> Path:
    path = Path(path)
    lines = [",".join(TRAJECTORY_COLUMNS)]
    deriv = mono.step_witness
    flags = ~mono.step_ok
    for t, phi, d, bad in zip(traj.times, traj.values, deriv, flags):
        lines.append(f"{fmt(t)},{fmt(phi)},{fmt(d)},{1 if bad else 0}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_scan_csv(path, report: MarkovReport) -> Path:
    path = Path(path)
    lines = [",".join(SCAN_COLUMNS)]
    for t, w, ok in zip(report.step_times, report.step_witness, report.step_ok):
        lines.append(f"{fmt(t)},{fmt(w)},{1 if ok else 0}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def _report_lines(name: str, rep: MarkovReport) -> list[str]:
    lines = [f"[{name}]", f"verdict: {'pass' if rep.verdict else 'VIOLATION'}"]
    if rep.witness is not None:
        s, t, w = rep.witness
        lines.append(f"witness: value {fmt(w)} on step [{fmt(s)}, {fmt(t)}]")
    if rep.measure_N is not None:
        lines.append(f"measure_N: {fmt(rep.measure_N)}")
    if rep.violation_intervals:
        spans = "; ".join(f"[{fmt(a)}, {fmt(b)}]" for a, b in rep.violation_intervals)
        lines.append(f"violation_intervals: {spans}")
    if rep.excluded_times:
        pts = ", ".join(fmt(t) for t in rep.excluded_times)
        lines.append(f"excluded_times: {pts}")
    for key in ("tol", "samples", "trials", "seed", "caveat"):
        if key in rep.meta:
            val = rep.meta[key]
            lines.append(f"{key}: {fmt(val) if isinstance(val, float) else val}")
    return lines


def build_summary(label: str, version: str, seed: int, tolerances, sampling,
                  family_desc: str, grid_desc: str,
                  trajectory_entries: list[tuple[str, MarkovReport, Trajectory]],
                  scan_reports: dict[str, MarkovReport],
                  classify_lines: list[str] | None) -> str:
    lines = [
        "backflow analysis summary",
        f"version: {version}",
        f"scenario: {label}",
        f"seed: {seed}",
        "entropy units: nats",
        f"dynamics: {family_desc}",
        f"grid: {grid_desc}",
        (f"tolerances: cp={fmt(tolerances.cp)} pdiv={fmt(tolerances.pdiv)} "
         f"monotonicity={fmt(tolerances.monotonicity)} inv_scan={fmt(tolerances.inv_scan)}"),
        (f"sampling: pdiv_samples={sampling.pdiv_samples} "
         f"gtde_trials={sampling.gtde_trials} pq_ensembles={sampling.pq_ensembles}"),
        "",
    ]
    for name, rep, traj in trajectory_entries:
        status = "monotone" if rep.verdict else "backflow"
        lines.append(f"[trajectory {name}]")
        lines.append(f"quantifier: {traj.quantifier.label()}")
        lines.append(f"ensemble: {traj.ensemble_fingerprint}")
        lines.append(f"status: {status}")
        lines.append(f"measure_N: {fmt(rep.measure_N)}")
        if rep.violation_intervals:
            spans = "; ".join(f"[{fmt(a)}, {fmt(b)}]" for a, b in rep.violation_intervals)
            lines.append(f"violation_intervals: {spans}")
        for w in traj.warnings:
            lines.append(f"warning: {w}")
        lines.append("")
    for name, rep in scan_reports.items():
        lines.extend(_report_lines(name, rep))
        lines.append("")
    if classify_lines:
        lines.append("[classification]")
        lines.extend(classify_lines)
        lines.append("")
    lines.append("caveat: sampled verdicts are evidence over the stated budgets, "
                 "not certificates; 'Markovian' means no violation found")
    return "\n".join(lines) + "\n"
