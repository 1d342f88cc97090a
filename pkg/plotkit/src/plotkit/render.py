"""Render backflow CSV artifacts as line plots with shaded violation bands.

Two CSV schemas are understood, matching the analyzer's column contract:
trajectory files ``t,phi,dphi_dt,violation_flag`` and scan files
``t,witness,verdict``. No numbers are recomputed here; the plot shows the
values and flags exactly as emitted.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


class PlotkitError(Exception):
    """Base error for the plotting front end."""


class SchemaError(PlotkitError):
    """A CSV is missing a required column or holds unparseable values."""


@dataclass(frozen=True)
class Series:
    label: str
    t: np.ndarray
    values: np.ndarray
    violations: np.ndarray  # bool per row
    kind: str  # 'trajectory' or 'scan'


@dataclass(frozen=True)
class PlotJob:
    """What to draw: input CSVs, labels, layout and output file."""

    inputs: tuple
    output: Path
    labels: tuple = ()
    panels: tuple | None = None  # (rows, cols); None = single shared axes
    shade_violations: bool = False

    def __post_init__(self):
        if len(self.inputs) < 1:
            raise PlotkitError("at least one input CSV is required")
        if self.labels and len(self.labels) != len(self.inputs):
            raise PlotkitError("one label per input CSV, please")
        if self.panels is not None:
            rows, cols = self.panels
            if rows * cols < len(self.inputs):
                raise PlotkitError(
                    f"{rows}x{cols} panels cannot hold {len(self.inputs)} series")


def load_series(path, label: str | None = None) -> Series:
    """Parse one CSV into a plottable series; raises SchemaError on defects."""
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"input file {path} does not exist")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        columns = reader.fieldnames or []
        if "t" not in columns:
            raise SchemaError(f"{path.name}: missing required column 't'")
        if "phi" in columns:
            kind, value_col, flag_col, bad_flag = "trajectory", "phi", "violation_flag", "1"
        elif "witness" in columns:
            kind, value_col, flag_col, bad_flag = "scan", "witness", "verdict", "0"
        else:
            raise SchemaError(f"{path.name}: missing value column 'phi' or 'witness'")
        if flag_col not in columns:
            raise SchemaError(f"{path.name}: missing required column '{flag_col}'")
        t, values, flags = [], [], []
        for row_no, row in enumerate(reader, start=2):
            try:
                t.append(float(row["t"]))
                values.append(float(row[value_col]))
                flags.append(row[flag_col].strip() == bad_flag)
            except (TypeError, ValueError) as exc:
                raise SchemaError(f"{path.name}: bad value on line {row_no}: {exc}") from exc
    if not t:
        raise SchemaError(f"{path.name}: no data rows")
    return Series(label=label or path.stem, t=np.asarray(t),
                  values=np.asarray(values), violations=np.asarray(flags, dtype=bool),
                  kind=kind)


def violation_spans(t: np.ndarray, flags: np.ndarray) -> list:
    """Contiguous flagged runs as (t_start, t_end) spans."""
    spans = []
    start = None
    prev = None
    for time, bad in zip(t, flags):
        if bad and start is None:
            start = float(time)
        elif not bad and start is not None:
            spans.append((start, float(prev)))
            start = None
        prev = time
    if start is not None:
        spans.append((start, float(t[-1])))
    return spans


_VALUE_AXIS = {"trajectory": "quantifier value", "scan": "step witness"}


def _draw(ax, series: Series, shade: bool) -> None:
    ax.plot(series.t, series.values, lw=1.4, label=series.label)
    if shade:
        for lo, hi in violation_spans(series.t, series.violations):
            ax.axvspan(lo, hi, color="tab:red", alpha=0.18, lw=0)
    ax.set_xlabel("t")
    ax.set_ylabel(_VALUE_AXIS[series.kind])


def render(job: PlotJob):
    """Draw the job and write the image; returns (output path, figure)."""
    labels = job.labels or tuple(None for _ in job.inputs)
    series = [load_series(p, lb) for p, lb in zip(job.inputs, labels)]
    if job.panels is not None:
        rows, cols = job.panels
        fig, axes = plt.subplots(rows, cols, figsize=(4.2 * cols, 3.0 * rows), dpi=150)
        flat = np.atleast_1d(axes).ravel()
        for ax, s in zip(flat, series):
            _draw(ax, s, job.shade_violations)
            ax.set_title(s.label, fontsize=10)
        for ax in flat[len(series):]:
            ax.set_visible(False)
    else:
        base = series[0].t
        for s in series[1:]:
            if s.t.shape != base.shape or not np.allclose(s.t, base, atol=1e-12):
                raise PlotkitError(
                    "inputs do not share a time grid; use --panels for "
                    "independent axes")
        fig, ax = plt.subplots(figsize=(5.6, 3.6), dpi=150)
        for s in series:
            _draw(ax, s, job.shade_violations)
        if len(series) > 1 or any(job.labels):
            ax.legend(fontsize=9)
    fig.tight_layout()
    out = Path(job.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out)
    return out, fig
