"""Command-line entry: plot one or more backflow CSVs into a figure file."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .render import PlotJob, PlotkitError, render


def _parse_panels(text: str):
    try:
        rows, cols = text.lower().split("x")
        rows, cols = int(rows), int(cols)
    except ValueError:
        raise argparse.ArgumentTypeError(f"panels must look like '2x2', got {text!r}")
    if rows < 1 or cols < 1:
        raise argparse.ArgumentTypeError("panel counts must be positive")
    return rows, cols


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="backflow-plot",
        description="Render trajectory/scan CSVs as line plots with optional "
                    "shaded violation bands.")
    parser.add_argument("--in", dest="inputs", nargs="+", required=True,
                        metavar="CSV", help="input CSV files")
    parser.add_argument("--out", required=True, help="output image (svg/png/pdf)")
    parser.add_argument("--panels", type=_parse_panels, default=None,
                        help="grid layout like 2x2; default overlays one axes")
    parser.add_argument("--shade", action="store_true",
                        help="shade flagged violation intervals")
    parser.add_argument("--labels", nargs="+", default=None,
                        help="legend labels, one per input")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    job_kwargs = dict(
        inputs=tuple(Path(p) for p in args.inputs),
        output=Path(args.out),
        labels=tuple(args.labels) if args.labels else (),
        panels=args.panels,
        shade_violations=args.shade,
    )
    try:
        out, _ = render(PlotJob(**job_kwargs))
    except PlotkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"figure written to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
