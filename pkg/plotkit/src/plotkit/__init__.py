"""Plotting companion for backflow CSV artifacts."""

__version__ = "0.1.0"

from .render import PlotJob, PlotkitError, SchemaError, load_series, render, violation_spans
