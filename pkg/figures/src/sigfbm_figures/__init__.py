"""Figure scripts for sigfbm CSV outputs."""

from .plot import FIGURE_KINDS, FigureSpec, PlotResult, SchemaError, plot

__all__ = ["FIGURE_KINDS", "FigureSpec", "PlotResult", "SchemaError", "plot"]
