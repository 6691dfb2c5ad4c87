"""Render figures from gomimo experiment CSVs.

Read-only over the CSV schemas emitted by the simulation harness; all
numbers come from the files, nothing is recomputed here.
"""

__version__ = "0.1.0"

from .render import FigureSpec, SchemaError, render  # noqa: F401
