"""Offline plotting for guidesim CSV outputs."""

from .render import KINDS, PlotJob, SchemaError, render

__version__ = "0.1.0"
