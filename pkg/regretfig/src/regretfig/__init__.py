"""Figure rendering for pacing-experiment CSVs."""

from .render import MODES, PlotSpec, SchemaError, SeriesInput, load_series, render

__version__ = "0.1.0"

__all__ = [
    "MODES",
    "PlotSpec",
    "SchemaError",
    "SeriesInput",
    "load_series",
    "render",
]
