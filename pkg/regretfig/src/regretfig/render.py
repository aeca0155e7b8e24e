"""Render regret-experiment CSVs as line figures with stderr bands.

Input files follow the simulator's output schema:

    round,mean_cum_regret,stderr_cum_regret,mean_cum_spend,mean_normalized_regret

Cumulative mode draws one line per labeled file with a shaded band of one
standard error either side whenever the stderr column is present; normalized
mode draws the mean normalized-regret column, whose flatness is how
convergence of the regret rate reads off the figure.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

MODES = ("cumulative", "normalized")

# columns a file must provide per mode; anything extra is ignored
_REQUIRED = {
    "cumulative": ("round", "mean_cum_regret"),
    "normalized": ("round", "mean_normalized_regret"),
}
_BAND = "stderr_cum_regret"

_YLABEL = {
    "cumulative": "cumulative regret",
    "normalized": "cumulative regret / t^0.75",
}


class SchemaError(ValueError):
    """A CSV does not match the expected output schema."""


@dataclass(frozen=True)
class SeriesInput:
    path: Path
    label: str


@dataclass(frozen=True)
class PlotSpec:
    inputs: tuple[SeriesInput, ...]
    output: Path
    mode: str
    title: str | None = None
    xlabel: str = "round"
    ylabel: str | None = None
    dpi: int = 120

    def __post_init__(self) -> None:
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "output", Path(self.output))
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.inputs:
            raise ValueError("need at least one input series")


def load_series(path: Path | str, mode: str) -> dict[str, np.ndarray]:
    """Read the columns ``mode`` needs (plus the band column when present)."""
    path = Path(path)
    wanted = _REQUIRED[mode]
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise SchemaError(f"{path}: empty file, expected a CSV header")
        missing = [c for c in wanted if c not in reader.fieldnames]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
        keep = list(wanted)
        if _BAND in reader.fieldnames:
            keep.append(_BAND)
        rows = []
        for record in reader:
            try:
                rows.append([float(record[c]) for c in keep])
            except (TypeError, ValueError):
                raise SchemaError(
                    f"{path}: non-numeric value on data row {reader.line_num}"
                ) from None
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    data = np.asarray(rows, dtype=float)
    return {c: data[:, i] for i, c in enumerate(keep)}


def render(spec: PlotSpec) -> Path:
    """Draw the figure described by ``spec`` and return the written path."""
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    try:
        for series in spec.inputs:
            data = load_series(series.path, spec.mode)
            x = data["round"]
            y = data[_REQUIRED[spec.mode][1]]
            (line,) = ax.plot(x, y, label=series.label, linewidth=1.6)
            if spec.mode == "cumulative" and _BAND in data:
                err = data[_BAND]
                ax.fill_between(x, y - err, y + err,
                                color=line.get_color(), alpha=0.25,
                                linewidth=0)
        ax.set_xlabel(spec.xlabel)
        ax.set_ylabel(spec.ylabel or _YLABEL[spec.mode])
        if spec.title:
            ax.set_title(spec.title)
        # matplotlib convention: underscore labels stay out of the legend
        if any(not s.label.startswith("_") for s in spec.inputs):
            ax.legend(loc="best")
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        save_kwargs = {"dpi": spec.dpi}
        if spec.output.suffix.lower() == ".png":
            # drop the writer's software tag so identical inputs give
            # identical bytes
            save_kwargs["metadata"] = {"Software": None}
        spec.output.parent.mkdir(parents=True, exist_ok=True)
        fig.savefig(spec.output, **save_kwargs)
    finally:
        plt.close(fig)
    return spec.output
