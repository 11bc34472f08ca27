"""
CSV and SVG emission.

Every CSV starts with the schema comment, then the header row. Floats use 17
significant digits and lines end with a bare newline, so identical inputs
give byte-identical files.
"""

import logging
import math
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd
from jinja2 import Environment, FileSystemLoader, select_autoescape

from polaron_qhm.kms_thermometry import SpectralDecomposition
from polaron_qhm.spectra import DEFAULT_ETA, LineSpectrum
from polaron_qhm.utils import get_resource_path

logger = logging.getLogger("polaron_qhm.main")

CSV_SCHEMA = "# polaron-qhm v1"
FLOAT_FORMAT = "%.17g"
SPECTRUM_COLUMNS = ("frequency", "weight")

SVG_WIDTH = 640
SVG_HEIGHT = 420
SVG_MARGIN = {"left": 80, "right": 20, "top": 30, "bottom": 50}


def frame_to_csv(frame: pd.DataFrame) -> str:
    body = frame.to_csv(
        index=False,
        float_format=FLOAT_FORMAT,
        na_rep="nan",
        lineterminator="\n",
    )
    return f"{CSV_SCHEMA}\n{body}"


def write_csv(frame: pd.DataFrame, path) -> Path:
    target = Path(path)
    if target.parent and not target.parent.exists():
        target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(frame_to_csv(frame))
    logger.info(f"Wrote {len(frame)} row(s) to {target}")
    return target


def sweep_frame(rows: Iterable, columns: Sequence[str]) -> pd.DataFrame:
    records = [row.as_dict() for row in rows]
    return pd.DataFrame.from_records(records, columns=list(columns))


def write_sweep_csv(rows: Iterable, path, columns: Sequence[str]) -> Path:
    return write_csv(sweep_frame(rows, columns), path)


def spectrum_frame(spectrum: LineSpectrum) -> pd.DataFrame:
    return pd.DataFrame(
        {"frequency": spectrum.frequencies, "weight": spectrum.weights},
        columns=list(SPECTRUM_COLUMNS),
    )


def decomposition_frame(decomposition: SpectralDecomposition) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "frequency": decomposition.frequencies[decomposition.line_index],
            "omega_H": decomposition.omega_H,
            "omega_C": decomposition.omega_C,
            "weight": decomposition.weights,
        }
    )


def write_spectrum_csv(spectrum: LineSpectrum, path) -> Path:
    return write_csv(spectrum_frame(spectrum), path)


def read_spectrum_csv(path, broadening_eta: float = DEFAULT_ETA) -> LineSpectrum:
    """Load a spectrum written by write_spectrum_csv; raises ValueError on a bad file."""
    source = Path(path)
    with open(source, "r", encoding="utf-8") as handle:
        first = handle.readline().rstrip("\n")
    if first != CSV_SCHEMA:
        raise ValueError(f"{source} does not start with {CSV_SCHEMA!r}")
    frame = pd.read_csv(source, comment="#")
    missing = [name for name in SPECTRUM_COLUMNS if name not in frame.columns]
    if missing:
        raise ValueError(f"{source} lacks column(s) {', '.join(missing)}")
    return LineSpectrum(
        frame["frequency"].to_numpy(dtype=float),
        frame["weight"].to_numpy(dtype=float),
        broadening_eta,
    )


def _ticks(low: float, high: float, log: bool) -> List[float]:
    if log:
        first, last = math.floor(math.log10(low)), math.ceil(math.log10(high))
        step = max(1, (last - first) // 6)
        ticks = [10.0**k for k in range(first, last + 1, step)]
        return [t for t in ticks if low <= t <= high] or [low, high]
    return list(np.linspace(low, high, 5))


def _scale(values: np.ndarray, low: float, high: float, log: bool, start: float, span: float):
    if log:
        values, low, high = np.log10(values), math.log10(low), math.log10(high)
    if high == low:
        return np.full_like(values, start + 0.5 * span, dtype=float)
    return start + (values - low) / (high - low) * span


def render_sweep_svg(
    x,
    y,
    x_label: str,
    y_label: str,
    log_x: bool = False,
    log_y: bool = False,
    title: Optional[str] = None,
) -> str:
    """Single-series polyline plot of y against x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    usable = np.isfinite(x) & np.isfinite(y)
    if log_x:
        usable &= x > 0
    if log_y:
        y = np.abs(y)
        usable &= y > 0
    x, y = x[usable], y[usable]

    plot_w = SVG_WIDTH - SVG_MARGIN["left"] - SVG_MARGIN["right"]
    plot_h = SVG_HEIGHT - SVG_MARGIN["top"] - SVG_MARGIN["bottom"]
    points, x_ticks, y_ticks = [], [], []
    if x.size:
        x_low, x_high = float(x.min()), float(x.max())
        y_low, y_high = float(y.min()), float(y.max())
        px = _scale(x, x_low, x_high, log_x, SVG_MARGIN["left"], plot_w)
        py = _scale(y, y_low, y_high, log_y, SVG_MARGIN["top"] + plot_h, -plot_h)
        points = [f"{a:.2f},{b:.2f}" for a, b in zip(px, py)]
        for tick in _ticks(x_low, x_high, log_x):
            pos = float(_scale(np.array([tick]), x_low, x_high, log_x, SVG_MARGIN["left"], plot_w)[0])
            x_ticks.append({"pos": f"{pos:.2f}", "label": f"{tick:.3g}"})
        for tick in _ticks(y_low, y_high, log_y):
            pos = float(
                _scale(np.array([tick]), y_low, y_high, log_y, SVG_MARGIN["top"] + plot_h, -plot_h)[0]
            )
            y_ticks.append({"pos": f"{pos:.2f}", "label": f"{tick:.3g}"})

    env = Environment(
        loader=FileSystemLoader(get_resource_path("templates")),
        autoescape=select_autoescape(["svg", "j2"]),
        keep_trailing_newline=True,
    )
    template = env.get_template("sweep_plot.svg.j2")
    return template.render(
        width=SVG_WIDTH,
        height=SVG_HEIGHT,
        left=SVG_MARGIN["left"],
        top=SVG_MARGIN["top"],
        right=SVG_WIDTH - SVG_MARGIN["right"],
        bottom=SVG_HEIGHT - SVG_MARGIN["bottom"],
        points=" ".join(points),
        x_ticks=x_ticks,
        y_ticks=y_ticks,
        x_label=x_label,
        y_label=f"|{y_label}|" if log_y else y_label,
        title=title or f"{y_label} vs {x_label}",
    )


def write_sweep_svg(frame: pd.DataFrame, path, column: str, log_x: bool, log_y: bool) -> Path:
    target = Path(path)
    if target.parent and not target.parent.exists():
        target.parent.mkdir(parents=True, exist_ok=True)
    svg = render_sweep_svg(frame["value"], frame[column], "value", column, log_x, log_y)
    with open(target, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(svg)
    logger.info(f"Wrote plot of {column} to {target}")
    return target


# Copyright (c) 2025 AMD
