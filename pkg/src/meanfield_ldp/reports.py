"""Deterministic CSV and SVG report emission.

Reports render byte-identically for identical inputs: floats are written via
``repr`` (shortest round-trip form), SVG coordinates with fixed two-decimal
formatting, and nothing time- or environment-dependent is embedded.
"""

from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field

import numpy as np


@dataclass
class RateReport:
    """Tabular experiment outcome with a pass flag and free-form notes."""

    name: str
    columns: tuple
    rows: list
    passed: bool
    notes: tuple = ()

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_format_cell(cell) for cell in row])
        return buffer.getvalue()

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        lines = [f"[{status}] {self.name}: {len(self.rows)} rows"]
        lines.extend(f"  {note}" for note in self.notes)
        return "\n".join(lines)


def _format_cell(cell) -> str:
    if isinstance(cell, (bool, np.bool_)):
        return "true" if cell else "false"
    if isinstance(cell, (float, np.floating)):
        return repr(float(cell))
    if isinstance(cell, (int, np.integer)):
        return str(int(cell))
    return str(cell)


def emit_reports(report: RateReport, out_dir: str, fmt: str = "csv", svg: str | None = None):
    """Write the report under ``out_dir``; returns the list of paths written.

    ``fmt`` is ``csv``, ``svg``, or ``both``; the SVG is only written when a
    rendered document is supplied.
    """
    if fmt not in ("csv", "svg", "both"):
        raise ValueError(f"unknown format {fmt!r}")
    os.makedirs(out_dir, exist_ok=True)
    written = []
    if fmt in ("csv", "both"):
        path = os.path.join(out_dir, f"{report.name}.csv")
        try:
            with open(path, "w", encoding="utf-8") as handle:
                handle.write(report.to_csv())
        except OSError as err:
            raise OSError(f"cannot write report to {path}: {err}") from err
        written.append(path)
    if fmt in ("svg", "both") and svg is not None:
        path = os.path.join(out_dir, f"{report.name}.svg")
        try:
            with open(path, "w", encoding="utf-8") as handle:
                handle.write(svg)
        except OSError as err:
            raise OSError(f"cannot write report to {path}: {err}") from err
        written.append(path)
    return written


# ---------------------------------------------------------------------------
# minimal static SVG line plots
# ---------------------------------------------------------------------------

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

_WIDTH, _HEIGHT = 640, 440
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 70, 20, 40, 50


def line_plot_svg(title, xlabel, ylabel, series, log_x=False, log_y=False) -> str:
    """Self-contained SVG line/scatter plot.

    ``series`` is a list of ``(label, xs, ys)``; log axes transform the data
    and label ticks with the original values.  Output is byte-stable.
    """
    if not series:
        raise ValueError("need at least one series")

    def tx(values):
        out = []
        for v in values:
            v = float(v)
            if log_x:
                if v <= 0:
                    raise ValueError("log x-axis needs positive values")
                v = math.log10(v)
            out.append(v)
        return out

    def ty(values):
        out = []
        for v in values:
            v = float(v)
            if log_y:
                if v <= 0:
                    raise ValueError("log y-axis needs positive values")
                v = math.log10(v)
            out.append(v)
        return out

    xs_all = [v for _, xs, _ in series for v in tx(xs)]
    ys_all = [v for _, _, ys in series for v in ty(ys)]
    x_lo, x_hi = min(xs_all), max(xs_all)
    y_lo, y_hi = min(ys_all), max(ys_all)
    x_pad = (x_hi - x_lo) * 0.05 or 0.5
    y_pad = (y_hi - y_lo) * 0.05 or 0.5
    x_lo, x_hi = x_lo - x_pad, x_hi + x_pad
    y_lo, y_hi = y_lo - y_pad, y_hi + y_pad

    plot_w = _WIDTH - _MARGIN_L - _MARGIN_R
    plot_h = _HEIGHT - _MARGIN_T - _MARGIN_B

    def px(v):
        return _MARGIN_L + (v - x_lo) / (x_hi - x_lo) * plot_w

    def py(v):
        return _MARGIN_T + (y_hi - v) / (y_hi - y_lo) * plot_h

    def tick_label(v, logged):
        return f"{10.0 ** v:.4g}" if logged else f"{v:.4g}"

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
        f'<text x="{_WIDTH / 2:.2f}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="16">{title}</text>',
    ]
    # axes
    parts.append(
        f'<line x1="{_MARGIN_L}" y1="{_MARGIN_T}" x2="{_MARGIN_L}" '
        f'y2="{_HEIGHT - _MARGIN_B}" stroke="black"/>'
    )
    parts.append(
        f'<line x1="{_MARGIN_L}" y1="{_HEIGHT - _MARGIN_B}" x2="{_WIDTH - _MARGIN_R}" '
        f'y2="{_HEIGHT - _MARGIN_B}" stroke="black"/>'
    )
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        xv = x_lo + frac * (x_hi - x_lo)
        yv = y_lo + frac * (y_hi - y_lo)
        parts.append(
            f'<line x1="{px(xv):.2f}" y1="{_HEIGHT - _MARGIN_B}" x2="{px(xv):.2f}" '
            f'y2="{_HEIGHT - _MARGIN_B + 5}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{px(xv):.2f}" y="{_HEIGHT - _MARGIN_B + 20}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{tick_label(xv, log_x)}</text>'
        )
        parts.append(
            f'<line x1="{_MARGIN_L - 5}" y1="{py(yv):.2f}" x2="{_MARGIN_L}" '
            f'y2="{py(yv):.2f}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{_MARGIN_L - 8}" y="{py(yv) + 4:.2f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{tick_label(yv, log_y)}</text>'
        )
    parts.append(
        f'<text x="{_MARGIN_L + plot_w / 2:.2f}" y="{_HEIGHT - 10}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">{xlabel}</text>'
    )
    parts.append(
        f'<text x="18" y="{_MARGIN_T + plot_h / 2:.2f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13" '
        f'transform="rotate(-90 18 {_MARGIN_T + plot_h / 2:.2f})">{ylabel}</text>'
    )
    # series
    for idx, (label, xs, ys) in enumerate(series):
        color = _PALETTE[idx % len(_PALETTE)]
        coords = list(zip(tx(xs), ty(ys)))
        points = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in coords)
        parts.append(
            f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="2"/>'
        )
        for x, y in coords:
            parts.append(
                f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="3" fill="{color}"/>'
            )
        parts.append(
            f'<text x="{_WIDTH - _MARGIN_R - 6}" y="{_MARGIN_T + 16 + 16 * idx}" '
            f'text-anchor="end" font-family="sans-serif" font-size="12" '
            f'fill="{color}">{label}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
