"""Minimal SVG heatmap writer with no plotting dependencies.

Color scale (fixed, documented): a two-sided diverging map over [-1, +1].
Value -1 renders as deep blue #2166ac, 0 as white #ffffff, +1 as deep red
#b2182b, with linear per-channel interpolation towards white on each side.
Values outside [-1, 1] are clamped. Rendering is a convenience for eyeballing
runs; the CSV files remain the quantitative contract.

Columns are subsampled to at most max_columns to keep files small; vertical
runs of identical color collapse into single rectangles.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

_NEGATIVE = (0x21, 0x66, 0xAC)
_POSITIVE = (0xB2, 0x18, 0x2B)
_WHITE = (0xFF, 0xFF, 0xFF)

_MARGIN_LEFT = 64.0
_MARGIN_RIGHT = 16.0
_MARGIN_TOP = 28.0
_MARGIN_BOTTOM = 40.0
_PLOT_WIDTH = 760.0
_PLOT_HEIGHT = 480.0


def color_of(value: float) -> str:
    """Hex color of one magnetization value under the documented scale."""
    v = max(-1.0, min(1.0, float(value)))
    end = _POSITIVE if v >= 0 else _NEGATIVE
    w = abs(v)
    r, g, b = (round(c0 + (c1 - c0) * w) for c0, c1 in zip(_WHITE, end))
    return f"#{r:02x}{g:02x}{b:02x}"


def render_heatmap(
    path: str | Path,
    times: np.ndarray,
    positions: np.ndarray,
    values: np.ndarray,
    boundary_center: np.ndarray | None = None,
    boundary_radius: float | None = None,
    max_columns: int = 200,
    title: str = "",
) -> None:
    """Write values[t, n] as a colored grid over (time, position).

    boundary_center (same length as times) plus boundary_radius overlay the
    moving window outside which the applied field vanishes, drawn as two green
    curves.
    """
    times = np.asarray(times, dtype=float)
    positions = np.asarray(positions, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.shape != (times.size, positions.size):
        raise ValueError("values must have shape (len(times), len(positions))")
    if times.size < 1 or positions.size < 2:
        raise ValueError("need at least one time and two positions")

    stride = max(1, math.ceil(times.size / max_columns))
    cols = list(range(0, times.size, stride))
    if cols[-1] != times.size - 1:
        cols.append(times.size - 1)

    t0, t1 = float(times[0]), float(times[-1])
    t_span = (t1 - t0) or 1.0
    p0, p1 = float(positions[0]), float(positions[-1])
    p_span = (p1 - p0) or 1.0

    def x_px(t: float) -> float:
        return _MARGIN_LEFT + (t - t0) / t_span * _PLOT_WIDTH

    def y_px(p: float) -> float:
        return _MARGIN_TOP + (p1 - p) / p_span * _PLOT_HEIGHT

    # column edges at midpoints between sampled times
    sampled = [float(times[i]) for i in cols]
    edges = [t0]
    edges.extend(0.5 * (sampled[i] + sampled[i + 1]) for i in range(len(sampled) - 1))
    edges.append(t1)

    cell_h = _PLOT_HEIGHT / positions.size
    parts: list[str] = []
    width = _MARGIN_LEFT + _PLOT_WIDTH + _MARGIN_RIGHT
    height = _MARGIN_TOP + _PLOT_HEIGHT + _MARGIN_BOTTOM
    parts.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" '
        f'height="{height:.0f}" viewBox="0 0 {width:.0f} {height:.0f}">'
    )
    parts.append(f'<rect width="{width:.0f}" height="{height:.0f}" fill="white"/>')
    if title:
        parts.append(
            f'<text x="{_MARGIN_LEFT}" y="18" font-family="sans-serif" '
            f'font-size="13">{title}</text>'
        )

    for ci, col in enumerate(cols):
        x_left = x_px(edges[ci])
        w = max(x_px(edges[ci + 1]) - x_left, 0.1)
        column = values[col]
        # collapse vertical runs of identical color (site order = top of the
        # chain at the top of the plot)
        n = 0
        while n < positions.size:
            fill = color_of(column[n])
            run = n
            while run + 1 < positions.size and color_of(column[run + 1]) == fill:
                run += 1
            y_top = y_px(positions[run]) - 0.5 * cell_h
            h = (run - n + 1) * cell_h
            parts.append(
                f'<rect x="{x_left:.2f}" y="{y_top:.2f}" width="{w:.2f}" '
                f'height="{h:.2f}" fill="{fill}"/>'
            )
            n = run + 1

    if boundary_center is not None and boundary_radius is not None:
        centers = np.asarray(boundary_center, dtype=float)
        if centers.size != times.size:
            raise ValueError("boundary_center must match times in length")
        for sign in (-1.0, 1.0):
            pts = []
            for i in cols:
                p = float(centers[i] + sign * boundary_radius)
                p = max(p0, min(p1, p))
                pts.append(f"{x_px(float(times[i])):.2f},{y_px(p):.2f}")
            parts.append(
                f'<polyline points="{" ".join(pts)}" fill="none" '
                f'stroke="#2ca02c" stroke-width="1.5"/>'
            )

    label_font = 'font-family="sans-serif" font-size="11"'
    parts.append(
        f'<text x="{_MARGIN_LEFT}" y="{height - 12:.0f}" {label_font}>t = {t0:g}</text>'
    )
    parts.append(
        f'<text x="{_MARGIN_LEFT + _PLOT_WIDTH - 60:.0f}" y="{height - 12:.0f}" '
        f"{label_font}>t = {t1:g}</text>"
    )
    parts.append(
        f'<text x="4" y="{_MARGIN_TOP + 10:.0f}" {label_font}>x = {p1:g}</text>'
    )
    parts.append(
        f'<text x="4" y="{_MARGIN_TOP + _PLOT_HEIGHT:.0f}" {label_font}>x = {p0:g}</text>'
    )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")
