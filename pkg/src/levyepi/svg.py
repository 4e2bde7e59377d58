"""Standalone SVG line charts, one panel per compartment."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

PANEL_W = 420
PANEL_H = 240
MARGIN = 48
MAX_POINTS = 2000


def _thin(times: np.ndarray, values: np.ndarray, max_points: int):
    if times.size <= max_points:
        return times, values
    idx = np.unique(np.linspace(0, times.size - 1, max_points).astype(int))
    return times[idx], values[idx]


def _ticks(lo: float, hi: float, n: int = 4):
    return [lo + (hi - lo) * k / n for k in range(n + 1)]


def _panel(x0, y0, title, times, values, color):
    t, v = _thin(np.asarray(times, float), np.asarray(values, float), MAX_POINTS)
    t_lo, t_hi = float(t[0]), float(t[-1])
    v_lo, v_hi = float(np.min(v)), float(np.max(v))
    if v_hi - v_lo < 1e-12:
        v_lo, v_hi = v_lo - 0.5, v_hi + 0.5
    w = PANEL_W - 2 * MARGIN
    h = PANEL_H - 2 * MARGIN
    span_t = (t_hi - t_lo) or 1.0

    def px(tt):
        return x0 + MARGIN + (tt - t_lo) / span_t * w

    def py(vv):
        return y0 + MARGIN + (v_hi - vv) / (v_hi - v_lo) * h

    pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(t, v))
    out = [
        f'<g class="panel" data-name="{escape(title)}">',
        f'<rect x="{x0 + MARGIN}" y="{y0 + MARGIN}" width="{w}" height="{h}" fill="none" stroke="#444"/>',
        f'<text x="{x0 + PANEL_W / 2}" y="{y0 + MARGIN - 12}" text-anchor="middle" '
        f'font-size="14">{escape(title)}</text>',
        f'<polyline fill="none" stroke="{color}" stroke-width="1" points="{pts}"/>',
    ]
    for tt in _ticks(t_lo, t_hi):
        out.append(f'<text x="{px(tt):.1f}" y="{y0 + PANEL_H - MARGIN + 16}" text-anchor="middle" '
                   f'font-size="10">{tt:g}</text>')
    for vv in _ticks(v_lo, v_hi):
        out.append(f'<text x="{x0 + MARGIN - 4}" y="{py(vv) + 3:.1f}" text-anchor="end" '
                   f'font-size="10">{vv:.3g}</text>')
    out.append(f'<text x="{x0 + PANEL_W / 2}" y="{y0 + PANEL_H - 8}" text-anchor="middle" '
               f'font-size="11">t (days)</text>')
    out.append("</g>")
    return out


def trajectory_svg(times, states, names=("S", "I", "S_m", "I_m"), metadata: dict | None = None,
                   columns: int = 2) -> str:
    """Render each column of ``states`` as its own panel in a grid layout.

    ``metadata`` is embedded verbatim in a ``<metadata>`` element so the
    figure can be traced back to its scenario and seed.
    """
    states = np.asarray(states, dtype=float)
    if states.ndim == 1:
        states = states[:, None]
    n = states.shape[1]
    if len(names) != n:
        raise ValueError("need one name per plotted column")
    rows = -(-n // columns)
    width, height = columns * PANEL_W, rows * PANEL_H
    colors = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")
    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
    ]
    if metadata:
        parts.append("<metadata>")
        for key, value in metadata.items():
            parts.append(f'<entry key="{escape(str(key))}">{escape(str(value))}</entry>')
        parts.append("</metadata>")
    parts.append(f'<rect width="{width}" height="{height}" fill="white"/>')
    for k in range(n):
        x0 = (k % columns) * PANEL_W
        y0 = (k // columns) * PANEL_H
        parts.extend(_panel(x0, y0, names[k], times, states[:, k], colors[k % len(colors)]))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_svg(path, times, states, **kwargs):
    with open(path, "w") as fh:
        fh.write(trajectory_svg(times, states, **kwargs))
