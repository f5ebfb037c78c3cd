"""Minimal line charts with shaded bands, written as plain SVG text.

Output depends only on the inputs (fixed palette, fixed number formatting),
so the same curves always give the same bytes.
"""
from __future__ import annotations

from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from ..diagnostics import plot_values

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
MARGIN = {"left": 70, "right": 20, "top": 40, "bottom": 50}


@dataclass(frozen=True, eq=False)
class Series:
    label: str
    mean: np.ndarray
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None
    x: np.ndarray | None = None  # defaults to 1..n


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _tick_label(v: float) -> str:
    if v != 0 and (abs(v) >= 1e4 or abs(v) < 1e-2):
        return f"{v:.0e}"
    return f"{v:g}"


def render_svg(
    series: list[Series],
    *,
    title: str = "",
    xlabel: str = "episode",
    ylabel: str = "",
    log_y: bool = False,
    width: int = 640,
    height: int = 400,
) -> str:
    """Line chart, one polyline per series, band polygons where lo/hi are given.

    Infinite values are drawn at the plotting sentinel; on a log axis values
    are floored at the smallest positive value present.
    """
    if not series:
        raise ValueError("nothing to plot")
    prepared = []
    for s in series:
        mean = plot_values(np.asarray(s.mean, dtype=float))
        if mean.size == 0:
            raise ValueError(f"series {s.label!r} is empty")
        x = np.arange(1, mean.size + 1, dtype=float) if s.x is None else np.asarray(s.x, dtype=float)
        lo = None if s.lo is None else plot_values(np.asarray(s.lo, dtype=float))
        hi = None if s.hi is None else plot_values(np.asarray(s.hi, dtype=float))
        prepared.append((s.label, x, mean, lo, hi))

    ys = np.concatenate([np.concatenate([m] + [b for b in (lo, hi) if b is not None]) for _, _, m, lo, hi in prepared])
    xs = np.concatenate([x for _, x, *_ in prepared])
    if log_y:
        positive = ys[ys > 0]
        floor = positive.min() if positive.size else 1.0
        tf = lambda v: np.log10(np.maximum(v, floor))  # noqa: E731
    else:
        tf = lambda v: v  # noqa: E731
    y_lo, y_hi = float(tf(ys).min()), float(tf(ys).max())
    if log_y:
        y_lo, y_hi = np.floor(y_lo), np.ceil(y_hi)
    if y_hi - y_lo < 1e-12:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0
    x_lo, x_hi = float(xs.min()), float(xs.max())
    if x_hi - x_lo < 1e-12:
        x_lo, x_hi = x_lo - 1.0, x_hi + 1.0

    pw = width - MARGIN["left"] - MARGIN["right"]
    ph = height - MARGIN["top"] - MARGIN["bottom"]

    def px(v):
        return MARGIN["left"] + (np.asarray(v) - x_lo) / (x_hi - x_lo) * pw

    def py(v):
        return MARGIN["top"] + (1.0 - (tf(np.asarray(v)) - y_lo) / (y_hi - y_lo)) * ph

    def points(xv, yv):
        return " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(px(xv), py(yv)))

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-family="sans-serif" font-size="15">{escape(title)}</text>',
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    # axis ticks
    if log_y:
        y_ticks = [10.0**e for e in range(int(y_lo), int(y_hi) + 1)]
    else:
        y_ticks = list(np.linspace(y_lo, y_hi, 5))
    for v in y_ticks:
        y = float(py(v))
        out.append(f'<line x1="{MARGIN["left"] - 4}" y1="{_fmt(y)}" x2="{MARGIN["left"]}" y2="{_fmt(y)}" stroke="black"/>')
        out.append(
            f'<text x="{MARGIN["left"] - 6}" y="{_fmt(y + 4)}" text-anchor="end" font-family="sans-serif" font-size="11">{_tick_label(v)}</text>'
        )
    for v in np.linspace(x_lo, x_hi, 5):
        x = float(px(v))
        base = MARGIN["top"] + ph
        out.append(f'<line x1="{_fmt(x)}" y1="{base}" x2="{_fmt(x)}" y2="{base + 4}" stroke="black"/>')
        out.append(f'<text x="{_fmt(x)}" y="{base + 16}" text-anchor="middle" font-family="sans-serif" font-size="11">{_tick_label(round(v, 2))}</text>')
    out.append(
        f'<text x="{MARGIN["left"] + pw / 2:.1f}" y="{height - 10}" text-anchor="middle" font-family="sans-serif" font-size="13">{escape(xlabel)}</text>'
    )
    out.append(
        f'<text x="16" y="{MARGIN["top"] + ph / 2:.1f}" text-anchor="middle" font-family="sans-serif" font-size="13" '
        f'transform="rotate(-90 16 {MARGIN["top"] + ph / 2:.1f})">{escape(ylabel)}</text>'
    )

    for i, (label, x, mean, lo, hi) in enumerate(prepared):
        color = PALETTE[i % len(PALETTE)]
        if lo is not None and hi is not None:
            band = points(x, hi) + " " + points(x[::-1], lo[::-1])
            out.append(f'<polygon points="{band}" fill="{color}" fill-opacity="0.2" stroke="none"/>')
        out.append(f'<polyline points="{points(x, mean)}" fill="none" stroke="{color}" stroke-width="1.5"/>')

    for i, (label, *_rest) in enumerate(prepared):
        color = PALETTE[i % len(PALETTE)]
        ly = MARGIN["top"] + 12 + 18 * i
        lx = MARGIN["left"] + pw - 150
        out.append(f'<rect x="{lx}" y="{ly - 8}" width="14" height="10" fill="{color}"/>')
        out.append(f'<text x="{lx + 20}" y="{ly + 1}" font-family="sans-serif" font-size="12">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
