"""Minimal SVG line plots with shaded error bands."""

from __future__ import annotations

import math
from html import escape

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
WIDTH, HEIGHT = 640, 400
MARGIN = dict(left=70, right=150, top=40, bottom=50)


def _nice_ticks(lo: float, hi: float, count: int = 5) -> np.ndarray:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.floor(lo / step) * step
    return np.arange(start, hi + 0.5 * step, step)


def _fmt(v: float) -> str:
    return f"{v:.1f}"


def band_plot(
    x: np.ndarray,
    curves: dict[str, tuple[np.ndarray, np.ndarray]],
    title: str = "",
    xlabel: str = "iteration",
    ylabel: str = "cumulative regret",
) -> str:
    """SVG document with one ``mean`` polyline and a ``mean +/- se`` band per curve.

    Parameters
    ----------
    x : array
        Shared abscissa.
    curves : dict
        ``label -> (mean, se)``, each the same length as ``x``.
    """
    x = np.asarray(x, dtype=float)
    lows = [np.asarray(m) - np.asarray(s) for m, s in curves.values()]
    highs = [np.asarray(m) + np.asarray(s) for m, s in curves.values()]
    y_lo = min((float(np.nanmin(v)) for v in lows), default=0.0)
    y_hi = max((float(np.nanmax(v)) for v in highs), default=1.0)
    yt = _nice_ticks(min(y_lo, 0.0), y_hi)
    xt = _nice_ticks(float(x.min()), float(x.max()))
    y0, y1 = float(yt[0]), float(yt[-1])
    x0, x1 = float(x.min()), float(max(x.max(), x.min() + 1))

    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(v):
        return MARGIN["left"] + (np.asarray(v, dtype=float) - x0) / (x1 - x0) * pw

    def py(v):
        return MARGIN["top"] + ph - (np.asarray(v, dtype=float) - y0) / (y1 - y0) * ph

    def points(xs, ys):
        return " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(px(xs), py(ys)))

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2 - MARGIN["right"] / 2:.0f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]
    left, bottom = MARGIN["left"], MARGIN["top"] + ph
    out.append('<g class="axes" stroke="black" fill="none">')
    out.append(f'<line x1="{left}" y1="{MARGIN["top"]}" x2="{left}" y2="{bottom}"/>')
    out.append(f'<line x1="{left}" y1="{bottom}" x2="{left + pw}" y2="{bottom}"/>')
    out.append("</g>")
    for t in xt:
        if x0 <= t <= x1:
            out.append(f'<text x="{_fmt(px(t))}" y="{bottom + 18}" text-anchor="middle">{t:g}</text>')
    for t in yt:
        out.append(
            f'<line x1="{left}" y1="{_fmt(py(t))}" x2="{left + pw}" y2="{_fmt(py(t))}" stroke="#dddddd"/>'
            f'<text x="{left - 6}" y="{_fmt(py(t) + 4)}" text-anchor="end">{t:g}</text>'
        )
    out.append(f'<text x="{left + pw / 2:.0f}" y="{HEIGHT - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="16" y="{MARGIN["top"] + ph / 2:.0f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {MARGIN["top"] + ph / 2:.0f})">{escape(ylabel)}</text>'
    )

    for k, (label, (mean, se)) in enumerate(curves.items()):
        color = PALETTE[k % len(PALETTE)]
        mean, se = np.asarray(mean, dtype=float), np.asarray(se, dtype=float)
        band = points(x, mean + se) + " " + points(x[::-1], (mean - se)[::-1])
        out.append(f'<polygon class="band" data-label="{escape(label)}" points="{band}" fill="{color}" fill-opacity="0.2" stroke="none"/>')
        out.append(
            f'<polyline class="mean" data-label="{escape(label)}" points="{points(x, mean)}" '
            f'fill="none" stroke="{color}" stroke-width="2"/>'
        )
        ly = MARGIN["top"] + 10 + 20 * k
        lx = WIDTH - MARGIN["right"] + 15
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly + 4}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
