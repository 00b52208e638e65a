"""Minimal static SVG line plots (no plotting dependency)."""
from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf")
WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 40, 50


def _ticks(lo: float, hi: float, n: int = 5) -> list:
    if hi <= lo:
        return [lo]
    step = 10 ** math.floor(math.log10((hi - lo) / n))
    for m in (1, 2, 5, 10):
        if (hi - lo) / (m * step) <= n:
            step *= m
            break
    start = math.ceil(lo / step) * step
    return [start + i * step for i in range(int((hi - start) / step + 1e-9) + 1)]


def _fmt(v: float, log: bool) -> str:
    return f"1e{v:.0f}" if log else f"{v:.3g}"


def line_plot(series: dict, path, title: str = "", xlabel: str = "t", ylabel: str = "",
              logx: bool = False, logy: bool = False) -> Path:
    """Write ``{label: (x, y)}`` as one SVG; nonpositive values are dropped on log axes."""
    cleaned = {}
    for label, (x, y) in series.items():
        x, y = np.asarray(x, float), np.asarray(y, float)
        ok = np.isfinite(x) & np.isfinite(y)
        if logx:
            ok &= x > 0
        if logy:
            ok &= y > 0
        x, y = x[ok], y[ok]
        cleaned[label] = (np.log10(x) if logx else x, np.log10(y) if logy else y)
    xs = np.concatenate([v[0] for v in cleaned.values()] or [np.zeros(1)])
    ys = np.concatenate([v[1] for v in cleaned.values()] or [np.zeros(1)])
    if xs.size == 0:
        xs = ys = np.zeros(1)
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def sx(v):
        return LEFT + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return TOP + ph - (v - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>']
    for v in _ticks(x0, x1):
        out.append(f'<line x1="{sx(v):.2f}" y1="{TOP + ph}" x2="{sx(v):.2f}" y2="{TOP + ph + 4}" stroke="#444"/>')
        out.append(f'<text x="{sx(v):.2f}" y="{TOP + ph + 16}" text-anchor="middle">{_fmt(v, logx)}</text>')
    for v in _ticks(y0, y1):
        out.append(f'<line x1="{LEFT - 4}" y1="{sy(v):.2f}" x2="{LEFT}" y2="{sy(v):.2f}" stroke="#444"/>')
        out.append(f'<text x="{LEFT - 6}" y="{sy(v) + 4:.2f}" text-anchor="end">{_fmt(v, logy)}</text>')
    for n, (label, (x, y)) in enumerate(cleaned.items()):
        color = _COLORS[n % len(_COLORS)]
        if x.size:
            pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y))
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{LEFT + 8}" y="{TOP + 14 + 14 * n}" fill="{color}">{escape(str(label))}</text>')
    out.append(f'<text x="{WIDTH / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>')
    out.append(f'<text x="{LEFT + pw / 2}" y="{HEIGHT - 10}" text-anchor="middle">'
               f'{escape(xlabel + (" (log10)" if logx else ""))}</text>')
    out.append(f'<text x="16" y="{TOP + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 16 {TOP + ph / 2})">{escape(ylabel + (" (log10)" if logy else ""))}</text>')
    out.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(out) + "\n")
    return path
