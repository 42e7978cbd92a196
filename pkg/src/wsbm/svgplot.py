"""Standalone SVG phase plot of failure rate against the threshold statistic C."""

from __future__ import annotations

import math
from html import escape
from typing import Sequence

from .montecarlo import SweepRow, fmt_float

WIDTH, HEIGHT = 640, 420
LEFT, RIGHT, TOP, BOTTOM = 70, 150, 30, 60
PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"]


def _num(x: float) -> str:
    return format(x, ".2f")


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 5, 10) if m * mag >= raw)
    start = math.ceil(lo / step) * step
    out, t = [], start
    while t <= hi + 1e-12:
        out.append(round(t, 12))
        t += step
    return out


def failure_plot(rows: Sequence[SweepRow], title: str = "Failure rate vs C") -> str:
    """Render rows as one polyline per ``(n, K, solver)`` with Wilson error bars.

    A dashed vertical line marks the threshold ``C = 1``.
    """
    pts = [r for r in rows if r.error is None and math.isfinite(r.C) and math.isfinite(r.failure_rate)]
    cs = [r.C for r in pts] + [1.0]
    x_lo, x_hi = 0.0, max(cs) * 1.05
    plot_w, plot_h = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def sx(c):
        return LEFT + (c - x_lo) / (x_hi - x_lo) * plot_w

    def sy(p):
        return TOP + (1.0 - p) * plot_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{_num(LEFT + plot_w / 2)}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{LEFT}" y1="{TOP + plot_h}" x2="{LEFT + plot_w}" y2="{TOP + plot_h}" stroke="black"/>',
        f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{TOP + plot_h}" stroke="black"/>',
    ]
    for t in _ticks(x_lo, x_hi):
        x = _num(sx(t))
        out.append(f'<line x1="{x}" y1="{TOP + plot_h}" x2="{x}" y2="{TOP + plot_h + 5}" stroke="black"/>')
        out.append(f'<text x="{x}" y="{TOP + plot_h + 18}" text-anchor="middle">{fmt_float(t)}</text>')
    for t in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = _num(sy(t))
        out.append(f'<line x1="{LEFT - 5}" y1="{y}" x2="{LEFT}" y2="{y}" stroke="black"/>')
        out.append(f'<text x="{LEFT - 8}" y="{y}" text-anchor="end" dominant-baseline="middle">{t:g}</text>')
    out.append(
        f'<text x="{_num(LEFT + plot_w / 2)}" y="{HEIGHT - 15}" text-anchor="middle">'
        "C = Σ (√a − √b)²</text>"
    )
    out.append(
        f'<text x="18" y="{_num(TOP + plot_h / 2)}" text-anchor="middle" '
        f'transform="rotate(-90 18 {_num(TOP + plot_h / 2)})">empirical failure rate</text>'
    )
    x1 = _num(sx(1.0))
    out.append(
        f'<line x1="{x1}" y1="{TOP}" x2="{x1}" y2="{TOP + plot_h}" stroke="gray" stroke-dasharray="6,4"/>'
    )
    out.append(f'<text x="{x1}" y="{TOP - 4}" text-anchor="middle" fill="gray">C = 1</text>')

    series: dict[tuple, list[SweepRow]] = {}
    for r in pts:
        series.setdefault((r.n, r.K, r.solver), []).append(r)
    for idx, (key, members) in enumerate(sorted(series.items())):
        colour = PALETTE[idx % len(PALETTE)]
        members = sorted(members, key=lambda r: r.C)
        coords = " ".join(f"{_num(sx(r.C))},{_num(sy(r.failure_rate))}" for r in members)
        out.append(f'<polyline points="{coords}" fill="none" stroke="{colour}" stroke-width="1.5"/>')
        for r in members:
            x = _num(sx(r.C))
            out.append(
                f'<line x1="{x}" y1="{_num(sy(r.ci_low))}" x2="{x}" y2="{_num(sy(r.ci_high))}" stroke="{colour}"/>'
            )
            out.append(f'<circle cx="{x}" cy="{_num(sy(r.failure_rate))}" r="3" fill="{colour}"/>')
        n, K, solver = key
        ly = TOP + 14 + 18 * idx
        lx = LEFT + plot_w + 12
        out.append(f'<rect x="{lx}" y="{ly - 8}" width="10" height="10" fill="{colour}"/>')
        out.append(f'<text x="{lx + 16}" y="{ly + 1}">n={n} K={K} {escape(solver)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
