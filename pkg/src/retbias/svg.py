"""Dependency-free SVG rendering of Lorenz curves."""

from __future__ import annotations

from html import escape
from typing import Mapping

from .analysis import LorenzCurve

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")

W, H = 560, 460
LEFT, RIGHT, TOP, BOTTOM = 60, 150, 30, 50


def _xy(px: float, py: float) -> str:
    plot_w, plot_h = W - LEFT - RIGHT, H - TOP - BOTTOM
    return f"{LEFT + px * plot_w:.2f},{TOP + (1 - py) * plot_h:.2f}"


def lorenz_svg(curves: Mapping[str, LorenzCurve], title: str = "Lorenz curves") -> str:
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" '
        'font-family="sans-serif" font-size="12">',
        f'<rect width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2:.0f}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<polyline points="{_xy(0, 0)} {_xy(1, 0)} {_xy(1, 1)} {_xy(0, 1)} {_xy(0, 0)}" '
        'fill="none" stroke="#888"/>',
        f'<line x1="{_xy(0, 0).split(",")[0]}" y1="{_xy(0, 0).split(",")[1]}" '
        f'x2="{_xy(1, 1).split(",")[0]}" y2="{_xy(1, 1).split(",")[1]}" stroke="#aaa" stroke-dasharray="4 3"/>',
    ]
    for tick in (0, 0.25, 0.5, 0.75, 1):
        x, y = _xy(tick, 0).split(",")
        parts.append(f'<text x="{x}" y="{float(y) + 16:.2f}" text-anchor="middle">{tick:g}</text>')
        x, y = _xy(0, tick).split(",")
        parts.append(f'<text x="{float(x) - 6:.2f}" y="{float(y) + 4:.2f}" text-anchor="end">{tick:g}</text>')
    parts.append(f'<text x="{(LEFT + W - RIGHT) / 2:.0f}" y="{H - 12}" text-anchor="middle">'
                 'fraction of documents (ascending retrievability)</text>')
    parts.append(f'<text transform="translate(16 {(TOP + H - BOTTOM) / 2:.0f}) rotate(-90)" '
                 'text-anchor="middle">cumulative share of retrievability</text>')
    for i, (label, curve) in enumerate(curves.items()):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(_xy(p, s) for p, s in curve.points)
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = TOP + 14 + 18 * i
        lx = W - RIGHT + 12
        parts.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{lx + 26}" y="{ly + 4}">{escape(label)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
