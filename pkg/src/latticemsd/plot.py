"""Minimal deterministic log-log SVG plots."""
from __future__ import annotations

import math
from typing import Optional, Sequence

W, H, PAD = 480, 360, 48


def emit_plot(x: Sequence[float], y: Sequence[float], path, slope: Optional[float] = None,
              intercept: Optional[float] = None, title: str = "") -> None:
    """Write a log-log scatter of ``(x, y)`` with an optional fitted line ``y = e^c x^s``."""
    pts = [(float(a), float(b)) for a, b in zip(x, y) if a > 0 and b > 0 and math.isfinite(b)]
    if not pts:
        raise ValueError("nothing to plot")
    lx = [math.log10(a) for a, _ in pts]
    ly = [math.log10(b) for _, b in pts]
    x0, x1 = min(lx), max(lx)
    y0, y1 = min(ly), max(ly)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1

    def px(v):
        return PAD + (v - x0) / (x1 - x0) * (W - 2 * PAD)

    def py(v):
        return H - PAD - (v - y0) / (y1 - y0) * (H - 2 * PAD)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<rect x="{PAD}" y="{PAD}" width="{W - 2 * PAD}" height="{H - 2 * PAD}" fill="none" stroke="black"/>',
        f'<text x="{W / 2:.1f}" y="24" text-anchor="middle" font-size="14">{_esc(title)}</text>',
        f'<text x="{PAD}" y="{H - 16}" font-size="11">log10 x: {x0:.3g} .. {x1:.3g}</text>',
        f'<text x="{W - PAD}" y="{H - 16}" font-size="11" text-anchor="end">log10 y: {y0:.3g} .. {y1:.3g}</text>',
    ]
    for a, b in zip(lx, ly):
        out.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="3" fill="steelblue"/>')
    if slope is not None and intercept is not None:
        # fitted line in natural logs converted to log10
        f = lambda v: (intercept + slope * v * math.log(10)) / math.log(10)
        out.append(f'<line x1="{px(x0):.2f}" y1="{py(f(x0)):.2f}" x2="{px(x1):.2f}" y2="{py(f(x1)):.2f}" '
                   f'stroke="firebrick" stroke-width="1.5"/>')
        out.append(f'<text x="{W - PAD}" y="{PAD - 8}" font-size="11" text-anchor="end">slope {slope:.4f}</text>')
    out.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
