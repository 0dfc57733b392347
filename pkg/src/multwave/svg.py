"""Minimal self-contained SVG writers for boxplots and log-log rate plots."""
from __future__ import annotations

import math
from typing import Dict, Optional, Sequence
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=70, right=20, top=40, bottom=60)


def _num(v: float) -> str:
    return f"{v:.2f}"


class _Canvas:
    def __init__(self, title: str):
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
            f'<text x="{WIDTH / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        ]

    def line(self, x1, y1, x2, y2, stroke="black", width=1.0, dash: Optional[str] = None):
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<line x1="{_num(x1)}" y1="{_num(y1)}" x2="{_num(x2)}" y2="{_num(y2)}" '
            f'stroke="{stroke}" stroke-width="{width}"{d}/>'
        )

    def rect(self, x, y, w, h, fill="#cfe2f3", stroke="black"):
        self.parts.append(
            f'<rect x="{_num(x)}" y="{_num(y)}" width="{_num(w)}" height="{_num(h)}" '
            f'fill="{fill}" stroke="{stroke}"/>'
        )

    def circle(self, x, y, r=3.0, fill="black"):
        self.parts.append(f'<circle cx="{_num(x)}" cy="{_num(y)}" r="{r}" fill="{fill}"/>')

    def text(self, x, y, s, anchor="middle", rotate: Optional[float] = None):
        t = f' transform="rotate({rotate} {_num(x)} {_num(y)})"' if rotate is not None else ""
        self.parts.append(f'<text x="{_num(x)}" y="{_num(y)}" text-anchor="{anchor}"{t}>{escape(s)}</text>')

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def _ticks(lo: float, hi: float, count: int = 5):
    if hi <= lo:
        hi = lo + 1.0
    return [lo + (hi - lo) * i / (count - 1) for i in range(count)]


def boxplot_svg(boxes: Dict[str, Dict[str, float]], title: str, ylabel: str = "MSE") -> str:
    """One box per entry; values are five-number summaries (min, q1, median, q3, max)."""
    c = _Canvas(title)
    x0, x1 = MARGIN["left"], WIDTH - MARGIN["right"]
    y0, y1 = HEIGHT - MARGIN["bottom"], MARGIN["top"]
    lo = min(b["min"] for b in boxes.values())
    hi = max(b["max"] for b in boxes.values())
    pad = 0.05 * (hi - lo or abs(hi) or 1.0)
    lo, hi = lo - pad, hi + pad

    def sy(v):
        return y0 - (v - lo) / (hi - lo) * (y0 - y1)

    c.line(x0, y0, x1, y0)
    c.line(x0, y0, x0, y1)
    for t in _ticks(lo, hi):
        c.line(x0 - 4, sy(t), x0, sy(t))
        c.text(x0 - 6, sy(t) + 4, f"{t:.3g}", anchor="end")
    c.text(18, (y0 + y1) / 2, ylabel, rotate=-90)
    slot = (x1 - x0) / max(len(boxes), 1)
    for i, (name, b) in enumerate(boxes.items()):
        cx = x0 + slot * (i + 0.5)
        half = slot * 0.25
        c.line(cx, sy(b["min"]), cx, sy(b["q1"]))
        c.line(cx, sy(b["q3"]), cx, sy(b["max"]))
        c.line(cx - half / 2, sy(b["min"]), cx + half / 2, sy(b["min"]))
        c.line(cx - half / 2, sy(b["max"]), cx + half / 2, sy(b["max"]))
        c.rect(cx - half, sy(b["q3"]), 2 * half, max(sy(b["q1"]) - sy(b["q3"]), 0.5))
        c.line(cx - half, sy(b["median"]), cx + half, sy(b["median"]), width=2.0)
        c.text(cx, y0 + 18, name)
    return c.render()


def loglog_svg(xs: Sequence[float], ys: Sequence[float], slope: float, intercept: float, title: str,
               xlabel: str = "n", ylabel: str = "MISE") -> str:
    """Points (x, y) on log-log axes with the fitted line exp(intercept) * x**slope."""
    c = _Canvas(title)
    x0, x1 = MARGIN["left"], WIDTH - MARGIN["right"]
    y0, y1 = HEIGHT - MARGIN["bottom"], MARGIN["top"]
    lx = [math.log10(v) for v in xs]
    ly = [math.log10(v) for v in ys]
    fit = [(intercept + slope * math.log(v)) / math.log(10) for v in xs]
    xlo, xhi = min(lx), max(lx)
    ylo, yhi = min(ly + fit), max(ly + fit)
    xpad = 0.05 * (xhi - xlo or 1.0)
    ypad = 0.05 * (yhi - ylo or 1.0)
    xlo, xhi, ylo, yhi = xlo - xpad, xhi + xpad, ylo - ypad, yhi + ypad

    def sx(v):
        return x0 + (v - xlo) / (xhi - xlo) * (x1 - x0)

    def sy(v):
        return y0 - (v - ylo) / (yhi - ylo) * (y0 - y1)

    c.line(x0, y0, x1, y0)
    c.line(x0, y0, x0, y1)
    for v, l in zip(xs, lx):
        c.line(sx(l), y0, sx(l), y0 + 4)
        c.text(sx(l), y0 + 18, f"{v:g}")
    for t in _ticks(ylo, yhi):
        c.line(x0 - 4, sy(t), x0, sy(t))
        c.text(x0 - 6, sy(t) + 4, f"{10 ** t:.2g}", anchor="end")
    c.text((x0 + x1) / 2, HEIGHT - 15, xlabel)
    c.text(18, (y0 + y1) / 2, ylabel, rotate=-90)
    c.line(sx(lx[0]), sy(fit[0]), sx(lx[-1]), sy(fit[-1]), stroke="red", dash="6,3")
    for a, b in zip(lx, ly):
        c.circle(sx(a), sy(b))
    c.text(x1 - 4, y1 + 14, f"slope = {slope:.3f}", anchor="end")
    return c.render()
