"""Minimal self-contained SVG charts: line series, boxplots and ranked paths.

Output depends only on the data and the arguments, so identical inputs give
identical files. Numbers are written with fixed precision.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 720, 450
MARGIN = dict(left=72, right=150, top=40, bottom=56)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


@dataclass(frozen=True)
class Series:
    label: str
    x: Sequence[float]
    y: Sequence[float]
    color: str | None = None
    dashed: bool = False
    width: float = 1.5
    opacity: float = 1.0
    in_legend: bool = True


def _f(v: float) -> str:
    return f"{v:.2f}"


def _ramp(t: float) -> str:
    """Dark to light along the iteration rank, t in [0, 1]."""
    t = min(max(t, 0.0), 1.0)
    dark, light = (8, 29, 88), (199, 233, 180)
    r, g, b = (round(d + (l - d) * t) for d, l in zip(dark, light))
    return f"#{r:02x}{g:02x}{b:02x}"


class _Axes:
    def __init__(self, xlim, ylim, logy=False):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        self.logy = logy
        self.px0, self.px1 = MARGIN["left"], WIDTH - MARGIN["right"]
        self.py0, self.py1 = HEIGHT - MARGIN["bottom"], MARGIN["top"]

    def _ty(self, y):
        return math.log10(y) if self.logy else y

    def X(self, x):
        span = (self.x1 - self.x0) or 1.0
        return self.px0 + (x - self.x0) / span * (self.px1 - self.px0)

    def Y(self, y):
        lo, hi = self._ty(self.y0), self._ty(self.y1)
        span = (hi - lo) or 1.0
        return self.py0 + (self._ty(y) - lo) / span * (self.py1 - self.py0)

    def ticks(self, n=6):
        xt = np.linspace(self.x0, self.x1, n)
        if self.logy:
            lo, hi = math.floor(math.log10(self.y0)), math.ceil(math.log10(self.y1))
            step = max(1, (hi - lo) // 6)
            yt = [10.0 ** k for k in range(lo, hi + 1, step) if self.y0 <= 10.0 ** k <= self.y1]
        else:
            yt = np.linspace(self.y0, self.y1, n)
        return xt, yt


def _tick_label(v: float, log: bool = False) -> str:
    if log:
        return f"1e{int(round(math.log10(v)))}"
    if v != 0 and (abs(v) >= 1e4 or abs(v) < 1e-2):
        return f"{v:.1e}"
    return f"{v:.3g}"


def _frame(ax: _Axes, title: str, xlabel: str, ylabel: str, version: str,
           xticks: bool = True) -> list[str]:
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
           f"<!-- nsquad {escape(version)} -->",
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
           f'<rect x="{ax.px0}" y="{ax.py1}" width="{ax.px1 - ax.px0}" height="{ax.py0 - ax.py1}" '
           f'fill="none" stroke="black"/>']
    xt, yt = ax.ticks()
    for x in (xt if xticks else ()):
        px = _f(ax.X(x))
        out.append(f'<line x1="{px}" y1="{ax.py0}" x2="{px}" y2="{ax.py0 + 5}" stroke="black"/>')
        out.append(f'<text x="{px}" y="{ax.py0 + 18}" text-anchor="middle">{_tick_label(x)}</text>')
    for y in yt:
        py = _f(ax.Y(y))
        out.append(f'<line x1="{ax.px0 - 5}" y1="{py}" x2="{ax.px0}" y2="{py}" stroke="black"/>')
        out.append(f'<line x1="{ax.px0}" y1="{py}" x2="{ax.px1}" y2="{py}" stroke="#e5e5e5"/>')
        out.append(f'<text x="{ax.px0 - 8}" y="{py}" text-anchor="end" dominant-baseline="middle">'
                   f'{_tick_label(y, ax.logy)}</text>')
    out.append(f'<text x="{(ax.px0 + ax.px1) / 2:.1f}" y="{HEIGHT - 14}" text-anchor="middle">'
               f'{escape(xlabel)}</text>')
    cy = (ax.py0 + ax.py1) / 2
    out.append(f'<text x="18" y="{cy:.1f}" text-anchor="middle" transform="rotate(-90 18 {cy:.1f})">'
               f'{escape(ylabel)}</text>')
    return out


def _limits(values: np.ndarray, log: bool = False, pad: float = 0.04) -> tuple[float, float]:
    v = values[np.isfinite(values)]
    if log:
        v = v[v > 0]
    if v.size == 0:
        return (1e-3, 1.0) if log else (0.0, 1.0)
    lo, hi = float(v.min()), float(v.max())
    if log:
        return 10.0 ** math.floor(math.log10(lo)), 10.0 ** math.ceil(math.log10(hi))
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    span = hi - lo
    return lo - pad * span, hi + pad * span


def line_chart(series: Sequence[Series], *, title: str = "", xlabel: str = "", ylabel: str = "",
               logy: bool = False, version: str = "") -> str:
    """Polylines sharing one pair of axes, with a legend on the right."""
    if not series:
        raise ValueError("nothing to plot")
    xs = np.concatenate([np.asarray(s.x, dtype=float) for s in series])
    ys = np.concatenate([np.asarray(s.y, dtype=float) for s in series])
    ax = _Axes(_limits(xs, pad=0.0), _limits(ys, log=logy), logy)
    out = _frame(ax, title, xlabel, ylabel, version)
    legend = []
    for k, s in enumerate(series):
        color = s.color or PALETTE[k % len(PALETTE)]
        pts = [(x, y) for x, y in zip(np.asarray(s.x, float), np.asarray(s.y, float))
               if math.isfinite(x) and math.isfinite(y) and (y > 0 or not logy)]
        if not pts:
            continue
        path = " ".join(f"{_f(ax.X(x))},{_f(ax.Y(y))}" for x, y in pts)
        dash = ' stroke-dasharray="6,4"' if s.dashed else ""
        out.append(f'<polyline points="{path}" fill="none" stroke="{color}" '
                   f'stroke-width="{s.width}" stroke-opacity="{s.opacity}"{dash}/>')
        if s.in_legend:
            legend.append((s.label, color, dash))
    for k, (label, color, dash) in enumerate(legend):
        y = MARGIN["top"] + 14 + 18 * k
        x = WIDTH - MARGIN["right"] + 12
        out.append(f'<line x1="{x}" y1="{y}" x2="{x + 22}" y2="{y}" stroke="{color}" stroke-width="2"{dash}/>')
        out.append(f'<text x="{x + 28}" y="{y}" dominant-baseline="middle">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def box_stats(values: Sequence[float]) -> dict:
    """Quartiles, 1.5 IQR whiskers, mean and SD of finite values."""
    v = np.sort(np.asarray(values, dtype=float))
    v = v[np.isfinite(v)]
    if v.size == 0:
        return {"n": 0}
    q1, med, q3 = (float(np.quantile(v, q)) for q in (0.25, 0.5, 0.75))
    iqr = q3 - q1
    lo = float(v[v >= q1 - 1.5 * iqr].min())
    hi = float(v[v <= q3 + 1.5 * iqr].max())
    return {"n": int(v.size), "min": float(v[0]), "whisker_lo": lo, "q1": q1, "median": med,
            "q3": q3, "whisker_hi": hi, "max": float(v[-1]), "mean": float(v.mean()),
            "sd": float(v.std(ddof=1)) if v.size > 1 else 0.0}


def boxplot_chart(groups: Sequence[tuple[str, Sequence[float]]], *, reference: float | None = None,
                  title: str = "", ylabel: str = "", version: str = "") -> str:
    """One box per group; an optional horizontal reference line."""
    if not groups:
        raise ValueError("nothing to plot")
    allv = np.concatenate([np.asarray(v, float) for _, v in groups] +
                          ([np.array([reference])] if reference is not None else []))
    ax = _Axes((0.0, float(len(groups))), _limits(allv))
    out = _frame(ax, title, "", ylabel, version, xticks=False)
    for k, (label, vals) in enumerate(groups):
        s = box_stats(vals)
        cx = ax.X(k + 0.5)
        half = 0.18 * (ax.px1 - ax.px0) / len(groups)
        out.append(f'<text x="{_f(cx)}" y="{ax.py0 + 18}" text-anchor="middle">{escape(label)}</text>')
        if not s["n"]:
            continue
        color = PALETTE[k % len(PALETTE)]
        y = {key: ax.Y(s[key]) for key in ("whisker_lo", "q1", "median", "q3", "whisker_hi")}
        out.append(f'<line x1="{_f(cx)}" y1="{_f(y["whisker_lo"])}" x2="{_f(cx)}" y2="{_f(y["q1"])}" stroke="black"/>')
        out.append(f'<line x1="{_f(cx)}" y1="{_f(y["q3"])}" x2="{_f(cx)}" y2="{_f(y["whisker_hi"])}" stroke="black"/>')
        out.append(f'<rect x="{_f(cx - half)}" y="{_f(y["q3"])}" width="{_f(2 * half)}" '
                   f'height="{_f(y["q1"] - y["q3"])}" fill="{color}" fill-opacity="0.35" stroke="black"/>')
        out.append(f'<line x1="{_f(cx - half)}" y1="{_f(y["median"])}" x2="{_f(cx + half)}" '
                   f'y2="{_f(y["median"])}" stroke="black" stroke-width="2"/>')
        for v in np.asarray(vals, float):
            if math.isfinite(v) and (v < s["whisker_lo"] or v > s["whisker_hi"]):
                out.append(f'<circle cx="{_f(cx)}" cy="{_f(ax.Y(v))}" r="2.5" fill="none" stroke="black"/>')
    if reference is not None:
        ry = _f(ax.Y(reference))
        out.append(f'<line x1="{ax.px0}" y1="{ry}" x2="{ax.px1}" y2="{ry}" stroke="#1f77b4" stroke-width="2"/>')
        out.append(f'<text x="{ax.px1 + 8}" y="{ry}" dominant-baseline="middle">reference</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def ranked_chart(items: Sequence[np.ndarray], *, scatter: bool = False, title: str = "",
                 xlabel: str = "", ylabel: str = "", xs: np.ndarray | None = None,
                 version: str = "") -> str:
    """Paths (or 2-D points) coloured by rank, earliest darkest.

    With ``scatter`` each item is an (x, y) pair; otherwise each item is a
    curve over ``xs`` (default 0..len-1).
    """
    if len(items) == 0:
        raise ValueError("nothing to plot")
    arr = [np.asarray(it, dtype=float) for it in items]
    n = len(arr)
    if scatter:
        pts = np.array([a[:2] for a in arr])
        ax = _Axes(_limits(pts[:, 0]), _limits(pts[:, 1]))
    else:
        grid = np.arange(len(arr[0]), dtype=float) if xs is None else np.asarray(xs, float)
        ax = _Axes(_limits(grid, pad=0.0), _limits(np.concatenate(arr)))
    out = _frame(ax, title, xlabel, ylabel, version)
    for k, a in enumerate(arr):
        color = _ramp(k / max(n - 1, 1))
        if scatter:
            out.append(f'<circle cx="{_f(ax.X(a[0]))}" cy="{_f(ax.Y(a[1]))}" r="3" fill="{color}" '
                       f'fill-opacity="0.8"/>')
        else:
            path = " ".join(f"{_f(ax.X(x))},{_f(ax.Y(y))}" for x, y in zip(grid, a))
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1"/>')
    # colour bar for the rank
    x = WIDTH - MARGIN["right"] + 20
    for j in range(20):
        out.append(f'<rect x="{x}" y="{MARGIN["top"] + 10 * j}" width="14" height="10" fill="{_ramp(j / 19)}"/>')
    out.append(f'<text x="{x + 20}" y="{MARGIN["top"] + 8}">first</text>')
    out.append(f'<text x="{x + 20}" y="{MARGIN["top"] + 198}">last</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
