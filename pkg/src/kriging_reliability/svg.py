"""Minimal, byte-deterministic SVG line/marker panels."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .errors import InputError

__all__ = ["emit_svg_panel", "render_svg_panel"]

WIDTH, HEIGHT = 480, 360
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 40, 50
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _tick_label(v: float, log: bool) -> str:
    return f"{math.exp(v):.3g}" if log else f"{v:.3g}"


def _normalize(data) -> tuple[dict[str, list[tuple[float, float]]], tuple | None, str | None]:
    """Return named series, an optional fit line ``(slope, intercept)`` and a band kind."""
    from .gp import PredictionBand
    from .reliability import ReliabilityReport

    if isinstance(data, ReliabilityReport):
        pts = [(float(n), float(e)) for n, e in data.rows]
        fit = (data.slope, data.intercept) if data.slope is not None else None
        return {"E": pts}, fit, None
    if isinstance(data, PredictionBand):
        if data.eval_points.shape[1] != 1:
            raise InputError("only one-dimensional bands can be drawn")
        order = np.argsort(data.eval_points[:, 0], kind="stable")
        x = data.eval_points[order, 0]
        return {
            "mean": list(zip(x, data.means[order])),
            "lo": list(zip(x, data.lower[order])),
            "hi": list(zip(x, data.upper[order])),
        }, None, "band"
    if isinstance(data, dict):
        return {str(k): [(float(a), float(b)) for a, b in v] for k, v in data.items()}, None, None
    return {"": [(float(a), float(b)) for a, b in data]}, None, None


def render_svg_panel(data, *, title: str = "", xlabel: str = "n", ylabel: str = "E",
                     log: bool = False) -> str:
    """SVG text for a panel.

    ``data`` is a :class:`ReliabilityReport` (points, plus the fitted line on
    log axes), a one-dimensional :class:`PredictionBand` (mean with band
    edges), a mapping of series names to ``(x, y)`` pairs, or a single
    sequence of pairs. With ``log`` both axes are logarithmic and nonpositive
    points are skipped.
    """
    series, fit, kind = _normalize(data)
    if not any(series.values()):
        raise InputError("nothing to plot")
    tx = (lambda v: math.log(v)) if log else (lambda v: v)
    clean = {}
    for name, pts in series.items():
        keep = [(tx(x), tx(y)) for x, y in pts
                if math.isfinite(x) and math.isfinite(y) and (not log or (x > 0 and y > 0))]
        clean[name] = keep
    allpts = [p for pts in clean.values() for p in pts]
    if not allpts:
        raise InputError("no finite points to plot")
    xs = [p[0] for p in allpts]
    ys = [p[1] for p in allpts]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if fit is not None and log:
        ys_fit = [fit[1] + fit[0] * x0, fit[1] + fit[0] * x1]
        y0, y1 = min(y0, *ys_fit), max(y1, *ys_fit)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def px(v):
        return LEFT + (v - x0) / (x1 - x0) * pw

    def py(v):
        return TOP + ph - (v - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="20" text-anchor="middle" font-size="13">{_escape(title)}</text>',
        f'<line class="axis" x1="{LEFT}" y1="{TOP + ph}" x2="{LEFT + pw}" y2="{TOP + ph}" stroke="black"/>',
        f'<line class="axis" x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{TOP + ph}" stroke="black"/>',
    ]
    for k in range(5):
        vx = x0 + (x1 - x0) * k / 4
        vy = y0 + (y1 - y0) * k / 4
        out.append(f'<line x1="{_fmt(px(vx))}" y1="{TOP + ph}" x2="{_fmt(px(vx))}" y2="{TOP + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{_fmt(px(vx))}" y="{TOP + ph + 16}" text-anchor="middle">{_tick_label(vx, log)}</text>')
        out.append(f'<line x1="{LEFT - 4}" y1="{_fmt(py(vy))}" x2="{LEFT}" y2="{_fmt(py(vy))}" stroke="black"/>')
        out.append(f'<text x="{LEFT - 6}" y="{_fmt(py(vy) + 4)}" text-anchor="end">{_tick_label(vy, log)}</text>')
    scale = " (log)" if log else ""
    out.append(f'<text x="{LEFT + pw / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle">{_escape(xlabel + scale)}</text>')
    out.append(f'<text x="16" y="{TOP + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {TOP + ph / 2:.1f})">{_escape(ylabel + scale)}</text>')

    for i, (name, pts) in enumerate(clean.items()):
        color = COLORS[i % len(COLORS)]
        if not pts:
            continue
        path = " ".join(f"{_fmt(px(a))},{_fmt(py(b))}" for a, b in pts)
        if kind == "band":
            dash = "" if name == "mean" else ' stroke-dasharray="4 3"'
            out.append(f'<polyline class="series" points="{path}" fill="none" stroke="{color}"{dash}/>')
            continue
        if len(pts) > 1:
            out.append(f'<polyline class="series" points="{path}" fill="none" stroke="{color}" stroke-width="0.8"/>')
        for a, b in pts:
            out.append(f'<circle class="marker" cx="{_fmt(px(a))}" cy="{_fmt(py(b))}" r="3" fill="{color}"/>')
        if name:
            out.append(f'<text x="{LEFT + pw - 4}" y="{TOP + 14 + 14 * i}" text-anchor="end" '
                       f'fill="{color}">{_escape(name)}</text>')
    if fit is not None and log:
        slope, intercept = fit
        a, b = (x0, intercept + slope * x0), (x1, intercept + slope * x1)
        out.append(f'<line class="fit" x1="{_fmt(px(a[0]))}" y1="{_fmt(py(a[1]))}" '
                   f'x2="{_fmt(px(b[0]))}" y2="{_fmt(py(b[1]))}" stroke="black" stroke-dasharray="6 4"/>')
        out.append(f'<text x="{LEFT + 8}" y="{TOP + 14}">slope {slope:.3f}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def emit_svg_panel(data, path, **kwargs) -> Path:
    """Write :func:`render_svg_panel` output to ``path``."""
    path = Path(path)
    path.write_text(render_svg_panel(data, **kwargs))
    return path
