"""Tiny dependency-free SVG line charts.

Output is a pure function of the input series, so plots regenerate
byte-for-byte from CSV rows.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
W, H = 640, 400
ML, MR, MT, MB = 70, 170, 40, 50


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-12 * step:
        out.append(round(v, 12))
        v += step
    return out


def line_chart(series: dict[str, list[tuple[float, float]]], *, title: str = "",
               xlabel: str = "", ylabel: str = "") -> str:
    """Render named ``(x, y)`` series; non-finite points are drawn as open markers at the top edge."""
    finite = [(x, y) for pts in series.values() for x, y in pts if math.isfinite(y)]
    xs = [x for pts in series.values() for x, _ in pts]
    if not xs:
        xs = [0.0, 1.0]
    xlo, xhi = min(xs), max(xs)
    if xhi == xlo:
        xlo, xhi = xlo - 1, xhi + 1
    ylo = min([y for _, y in finite], default=0.0)
    yhi = max([y for _, y in finite], default=1.0)
    ylo = min(ylo, 0.0)
    if yhi <= ylo:
        yhi = ylo + 1.0
    yhi += 0.05 * (yhi - ylo)
    pw, ph = W - ML - MR, H - MT - MB

    def px(x):
        return ML + (x - xlo) / (xhi - xlo) * pw

    def py(y):
        return MT + ph - (y - ylo) / (yhi - ylo) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
           f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<text x="{W / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<rect x="{ML}" y="{MT}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>']
    for t in _ticks(ylo, yhi):
        y = py(t)
        out.append(f'<line x1="{ML}" y1="{_fmt(y)}" x2="{ML + pw}" y2="{_fmt(y)}" stroke="#ddd"/>')
        out.append(f'<text x="{ML - 6}" y="{_fmt(y + 4)}" text-anchor="end">{t:g}</text>')
    for t in _ticks(xlo, xhi):
        x = px(t)
        out.append(f'<text x="{_fmt(x)}" y="{MT + ph + 18}" text-anchor="middle">{t:g}</text>')
    out.append(f'<text x="{ML + pw / 2:.1f}" y="{H - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{MT + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {MT + ph / 2:.1f})">{escape(ylabel)}</text>')
    for k, (name, pts) in enumerate(series.items()):
        color = _COLORS[k % len(_COLORS)]
        seg: list[str] = []
        segments = []
        for x, y in pts:
            if math.isfinite(y):
                seg.append(f"{_fmt(px(x))},{_fmt(py(y))}")
            else:
                if seg:
                    segments.append(seg)
                seg = []
                out.append(f'<circle cx="{_fmt(px(x))}" cy="{MT + 4}" r="4" fill="none" stroke="{color}"/>')
        if seg:
            segments.append(seg)
        for s in segments:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{" ".join(s)}"/>')
            for p in s:
                cx, cy = p.split(",")
                out.append(f'<circle cx="{cx}" cy="{cy}" r="3" fill="{color}"/>')
        ly = MT + 14 + 18 * k
        out.append(f'<line x1="{ML + pw + 12}" y1="{ly - 4}" x2="{ML + pw + 32}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{ML + pw + 38}" y="{ly}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
