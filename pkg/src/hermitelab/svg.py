"""Minimal log-log SVG plot: data with error bars, fitted line, predicted line."""

from __future__ import annotations

import math

WIDTH, HEIGHT, MARGIN = 640, 440, 64


def _ticks(lo: float, hi: float) -> list[int]:
    return list(range(math.floor(lo), math.ceil(hi) + 1))


def loglog_plot(T, var, se, slope: float, intercept: float, predicted_slope: float, fit_T,
                title: str = "") -> str:
    """Return SVG text; lines are drawn as ``exp(intercept) T**slope`` in log10 axes."""
    lx = [math.log10(t) for t in T]
    lo_y = [math.log10(max(v - 2 * s, v * 1e-3)) for v, s in zip(var, se)]
    hi_y = [math.log10(v + 2 * s) for v, s in zip(var, se)]
    x0, x1 = min(lx) - 0.1, max(lx) + 0.1
    y0, y1 = min(lo_y) - 0.2, max(hi_y) + 0.2

    def px(x):
        return MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2 * MARGIN)

    def py(y):
        return HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2 * MARGIN)

    # Predicted line is anchored to the fit at the centre of the fitted horizons.
    xc = sum(math.log(t) for t in fit_T) / len(fit_T)
    yc = intercept + slope * xc

    def line(s, b, colour, dash=""):
        a = [(x, (b + s * x * math.log(10)) / math.log(10)) for x in (x0, x1)]
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in a)
        extra = f' stroke-dasharray="{dash}"' if dash else ""
        return f'<polyline points="{pts}" fill="none" stroke="{colour}" stroke-width="1.5"{extra}/>'

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
           f'<defs><clipPath id="plot"><rect x="{MARGIN}" y="{MARGIN}" width="{WIDTH - 2 * MARGIN}" '
           f'height="{HEIGHT - 2 * MARGIN}"/></clipPath></defs>',
           f'<rect x="{MARGIN}" y="{MARGIN}" width="{WIDTH - 2 * MARGIN}" height="{HEIGHT - 2 * MARGIN}" '
           'fill="none" stroke="black"/>']
    for k in _ticks(x0, x1):
        if x0 <= k <= x1:
            out.append(f'<text x="{px(k):.2f}" y="{HEIGHT - MARGIN + 18}" text-anchor="middle">1e{k}</text>')
    for k in _ticks(y0, y1):
        if y0 <= k <= y1:
            out.append(f'<text x="{MARGIN - 6}" y="{py(k) + 4:.2f}" text-anchor="end">1e{k}</text>')
    out.append('<g clip-path="url(#plot)">')
    out.append(line(slope, intercept, "#1f77b4"))
    out.append(line(predicted_slope, yc - predicted_slope * xc, "#d62728", "6,4"))
    for x, v, a, b in zip(lx, var, lo_y, hi_y):
        out.append(f'<line x1="{px(x):.2f}" y1="{py(a):.2f}" x2="{px(x):.2f}" y2="{py(b):.2f}" stroke="black"/>')
        out.append(f'<circle cx="{px(x):.2f}" cy="{py(math.log10(v)):.2f}" r="3"/>')
    out.append("</g>")
    out.append(f'<text x="{WIDTH / 2}" y="{HEIGHT - 16}" text-anchor="middle">T</text>')
    out.append(f'<text x="16" y="{HEIGHT / 2}" transform="rotate(-90 16 {HEIGHT / 2})" '
               'text-anchor="middle">Var S_T(1)</text>')
    legend = f"fit {slope:.3f} (solid), predicted {predicted_slope:.3f} (dashed)"
    out.append(f'<text x="{MARGIN}" y="{MARGIN - 24}">{title}</text>')
    out.append(f'<text x="{MARGIN}" y="{MARGIN - 8}">{legend}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
