"""Minimal deterministic SVG line charts.

Charts are self-contained (no display server, no external assets) and embed
the plotted numbers in a trailing comment block so every figure doubles as a
data file. Output is byte-reproducible for identical inputs.
"""
from __future__ import annotations

import math

PALETTE = ("#1f6fb4", "#d95f02", "#2ca25f", "#7f3b8f", "#b2182b", "#636363")

WIDTH, HEIGHT = 640, 400
MARGIN_LEFT, MARGIN_RIGHT = 70, 20
MARGIN_TOP, MARGIN_BOTTOM = 40, 50


class SvgError(Exception):
    pass


def _fmt(v: float) -> str:
    return f"{v:.3f}"


def _bounds(series):
    xs = [x for _, xv, _ in series for x in xv]
    ys = [y for _, _, yv in series for y in yv]
    if not xs:
        raise SvgError("no data points to plot")
    if not all(math.isfinite(v) for v in xs + ys):
        raise SvgError("non-finite value in chart data")
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    return x_lo, x_hi, y_lo, y_hi


def _ticks(lo: float, hi: float, count: int = 5):
    return [lo + (hi - lo) * i / (count - 1) for i in range(count)]


def line_chart(path, series, title: str, x_label: str, y_label: str) -> None:
    """Write a line chart; `series` is a list of (label, xs, ys) triples."""
    series = [(label, list(xs), list(ys)) for label, xs, ys in series]
    for label, xs, ys in series:
        if len(xs) != len(ys):
            raise SvgError(f"series '{label}' has {len(xs)} x but {len(ys)} y values")
    x_lo, x_hi, y_lo, y_hi = _bounds(series)
    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def px(x: float) -> float:
        return MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y: float) -> float:
        return MARGIN_TOP + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
        f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH // 2}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="15">{title}</text>',
        f'<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" '
        f'height="{plot_h}" fill="none" stroke="#888"/>',
    ]
    for tx in _ticks(x_lo, x_hi):
        x = px(tx)
        out.append(f'<line x1="{_fmt(x)}" y1="{MARGIN_TOP + plot_h}" '
                   f'x2="{_fmt(x)}" y2="{MARGIN_TOP + plot_h + 5}" stroke="#444"/>')
        out.append(f'<text x="{_fmt(x)}" y="{MARGIN_TOP + plot_h + 20}" '
                   f'text-anchor="middle" font-family="sans-serif" '
                   f'font-size="11">{tx:.4g}</text>')
    for ty in _ticks(y_lo, y_hi):
        y = py(ty)
        out.append(f'<line x1="{MARGIN_LEFT - 5}" y1="{_fmt(y)}" '
                   f'x2="{MARGIN_LEFT}" y2="{_fmt(y)}" stroke="#444"/>')
        out.append(f'<text x="{MARGIN_LEFT - 8}" y="{_fmt(y + 4)}" '
                   f'text-anchor="end" font-family="sans-serif" '
                   f'font-size="11">{ty:.4g}</text>')
    out.append(f'<text x="{MARGIN_LEFT + plot_w // 2}" y="{HEIGHT - 12}" '
               f'text-anchor="middle" font-family="sans-serif" '
               f'font-size="12">{x_label}</text>')
    out.append(f'<text x="18" y="{MARGIN_TOP + plot_h // 2}" '
               f'text-anchor="middle" font-family="sans-serif" font-size="12" '
               f'transform="rotate(-90 18 {MARGIN_TOP + plot_h // 2})">'
               f'{y_label}</text>')
    for i, (label, xs, ys) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        points = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in zip(xs, ys))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                   f'points="{points}"/>')
        ly = MARGIN_TOP + 14 + 16 * i
        out.append(f'<line x1="{WIDTH - 150}" y1="{ly - 4}" x2="{WIDTH - 125}" '
                   f'y2="{ly - 4}" stroke="{color}" stroke-width="1.5"/>')
        out.append(f'<text x="{WIDTH - 120}" y="{ly}" font-family="sans-serif" '
                   f'font-size="11">{label}</text>')
    out.append("<!-- data")
    out.append("series,x,y")
    for label, xs, ys in series:
        for x, y in zip(xs, ys):
            out.append(f"{label},{x!r},{y!r}")
    out.append("-->")
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


def read_chart_data(path) -> list[tuple[str, float, float]]:
    """Parse the embedded data block back out of a chart file."""
    rows = []
    with open(path) as fh:
        text = fh.read()
    start = text.find("<!-- data")
    end = text.find("-->", start)
    if start < 0 or end < 0:
        raise SvgError(f"{path} has no embedded data block")
    lines = text[start:end].strip().splitlines()[2:]
    for line in lines:
        label, x, y = line.rsplit(",", 2)
        rows.append((label, float(x), float(y)))
    return rows
