"""Self-contained SVG line charts from emitted CSV files."""
from __future__ import annotations

import csv
import io
import math
from html import escape

from .errors import PlotError

WIDTH, HEIGHT = 640, 420
MARGIN = (70, 20, 30, 50)  # left, right, top, bottom
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def read_columns(text: str) -> dict[str, list[float]]:
    rows = list(csv.reader(io.StringIO(text)))
    if len(rows) < 2:
        raise PlotError("no data")
    header = [h.strip() for h in rows[0]]
    cols: dict[str, list[float]] = {h: [] for h in header}
    for row in rows[1:]:
        if not row:
            continue
        for h, cell in zip(header, row):
            try:
                cols[h].append(float(cell))
            except ValueError:
                cols[h].append(math.nan)
    if not any(cols.values()):
        raise PlotError("no data")
    return cols


def _ticks(lo: float, hi: float, log: bool) -> list[float]:
    if log:
        return [10.0**k for k in range(math.floor(lo), math.ceil(hi) + 1)
                if lo - 1e-9 <= k <= hi + 1e-9]
    if hi <= lo:
        return [lo]
    step = 10 ** math.floor(math.log10((hi - lo) / 4))
    for mult in (1, 2, 5, 10):
        if (hi - lo) / (step * mult) <= 6:
            step *= mult
            break
    first = math.ceil(lo / step) * step
    return [first + k * step for k in range(int((hi - first) / step + 1e-9) + 1)]


def svg_chart(x: list[float], series: dict[str, list[float]], *, loglog: bool = False,
              title: str = "", xlabel: str = "t") -> str:
    """Polyline chart; on log axes non-positive points are dropped."""
    def keep(xv, yv):
        if not (math.isfinite(xv) and math.isfinite(yv)):
            return False
        return not loglog or (xv > 0 and yv > 0)

    tx = (lambda v: math.log10(v)) if loglog else (lambda v: v)
    pts = {name: [(tx(a), tx(b)) for a, b in zip(x, ys) if keep(a, b)] for name, ys in series.items()}
    allp = [p for ps in pts.values() for p in ps]
    if not allp:
        raise PlotError("no data")
    x0, x1 = min(p[0] for p in allp), max(p[0] for p in allp)
    y0, y1 = min(p[1] for p in allp), max(p[1] for p in allp)
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1
    left, right, top, bottom = MARGIN
    pw, ph = WIDTH - left - right, HEIGHT - top - bottom

    def sx(v):
        return left + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return top + ph - (v - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>']
    fmt = (lambda v: f"1e{round(v)}") if loglog else (lambda v: f"{v:g}")
    for v in _ticks(x0, x1, loglog):
        v = math.log10(v) if loglog else v
        out.append(f'<line x1="{sx(v):.2f}" y1="{top + ph}" x2="{sx(v):.2f}" y2="{top + ph + 4}" stroke="#333"/>')
        out.append(f'<text x="{sx(v):.2f}" y="{top + ph + 16}" text-anchor="middle">{fmt(v)}</text>')
    for v in _ticks(y0, y1, loglog):
        v = math.log10(v) if loglog else v
        out.append(f'<line x1="{left - 4}" y1="{sy(v):.2f}" x2="{left}" y2="{sy(v):.2f}" stroke="#333"/>')
        out.append(f'<text x="{left - 6}" y="{sy(v) + 4:.2f}" text-anchor="end">{fmt(v)}</text>')
    for k, (name, ps) in enumerate(pts.items()):
        if not ps:
            continue
        color = COLORS[k % len(COLORS)]
        coords = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in ps)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        out.append(f'<text x="{left + pw - 6}" y="{top + 14 + 14 * k}" text-anchor="end" '
                   f'fill="{color}">{escape(name)}</text>')
    if title:
        out.append(f'<text x="{left + pw / 2}" y="{top - 8}" text-anchor="middle">{escape(title)}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{HEIGHT - 8}" text-anchor="middle">{escape(xlabel)}'
               f'{" (log-log)" if loglog else ""}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot_csv(text: str, columns: list[str] | None = None, *, x: str | None = None,
             loglog: bool = True, title: str = "") -> str:
    cols = read_columns(text)
    names = list(cols)
    x = x or names[0]
    if x not in cols:
        raise PlotError(f"no column {x!r}")
    columns = columns or [n for n in names if n != x]
    missing = [c for c in columns if c not in cols]
    if missing:
        raise PlotError(f"unknown columns {missing}")
    return svg_chart(cols[x], {c: cols[c] for c in columns}, loglog=loglog, title=title, xlabel=x)
