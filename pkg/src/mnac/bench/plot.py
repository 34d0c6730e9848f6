"""Plot emission from sweep CSVs: gnuplot data + script, or a standalone SVG.

Output depends only on the CSV contents, so re-emitting is byte-identical.
"""

from __future__ import annotations

import os
from collections import OrderedDict

from .sweeps import read_csv

AXIS_LABELS = {"snr_db": "SNR (dB)", "eta1": "first-stage recovery rate (%)",
               "k": "active devices k"}
COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def _series(rows: list[dict]):
    """(scheme -> [(x, total)], theory [(x, cost)]), rows without a total are skipped."""
    series: OrderedDict[str, list] = OrderedDict()
    theory: dict[float, float] = {}
    for r in rows:
        x = float(r["value"])
        if r.get("theory_min_cost"):
            theory.setdefault(x, float(r["theory_min_cost"]))
        if r.get("total"):
            series.setdefault(r["scheme"], []).append((x, float(r["total"])))
    for pts in series.values():
        pts.sort()
    return series, sorted(theory.items())


def emit_gnuplot(rows: list[dict], stem: str, title: str = "") -> tuple[str, str]:
    series, theory = _series(rows)
    axis = rows[0]["axis"] if rows else "value"
    dat, gp = stem + ".dat", stem + ".gp"
    blocks = [("theory", theory)] + list(series.items())
    with open(dat, "w") as fh:
        for i, (name, pts) in enumerate(blocks):
            if i:
                fh.write("\n\n")
            fh.write(f"# {name}\n")
            for x, y in pts:
                fh.write(f"{x:g} {y:.3f}\n")
    with open(gp, "w") as fh:
        fh.write("set terminal pngcairo size 800,560\n")
        fh.write(f"set output '{os.path.basename(stem)}.png'\n")
        if title:
            fh.write(f"set title '{title}'\n")
        fh.write(f"set xlabel '{AXIS_LABELS.get(axis, axis)}'\n")
        fh.write("set ylabel 'channel-uses'\nset key top right\nset grid\n")
        name = os.path.basename(dat)
        plots = [f"'{name}' index {i} with linespoints title '{label}'"
                 for i, (label, pts) in enumerate(blocks) if pts]
        if plots:
            fh.write("plot " + ", \\\n     ".join(plots) + "\n")
        else:
            # empty sweep: draw the axes only
            fh.write("set xrange [0:1]\nset yrange [0:1]\nplot NaN notitle\n")
    return dat, gp


def emit_svg(rows: list[dict], path: str, title: str = "", width: int = 640,
             height: int = 440) -> str:
    series, theory = _series(rows)
    axis = rows[0]["axis"] if rows else "value"
    left, right, top, bottom = 70, 150, 30, 50
    pw, ph = width - left - right, height - top - bottom
    pts_all = [p for pts in series.values() for p in pts] + theory
    if pts_all:
        xs = [p[0] for p in pts_all]
        ys = [p[1] for p in pts_all]
        x0, x1 = min(xs), max(xs)
        y0, y1 = 0.0, max(ys) * 1.1
    else:
        x0, x1, y0, y1 = 0.0, 1.0, 0.0, 1.0
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1

    def sx(x):
        return left + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return top + ph - (y - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="12">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
           f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>']
    for i in range(5):
        xv = x0 + (x1 - x0) * i / 4
        yv = y0 + (y1 - y0) * i / 4
        out.append(f'<text x="{sx(xv):.1f}" y="{top + ph + 18}" text-anchor="middle">{xv:g}</text>')
        out.append(f'<text x="{left - 6}" y="{sy(yv) + 4:.1f}" text-anchor="end">{yv:.0f}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">'
               f'{AXIS_LABELS.get(axis, axis)}</text>')
    out.append(f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + ph / 2:.1f})">channel-uses</text>')
    if title:
        out.append(f'<text x="{left + pw / 2:.1f}" y="18" text-anchor="middle">{title}</text>')

    lines = [("theory", theory, "#000000", "4,3")]
    lines += [(name, pts, COLORS[i % len(COLORS)], "") for i, (name, pts) in enumerate(series.items())]
    for i, (name, pts, color, dash) in enumerate(lines):
        if pts:
            d = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in pts)
            extra = f' stroke-dasharray="{dash}"' if dash else ""
            out.append(f'<polyline points="{d}" fill="none" stroke="{color}"{extra}/>')
            for x, y in pts:
                out.append(f'<circle cx="{sx(x):.1f}" cy="{sy(y):.1f}" r="3" fill="{color}"/>')
        ly = top + 14 + 16 * i
        out.append(f'<line x1="{left + pw + 12}" y1="{ly - 4}" x2="{left + pw + 32}" y2="{ly - 4}" '
                   f'stroke="{color}"/>')
        out.append(f'<text x="{left + pw + 38}" y="{ly}">{name}</text>')
    out.append("</svg>\n")
    with open(path, "w") as fh:
        fh.write("\n".join(out))
    return path


def emit_plot(csv_path: str, out_stem: str | None = None, svg: bool = False, title: str = ""):
    """Plot files for one sweep CSV; returns the written paths."""
    rows = read_csv(csv_path)
    stem = out_stem or os.path.splitext(csv_path)[0]
    if svg:
        return (emit_svg(rows, stem + ".svg", title),)
    return emit_gnuplot(rows, stem, title)
