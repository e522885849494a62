"""Log-log SVG figures, one per dimension, written as plain text."""
from collections import defaultdict
import math
import os
import tempfile
from xml.sax.saxutils import escape

from .experiment import read_results

WIDTH, HEIGHT = 760, 520
LEFT, RIGHT, TOP, BOTTOM = 80, 210, 40, 60
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
SERIES = (
    ("d1_empirical", "D1 empirical", "", "circle"),
    ("d2_empirical", "D2 empirical", "", "square"),
    ("d1_theory", "D1 high-rate (leading term)", "6,3", "none"),
    ("d2_theory", "D2 lower bound", "2,3", "none"),
)


def _collect(rows):
    """``{d: {sigma_n: {series: [(k, value), ...]}}}``"""
    out = defaultdict(lambda: defaultdict(lambda: defaultdict(list)))
    for r in rows:
        tag = "d1" if r.estimator == "centralized_d1" else "d2"
        out[r.d][r.sigma_n][f"{tag}_empirical"].append((r.k, r.mean))
        if r.theory_value is not None:
            out[r.d][r.sigma_n][f"{tag}_theory"].append((r.k, r.theory_value))
    return out


def _decades(lo, hi):
    return list(range(math.floor(math.log10(lo)), math.ceil(math.log10(hi)) + 1))


def _svg_for_dimension(d, by_sigma):
    pts = [(k, v) for s in by_sigma.values() for ser in s.values() for k, v in ser if v > 0]
    kx = [k for k, _ in pts]
    vy = [v for _, v in pts]
    xd = _decades(min(kx), max(kx) if max(kx) > min(kx) else min(kx) * 10)
    yd = _decades(min(vy), max(vy) if max(vy) > min(vy) else min(vy) * 10)
    x0, x1 = xd[0], max(xd[-1], xd[0] + 1)
    y0, y1 = yd[0], max(yd[-1], yd[0] + 1)
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def px(k):
        return LEFT + (math.log10(k) - x0) / (x1 - x0) * pw

    def py(v):
        return TOP + ph - (math.log10(v) - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" data-d="{d}">',
        f'<title>d = {d}</title>',
        f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#000"/>',
    ]
    for e in range(x0, x1 + 1):
        x = px(10.0**e)
        out.append(f'<line x1="{x:.2f}" y1="{TOP}" x2="{x:.2f}" y2="{TOP + ph}" stroke="#ddd"/>')
        out.append(f'<text x="{x:.2f}" y="{TOP + ph + 18}" font-size="12" text-anchor="middle">1e{e}</text>')
    for e in range(y0, y1 + 1):
        y = py(10.0**e)
        out.append(f'<line x1="{LEFT}" y1="{y:.2f}" x2="{LEFT + pw}" y2="{y:.2f}" stroke="#ddd"/>')
        out.append(f'<text x="{LEFT - 6}" y="{y + 4:.2f}" font-size="12" text-anchor="end">1e{e}</text>')
    out.append(f'<text x="{LEFT + pw / 2}" y="{HEIGHT - 15}" font-size="14" text-anchor="middle">k</text>')
    out.append(
        f'<text x="20" y="{TOP + ph / 2}" font-size="14" text-anchor="middle" '
        f'transform="rotate(-90 20 {TOP + ph / 2})">distortion</text>'
    )
    out.append(f'<text x="{LEFT + pw / 2}" y="24" font-size="15" text-anchor="middle">d = {d}</text>')

    legend_y = TOP
    for ci, sn in enumerate(sorted(by_sigma)):
        color = COLORS[ci % len(COLORS)]
        for key, label, dash, marker in SERIES:
            series = sorted(by_sigma[sn].get(key, []))
            if not series:
                continue
            attrs = f'data-series="{key}" data-sigma-n="{sn!r}"'
            poly = " ".join(f"{px(k):.2f},{py(v):.2f}" for k, v in series if v > 0)
            dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
            out.append(f'<g class="series" {attrs}>')
            out.append(f'<polyline points="{poly}" fill="none" stroke="{color}" stroke-width="1.5"{dash_attr}/>')
            for k, v in series:
                if not v > 0:
                    continue
                data = f'data-k="{k}" data-value="{v!r}"'
                if marker == "circle":
                    out.append(f'<circle cx="{px(k):.2f}" cy="{py(v):.2f}" r="3" fill="{color}" {data}/>')
                elif marker == "square":
                    out.append(
                        f'<rect x="{px(k) - 3:.2f}" y="{py(v) - 3:.2f}" width="6" height="6" '
                        f'fill="none" stroke="{color}" {data}/>'
                    )
                else:
                    out.append(f'<circle cx="{px(k):.2f}" cy="{py(v):.2f}" r="1.2" fill="{color}" {data}/>')
            out.append("</g>")
            lx = WIDTH - RIGHT + 15
            out.append(f'<line x1="{lx}" y1="{legend_y + 6}" x2="{lx + 22}" y2="{legend_y + 6}" stroke="{color}"{dash_attr}/>')
            text = escape(f"{label}, sigma_N={sn:g}")
            out.append(f'<text x="{lx + 28}" y="{legend_y + 10}" font-size="11">{text}</text>')
            legend_y += 16
        legend_y += 6
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_plots(csv_path, out_dir):
    """One ``fig_d{d}.svg`` per dimension in the results CSV; returns the paths."""
    rows = read_results(csv_path)
    if not rows:
        raise ValueError(f"{csv_path}: no result rows to plot")
    grouped = _collect(rows)
    svgs = {d: _svg_for_dimension(d, grouped[d]) for d in sorted(grouped)}
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for d, text in svgs.items():
        path = os.path.join(out_dir, f"fig_d{d}.svg")
        fd, tmp = tempfile.mkstemp(prefix=".tmp-", suffix=".svg", dir=out_dir)
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
        paths.append(path)
    return paths
