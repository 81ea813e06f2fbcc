"""Minimal standalone SVG line plots of recorded traces.

Output depends only on the data: coordinates are written with a fixed number
of decimals and no timestamps or ids are embedded, so plotting the same
trace twice gives byte-identical files.
"""
from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .sim import read_csv

WIDTH, HEIGHT = 640, 400
MARGIN = dict(left=70, right=20, top=36, bottom=48)
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


def _ticks(lo, hi, count=5):
    if hi <= lo:
        return [lo]
    return list(np.linspace(lo, hi, count))


def _fmt(v):
    return f"{v:.3g}"


def line_plot(t, series: dict, title: str, ylabel: str, refs=(), xlabel: str = "t [s]") -> str:
    """Render named ``series`` (arrays over ``t``) and horizontal reference lines."""
    t = np.asarray(t, dtype=float)
    ys = [np.asarray(v, dtype=float) for v in series.values()]
    finite = [y[np.isfinite(y)] for y in ys] + [np.asarray(refs, dtype=float)]
    allv = np.concatenate([f for f in finite if f.size]) if any(f.size for f in finite) else np.zeros(1)
    ylo, yhi = float(allv.min()), float(allv.max())
    if yhi - ylo < 1e-12:
        ylo, yhi = ylo - 1.0, yhi + 1.0
    pad = 0.05 * (yhi - ylo)
    ylo, yhi = ylo - pad, yhi + pad
    tlo, thi = (float(t.min()), float(t.max())) if t.size else (0.0, 1.0)
    if thi <= tlo:
        thi = tlo + 1.0
    x0, x1 = MARGIN["left"], WIDTH - MARGIN["right"]
    y0, y1 = HEIGHT - MARGIN["bottom"], MARGIN["top"]

    def px(tv):
        return x0 + (tv - tlo) / (thi - tlo) * (x1 - x0)

    def py(yv):
        return y0 - (yv - ylo) / (yhi - ylo) * (y0 - y1)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
    ]
    for tv in _ticks(tlo, thi):
        X = px(tv)
        out.append(f'<line x1="{X:.2f}" y1="{y0}" x2="{X:.2f}" y2="{y0 + 5}" stroke="black"/>')
        out.append(f'<text x="{X:.2f}" y="{y0 + 18}" text-anchor="middle">{_fmt(tv)}</text>')
    for yv in _ticks(ylo, yhi):
        Y = py(yv)
        out.append(f'<line x1="{x0 - 5}" y1="{Y:.2f}" x2="{x0}" y2="{Y:.2f}" stroke="black"/>')
        out.append(f'<text x="{x0 - 8}" y="{Y + 4:.2f}" text-anchor="end">{_fmt(yv)}</text>')
    out.append(f'<text x="{(x0 + x1) / 2:.1f}" y="{HEIGHT - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{(y0 + y1) / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {(y0 + y1) / 2:.1f})">{escape(ylabel)}</text>')
    for r in refs:
        Y = py(float(r))
        out.append(f'<line class="ref" x1="{x0}" y1="{Y:.2f}" x2="{x1}" y2="{Y:.2f}" '
                   f'stroke="gray" stroke-dasharray="6 4" data-value="{float(r):g}"/>')
    for k, (name, y) in enumerate(zip(series, ys)):
        color = COLORS[k % len(COLORS)]
        ok = np.isfinite(y)
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(t[ok], y[ok]))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        ly = MARGIN["top"] + 14 * k + 10
        out.append(f'<line x1="{x1 - 90}" y1="{ly}" x2="{x1 - 70}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{x1 - 65}" y="{ly + 4}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def plot_trace(trace_csv, out_dir, weights_csv=None, refs=()) -> list[Path]:
    """Write state, control, a4 and (if available) weight plots for a trace CSV.

    Returns the written paths.  ``refs`` are the ideal weight values drawn as
    dashed lines on the weights plot.
    """
    header, data = read_csv(trace_csv)
    if data.shape[0] == 0:
        raise ValueError(f"trace {trace_csv} has a header but no records")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    col = {name: data[:, i] for i, name in enumerate(header)}
    t = col["t"]
    xs = {k: v for k, v in col.items() if k[0] == "x" and k[1:].isdigit()}
    xh = {k: v for k, v in col.items() if k.startswith("xhat")}
    files = {
        "state.svg": line_plot(t, {**xs, **xh}, "system state and observer estimate", "value"),
        "control.svg": line_plot(t, {k: col[k] for k in ("u", "u0_hat", "comp")}, "control input", "u"),
        "a4.svg": line_plot(t, {"a4_c": col["a4_c"]}, "grid rank metric", "c(t)"),
    }
    if weights_csv is not None and Path(weights_csv).exists():
        wh, wd = read_csv(weights_csv)
        if wd.shape[0]:
            wc = {name: wd[:, i] for i, name in enumerate(wh) if name.startswith("theta_c")}
            files["weights.svg"] = line_plot(wd[:, 0], wc, "actor weights", "weight", refs=refs)
    written = []
    for name, text in files.items():
        p = out_dir / name
        p.write_text(text)
        written.append(p)
    return written
