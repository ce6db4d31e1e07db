"""CSV tables, matrix files and standalone SVG convergence plots."""

import csv
from xml.sax.saxutils import escape

import numpy as np

from .errors import IoError

CLAMP = 1e-16
PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#000000", "#aec7e8",
)


def format_complex(z):
    z = complex(z)
    return f"({z.real:.17g}{z.imag:+.17g}j)"


def write_matrix_csv(M, path):
    """Dense matrix, one row per line, entries in Python complex notation."""
    M = np.atleast_2d(np.asarray(M))
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            for row in M:
                w.writerow([format_complex(z) for z in row])
    except OSError as exc:
        raise IoError(str(exc)) from exc


def read_matrix_csv(path):
    try:
        with open(path, newline="") as fh:
            rows = [[complex(x.strip()) for x in row] for row in csv.reader(fh) if row]
    except OSError as exc:
        raise IoError(str(exc)) from exc
    M = np.array(rows, dtype=np.complex128)
    return M.real.copy() if not np.any(M.imag) else M


def write_trace_csv(trace, path):
    try:
        trace.to_csv(path)
    except OSError as exc:
        raise IoError(str(exc)) from exc


def emit_svg_plot(trace, path, title=None, width=720, height=440):
    """``log10(value)`` against chain position, one polyline per metric.

    Values at or below ``1e-16`` are drawn at ``1e-16``.
    """
    if len(trace) == 0:
        raise ValueError("cannot plot an empty trace")
    tags = list(trace.values)
    logs = {t: np.log10(np.maximum(trace.series(t), CLAMP)) for t in tags}
    lo = min(float(v.min()) for v in logs.values())
    hi = max(float(v.max()) for v in logs.values())
    lo, hi = np.floor(lo), np.ceil(hi)
    if hi <= lo:
        hi = lo + 1
    left, right, top, bottom = 70, 230, 40, 50
    pw, ph = width - left - right, height - top - bottom
    n = len(trace)

    def px(k):
        return left + (pw * k / (n - 1) if n > 1 else pw / 2)

    def py(v):
        return top + ph * (hi - v) / (hi - lo)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
    ]
    if title:
        out.append(f'<text x="{left + pw / 2:.1f}" y="22" text-anchor="middle" font-size="13">{escape(title)}</text>')
    for e in range(int(lo), int(hi) + 1):
        y = py(e)
        out.append(f'<line x1="{left}" y1="{y:.1f}" x2="{left + pw}" y2="{y:.1f}" stroke="#ddd"/>')
        out.append(f'<text x="{left - 6}" y="{y + 4:.1f}" text-anchor="end">{e}</text>')
    for k, idx in enumerate(trace.index):
        x = px(k)
        out.append(f'<text x="{x:.1f}" y="{top + ph + 16}" text-anchor="middle">{escape(_tick(idx))}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 12}" text-anchor="middle">index</text>')
    out.append(f'<text x="18" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 18 {top + ph / 2:.1f})">log10(value)</text>')
    for i, t in enumerate(tags):
        color = PALETTE[i % len(PALETTE)]
        pts = [(px(k), py(v)) for k, v in enumerate(logs[t])]
        if len(pts) > 1:
            path_pts = " ".join(f"{x:.1f},{y:.1f}" for x, y in pts)
            out.append(f'<polyline points="{path_pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for x, y in pts:
            out.append(f'<circle cx="{x:.1f}" cy="{y:.1f}" r="3" fill="{color}"/>')
        ly = top + 14 * i + 8
        out.append(f'<line x1="{width - right + 12}" y1="{ly}" x2="{width - right + 30}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{width - right + 36}" y="{ly + 4}">{escape(str(t))}</text>')
    out.append("</svg>")
    try:
        with open(path, "w") as fh:
            fh.write("\n".join(out) + "\n")
    except OSError as exc:
        raise IoError(str(exc)) from exc
    return path


def _tick(idx):
    if isinstance(idx, float):
        if 0 < idx < 1:
            inv = 1 / idx
            if abs(inv - round(inv)) < 1e-9:
                return f"1/{int(round(inv))}"
        return f"{idx:g}"
    return str(idx)
