"""Atomic file output: JSON reports, CSV tables and minimal SVG line plots."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

__all__ = ["atomic_write", "write_json", "write_csv", "svg_plot", "REPORT_SCHEMA", "to_jsonable"]

REPORT_SCHEMA = "report_v1"


def atomic_write(path, text: str):
    """Write via a temporary file in the target directory and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def write_json(path, obj):
    return atomic_write(path, json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n")


def write_csv(path, header, columns):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    cols = [np.asarray(c) for c in columns]
    for row in zip(*cols):
        w.writerow([repr(float(v)) if np.issubdtype(type(v), np.floating) or isinstance(v, float)
                    else v for v in row])
    return atomic_write(path, buf.getvalue())


def _ticks(lo, hi, log):
    if log:
        a, b = math.floor(lo), math.ceil(hi)
        return [float(k) for k in range(a, b + 1)]
    step = 10 ** math.floor(math.log10(max(hi - lo, 1e-300)))
    if (hi - lo) / step < 3:
        step /= 2
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-12 * step:
        out.append(round(v, 12))
        v += step
    return out


def svg_plot(series, title="", xlabel="", ylabel="", logx=False, logy=False,
             width=640, height=420) -> str:
    """SVG 1.1 line plot.  ``series`` is a list of (label, x, y, style) with
    style "line" or "points"."""
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"]
    tx = (lambda v: np.log10(v)) if logx else (lambda v: np.asarray(v, dtype=float))
    ty = (lambda v: np.log10(v)) if logy else (lambda v: np.asarray(v, dtype=float))
    xs = [tx(np.asarray(s[1], dtype=float)) for s in series]
    ys = [ty(np.asarray(s[2], dtype=float)) for s in series]
    allx = np.concatenate(xs)
    ally = np.concatenate(ys)
    fin = np.isfinite(allx) & np.isfinite(ally)
    x0, x1 = float(allx[fin].min()), float(allx[fin].max())
    y0, y1 = float(ally[fin].min()), float(ally[fin].max())
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad
    L, R, T, B = 70, 20, 40, 50
    pw, ph = width - L - R, height - T - B

    def X(v):
        return L + (v - x0) / (x1 - x0) * pw

    def Y(v):
        return T + (1 - (v - y0) / (y1 - y0)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" '
           f'height="{height}" viewBox="0 0 {width} {height}">',
           '<rect width="100%" height="100%" fill="white"/>',
           f'<rect x="{L}" y="{T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for t in _ticks(x0, x1, logx):
        if x0 <= t <= x1:
            lab = f"1e{int(t)}" if logx else f"{t:g}"
            out.append(f'<line x1="{X(t):.2f}" y1="{T + ph}" x2="{X(t):.2f}" y2="{T + ph + 5}" stroke="black"/>')
            out.append(f'<text x="{X(t):.2f}" y="{T + ph + 18}" font-size="11" text-anchor="middle">{lab}</text>')
    for t in _ticks(y0, y1, logy):
        if y0 <= t <= y1:
            lab = f"1e{int(t)}" if logy else f"{t:g}"
            out.append(f'<line x1="{L - 5}" y1="{Y(t):.2f}" x2="{L}" y2="{Y(t):.2f}" stroke="black"/>')
            out.append(f'<text x="{L - 8}" y="{Y(t) + 4:.2f}" font-size="11" text-anchor="end">{lab}</text>')
    for k, ((label, _, _, style), xv, yv) in enumerate(zip(series, xs, ys)):
        col = colors[k % len(colors)]
        ok = np.isfinite(xv) & np.isfinite(yv)
        pts = " ".join(f"{X(a):.2f},{Y(b):.2f}" for a, b in zip(xv[ok], yv[ok]))
        if style == "points":
            for a, b in zip(xv[ok], yv[ok]):
                out.append(f'<circle cx="{X(a):.2f}" cy="{Y(b):.2f}" r="3" fill="{col}"/>')
        else:
            out.append(f'<polyline points="{pts}" fill="none" stroke="{col}" stroke-width="1.5"/>')
        out.append(f'<text x="{L + 10}" y="{T + 16 + 14 * k}" font-size="12" fill="{col}">{_esc(label)}</text>')
    out.append(f'<text x="{width / 2}" y="{T - 14}" font-size="14" text-anchor="middle">{_esc(title)}</text>')
    out.append(f'<text x="{L + pw / 2}" y="{height - 10}" font-size="12" text-anchor="middle">{_esc(xlabel)}</text>')
    out.append(f'<text x="16" y="{T + ph / 2}" font-size="12" text-anchor="middle" '
               f'transform="rotate(-90 16 {T + ph / 2})">{_esc(ylabel)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s):
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
