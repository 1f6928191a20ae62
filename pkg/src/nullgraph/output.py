"""Deterministic artifact writers: CSV tables, SVG line charts, PGM/PPM images.

All floats are formatted with 9 significant digits so a fixed experiment seed
produces byte-identical files.  The SVG writer is intentionally self-contained
(no plotting library) for the same reason.
"""

from __future__ import annotations

import numpy as np


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if v != v:
            return "nan"
        if v == float("inf"):
            return "inf"
        if v == float("-inf"):
            return "-inf"
        return f"{v:.9g}"
    return str(value)


def emit_csv(rows, path, header=None):
    """Comma separator, '.' decimal, LF endings, one header row."""
    rows = list(rows)
    if not rows:
        raise ValueError(f"refusing to write an empty CSV to {path}")
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            if header is not None:
                fh.write(",".join(str(h) for h in header) + "\n")
            for row in rows:
                fh.write(",".join(fmt(v) for v in row) + "\n")
    except OSError as exc:
        raise OSError(f"failed writing CSV {path}: {exc}") from exc


def read_csv(path):
    """Read back an emit_csv file: (header, list of string rows)."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    header = lines[0].split(",")
    return header, [ln.split(",") for ln in lines[1:]]


_PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b")

_W, _H = 640, 480
_ML, _MR, _MT, _MB = 70, 20, 40, 50


def _ticks(lo, hi, count=5):
    if hi <= lo:
        hi = lo + 1.0
    return [lo + (hi - lo) * i / (count - 1) for i in range(count)]


def emit_svg(series, path, title="", xlabel="", ylabel=""):
    """Minimal SVG 1.1 line chart; one polyline per named series.

    series: list of (name, xs, ys).  Single-point series are drawn as a
    circular marker.  Output bytes depend only on the input data.
    """
    series = [(str(name), np.asarray(xs, float), np.asarray(ys, float))
              for name, xs, ys in series]
    series = [(n, x[np.isfinite(y)], y[np.isfinite(y)]) for n, x, y in series]
    if not series or all(x.size == 0 for _, x, _ in series):
        raise ValueError(f"refusing to plot empty data to {path}")
    xlo = min(x.min() for _, x, _ in series if x.size)
    xhi = max(x.max() for _, x, _ in series if x.size)
    ylo = min(y.min() for _, _, y in series if y.size)
    yhi = max(y.max() for _, _, y in series if y.size)
    if xhi <= xlo:
        xlo, xhi = xlo - 0.5, xhi + 0.5
    if yhi <= ylo:
        ylo, yhi = ylo - 0.5, yhi + 0.5
    pw, ph = _W - _ML - _MR, _H - _MT - _MB

    def sx(v):
        return _ML + (v - xlo) / (xhi - xlo) * pw

    def sy(v):
        return _MT + ph - (v - ylo) / (yhi - ylo) * ph

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2:.1f}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="15">{title}</text>',
    ]
    axis = f'stroke="black" stroke-width="1"'
    parts.append(f'<line x1="{_ML}" y1="{_MT + ph}" x2="{_ML + pw}" y2="{_MT + ph}" {axis}/>')
    parts.append(f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_MT + ph}" {axis}/>')
    for tv in _ticks(xlo, xhi):
        x = sx(tv)
        parts.append(f'<line x1="{x:.2f}" y1="{_MT + ph}" x2="{x:.2f}" y2="{_MT + ph + 5}" {axis}/>')
        parts.append(
            f'<text x="{x:.2f}" y="{_MT + ph + 18}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{fmt(tv)}</text>'
        )
    for tv in _ticks(ylo, yhi):
        yy = sy(tv)
        parts.append(f'<line x1="{_ML - 5}" y1="{yy:.2f}" x2="{_ML}" y2="{yy:.2f}" {axis}/>')
        parts.append(
            f'<text x="{_ML - 8}" y="{yy + 4:.2f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{fmt(tv)}</text>'
        )
    parts.append(
        f'<text x="{_ML + pw / 2:.1f}" y="{_H - 12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{xlabel}</text>'
    )
    parts.append(
        f'<text x="16" y="{_MT + ph / 2:.1f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {_MT + ph / 2:.1f})">{ylabel}</text>'
    )
    for i, (name, xs, ys) in enumerate(series):
        color = _PALETTE[i % len(_PALETTE)]
        if xs.size == 1:
            parts.append(
                f'<circle cx="{sx(xs[0]):.2f}" cy="{sy(ys[0]):.2f}" r="4" fill="{color}"/>'
            )
        else:
            pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(xs, ys))
            parts.append(
                f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>'
            )
        ly = _MT + 14 + 16 * i
        parts.append(
            f'<line x1="{_ML + pw - 110}" y1="{ly - 4}" x2="{_ML + pw - 88}" '
            f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{_ML + pw - 82}" y="{ly}" font-family="sans-serif" '
            f'font-size="11">{name}</text>'
        )
    parts.append("</svg>")
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(parts) + "\n")
    except OSError as exc:
        raise OSError(f"failed writing SVG {path}: {exc}") from exc


def write_image(signal, path):
    """Binary PGM (1 channel) or PPM (3 channels), maxval 255, row-major."""
    arr = signal.as_chw()
    c = arr.shape[0]
    if c not in (1, 3):
        raise ValueError("image output supports 1 or 3 channels")
    quantized = np.clip(np.rint(np.clip(arr, 0.0, 1.0) * 255.0), 0, 255).astype(np.uint8)
    magic = b"P5" if c == 1 else b"P6"
    h, w = arr.shape[1], arr.shape[2]
    payload = quantized[0] if c == 1 else np.moveaxis(quantized, 0, -1)
    with open(path, "wb") as fh:
        fh.write(magic + b"\n%d %d\n255\n" % (w, h))
        fh.write(payload.tobytes())
