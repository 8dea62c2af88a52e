"""Self-contained CSV and SVG writers for experiment artifacts.

CSV files start with a schema/manifest comment line so every artifact can
be traced back to the run that produced it.  SVG plots are rendered
directly as polylines to keep artifacts dependency-free.
"""

from __future__ import annotations

import numpy as np

SCHEMA = "lfms-v1"

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def format_value(x) -> str:
    if isinstance(x, float) or isinstance(x, np.floating):
        return "%.17g" % x
    return str(x)


def write_csv(path: str, columns, rows, manifest_hash: str) -> None:
    """Rows are dicts or sequences; floats serialized at full precision."""
    with open(path, "w") as fh:
        fh.write(f"# schema={SCHEMA} manifest={manifest_hash}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            vals = (
                [row[c] for c in columns] if isinstance(row, dict) else list(row)
            )
            fh.write(",".join(format_value(v) for v in vals) + "\n")


def _ticks(lo: float, hi: float, count: int = 5):
    if hi <= lo:
        hi = lo + 1.0
    step = (hi - lo) / (count - 1)
    return [lo + i * step for i in range(count)]


def line_plot(
    path: str,
    series,
    title: str,
    xlabel: str,
    ylabel: str,
    manifest_hash: str,
    logy: bool = False,
    width: int = 640,
    height: int = 420,
) -> None:
    """Render labeled polylines; series is a list of (label, x, y).

    With logy, nonpositive values are dropped from the plotted series.
    """
    ml, mr, mt, mb = 60, 20, 40, 50
    pw, ph = width - ml - mr, height - mt - mb
    cleaned = []
    for label, x, y in series:
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        if logy:
            keep = y > 0
            x, y = x[keep], np.log10(y[keep])
        keep = np.isfinite(x) & np.isfinite(y)
        if keep.any():
            cleaned.append((label, x[keep], y[keep]))
    if not cleaned:
        cleaned = [("empty", np.array([0.0, 1.0]), np.array([0.0, 0.0]))]
    x_lo = min(s[1].min() for s in cleaned)
    x_hi = max(s[1].max() for s in cleaned)
    y_lo = min(s[2].min() for s in cleaned)
    y_hi = max(s[2].max() for s in cleaned)
    if x_hi <= x_lo:
        x_hi = x_lo + 1.0
    if y_hi <= y_lo:
        y_hi = y_lo + 1.0

    def sx(x):
        return ml + (x - x_lo) / (x_hi - x_lo) * pw

    def sy(y):
        return mt + ph - (y - y_lo) / (y_hi - y_lo) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" font-family="monospace" font-size="11">',
        f"<!-- schema={SCHEMA} manifest={manifest_hash} -->",
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2}" y="20" text-anchor="middle" '
        f'font-size="14">{title}</text>',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" '
        'stroke="black"/>',
    ]
    for xt in _ticks(x_lo, x_hi):
        px = sx(xt)
        parts.append(
            f'<line x1="{px:.1f}" y1="{mt + ph}" x2="{px:.1f}" '
            f'y2="{mt + ph + 4}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{px:.1f}" y="{mt + ph + 16}" '
            f'text-anchor="middle">{xt:.3g}</text>'
        )
    for yt in _ticks(y_lo, y_hi):
        py = sy(yt)
        lab = f"1e{yt:.2g}" if logy else f"{yt:.3g}"
        parts.append(
            f'<line x1="{ml - 4}" y1="{py:.1f}" x2="{ml}" y2="{py:.1f}" '
            'stroke="black"/>'
        )
        parts.append(
            f'<text x="{ml - 8}" y="{py + 4:.1f}" text-anchor="end">{lab}</text>'
        )
    parts.append(
        f'<text x="{ml + pw / 2}" y="{height - 8}" '
        f'text-anchor="middle">{xlabel}</text>'
    )
    ylab = f"log10 {ylabel}" if logy else ylabel
    parts.append(
        f'<text x="14" y="{mt + ph / 2}" text-anchor="middle" '
        f'transform="rotate(-90 14 {mt + ph / 2})">{ylab}</text>'
    )
    for i, (label, x, y) in enumerate(cleaned):
        color = _COLORS[i % len(_COLORS)]
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y))
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" '
            'stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{ml + pw - 6}" y="{mt + 14 + 14 * i}" '
            f'text-anchor="end" fill="{color}">{label}</text>'
        )
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")
