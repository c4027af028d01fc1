"""Minimal SVG writers: rank-size log-log plots and partition rasters.

Rasters are plain grids of <rect>; no imaging libraries involved.
"""

from __future__ import annotations

import colorsys
import math

import numpy as np


def _svg_header(width, height):
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">\n'
        f'<rect width="{width}" height="{height}" fill="white"/>\n'
    )


def rank_size_svg(sizes, path, reference_slope=-0.5, title="") -> None:
    """Log-log plot of rank against size (the ordered-size plot).

    Every avalanche of size s contributes the point (s, #sizes >= s); a
    power law p(n) ~ n^-3/2 shows as slope -1/2, drawn as the reference
    line through the data's midpoint.
    """
    sizes = np.asarray(sizes)
    sizes = sizes[sizes >= 1]
    if sizes.size == 0:
        raise ValueError("no positive sizes to plot")
    order = np.sort(sizes)[::-1].astype(float)
    ranks = np.arange(1, len(order) + 1, dtype=float)
    lx = np.log10(order)
    lyv = np.log10(ranks)

    width, height, margin = 640, 480, 56
    x0, x1 = lx.min(), lx.max()
    y0, y1 = lyv.min(), lyv.max()
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1

    def px(v):
        return margin + (v - x0) / (x1 - x0) * (width - 2 * margin)

    def py(v):
        return height - margin - (v - y0) / (y1 - y0) * (height - 2 * margin)

    parts = [_svg_header(width, height)]
    # decade ticks
    for d in range(math.floor(x0), math.ceil(x1) + 1):
        if x0 <= d <= x1:
            parts.append(
                f'<line x1="{px(d):.1f}" y1="{height-margin}" x2="{px(d):.1f}" '
                f'y2="{height-margin+5}" stroke="black"/>'
                f'<text x="{px(d):.1f}" y="{height-margin+18}" font-size="11" '
                f'text-anchor="middle">1e{d}</text>\n'
            )
    for d in range(math.floor(y0), math.ceil(y1) + 1):
        if y0 <= d <= y1:
            parts.append(
                f'<line x1="{margin-5}" y1="{py(d):.1f}" x2="{margin}" '
                f'y2="{py(d):.1f}" stroke="black"/>'
                f'<text x="{margin-8}" y="{py(d)+4:.1f}" font-size="11" '
                f'text-anchor="end">1e{d}</text>\n'
            )
    parts.append(
        f'<rect x="{margin}" y="{margin}" width="{width-2*margin}" '
        f'height="{height-2*margin}" fill="none" stroke="black"/>\n'
    )
    # subsample dense ranks so files stay small
    keep = np.unique(np.geomspace(1, len(order), num=min(len(order), 1500)).astype(int)) - 1
    for i in keep:
        parts.append(
            f'<circle cx="{px(lx[i]):.1f}" cy="{py(lyv[i]):.1f}" r="1.6" '
            f'fill="steelblue"/>\n'
        )
    # reference line through the log-midpoint
    mx, my = (x0 + x1) / 2, (y0 + y1) / 2
    span = (x1 - x0) / 2
    parts.append(
        f'<line x1="{px(mx-span):.1f}" y1="{py(my-reference_slope*span):.1f}" '
        f'x2="{px(mx+span):.1f}" y2="{py(my+reference_slope*span):.1f}" '
        f'stroke="red" stroke-width="1.5"/>\n'
    )
    parts.append(
        f'<text x="{width/2}" y="{margin-10}" font-size="13" text-anchor="middle">'
        f"{title} (red slope {reference_slope})</text>\n"
    )
    parts.append(
        f'<text x="{width/2}" y="{height-14}" font-size="12" text-anchor="middle">size</text>\n'
        f'<text x="16" y="{height/2}" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 16 {height/2})">rank</text>\n'
    )
    parts.append("</svg>\n")
    with open(path, "w") as fh:
        fh.write("".join(parts))


def partition_svg(labels, lx, ly, path, sigma=None, cell=None, title="") -> None:
    """Raster of a boundary partition.

    Hue encodes the position of the site's boundary edge in sigma (identity
    when absent, i.e. hue by boundary index); row 0 is drawn at the bottom.
    """
    labels = np.asarray(labels).reshape(ly, lx)
    n_labels = int(labels.max()) + 1
    position = np.arange(n_labels)
    if sigma is not None:
        sigma = np.asarray(sigma)
        position = np.empty(len(sigma), dtype=np.int64)
        position[sigma] = np.arange(len(sigma))
        n_labels = len(sigma)
    if cell is None:
        cell = max(1, 640 // max(lx, ly))
    width, height = lx * cell, ly * cell
    parts = [_svg_header(width, height)]
    if title:
        parts.append(f"<!-- {title} -->\n")
    for y in range(ly):
        row = labels[y]
        ypix = (ly - 1 - y) * cell
        x = 0
        while x < lx:  # merge horizontal runs to keep the file compact
            lab = row[x]
            x2 = x
            while x2 + 1 < lx and row[x2 + 1] == lab:
                x2 += 1
            hue = (position[lab] / max(n_labels, 1)) % 1.0
            r, g, b = colorsys.hsv_to_rgb(hue, 0.85, 0.95)
            parts.append(
                f'<rect x="{x*cell}" y="{ypix}" width="{(x2-x+1)*cell}" '
                f'height="{cell}" fill="rgb({int(255*r)},{int(255*g)},{int(255*b)})"/>\n'
            )
            x = x2 + 1
    parts.append("</svg>\n")
    with open(path, "w") as fh:
        fh.write("".join(parts))
