"""SVG drawings of k=3 nearest-vertex partitions of the simplex."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import UnsupportedDimensionError
from .transport import NnTransport

SQRT3_2 = float(np.sqrt(3.0) / 2.0)
# triangle corners for e1, e2, e3
CORNERS = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, SQRT3_2]])
SCALE = 400.0
PAD = 20.0
FILLS = ("#d95f02", "#1b9e77", "#7570b3")
ON_LINE_TOL = 1e-12


class Partition(NamedTuple):
    regions: tuple      # per vertex, polygon corners in barycentric coordinates
    boundaries: tuple   # ((i, j), (p, q)) segments in barycentric coordinates
    center: np.ndarray


def to_plane(points) -> np.ndarray:
    """Barycentric coordinates to the plane triangle (0,0), (1,0), (0.5, sqrt(3)/2)."""
    return np.atleast_2d(np.asarray(points, dtype=float)) @ CORNERS


def to_canvas(xy) -> np.ndarray:
    xy = np.atleast_2d(np.asarray(xy, dtype=float))
    return np.column_stack([PAD + SCALE * xy[:, 0], PAD + SCALE * (SQRT3_2 - xy[:, 1])])


def _clip(poly, f):
    """Keep the part of a convex polygon where the affine function ``f`` is >= 0."""
    out = []
    vals = [f(p) for p in poly]
    for idx, (p, fp) in enumerate(zip(poly, vals)):
        q, fq = poly[(idx + 1) % len(poly)], vals[(idx + 1) % len(poly)]
        if fp >= 0:
            out.append(p)
        if (fp >= 0) != (fq >= 0):
            out.append(p + (q - p) * (fp / (fp - fq)))
    return out


def _gap(psi, i, j):
    # region i beats region j where s_i - s_j >= (psi_j - psi_i) / 2
    return lambda s: (s[i] - s[j]) - (psi[j] - psi[i]) / 2.0


def partition(tmap: NnTransport) -> Partition:
    if tmap.k != 3:
        raise UnsupportedDimensionError(f"partition plots need k = 3, got k = {tmap.k}")
    psi = tmap.psi
    regions = []
    for i in range(3):
        poly = list(np.eye(3))
        for j in range(3):
            if j != i and poly:
                poly = _clip(poly, _gap(psi, i, j))
        regions.append(tuple(poly))
    boundaries = []
    for i in range(3):
        for j in range(i + 1, 3):
            f = _gap(psi, i, j)
            on = [p for p in regions[i] if abs(f(p)) <= ON_LINE_TOL]
            if len(on) >= 2:
                boundaries.append(((i, j), (on[0], on[-1])))
    return Partition(tuple(regions), tuple(boundaries), tmap.center())


def polygon_area(poly_xy) -> float:
    P = np.asarray(poly_xy, dtype=float)
    if len(P) < 3:
        return 0.0
    x, y = P[:, 0], P[:, 1]
    return 0.5 * abs(float(x @ np.roll(y, -1) - y @ np.roll(x, -1)))


def region_areas(tmap: NnTransport) -> np.ndarray:
    """Plane areas of the three regions (they sum to sqrt(3)/4)."""
    return np.array([polygon_area(to_plane(r)) if len(r) else 0.0 for r in partition(tmap).regions])


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _points(bary) -> str:
    return " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in to_canvas(to_plane(bary)))


def render_partition_svg(tmap: NnTransport, path, title: str = "") -> None:
    """Write the partition of the triangle induced by a k=3 nearest-vertex map.

    The center marker is drawn only when the center lies inside the triangle.
    Output depends only on the map and title, so identical input gives
    identical bytes.
    """
    part = partition(tmap)
    size = 2 * PAD + SCALE
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_fmt(size)}" '
        f'height="{_fmt(PAD * 2 + SCALE * SQRT3_2)}">',
    ]
    if title:
        esc = title.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
        lines.append(f"<title>{esc}</title>")
    for i, poly in enumerate(part.regions):
        if len(poly) >= 3:
            lines.append(f'<polygon id="region{i}" points="{_points(poly)}" fill="{FILLS[i]}" '
                         f'fill-opacity="0.55" stroke="none"/>')
    for (i, j), (p, q) in part.boundaries:
        (x1, y1), (x2, y2) = to_canvas(to_plane([p, q]))
        lines.append(f'<line id="boundary{i}{j}" x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" '
                     f'y2="{_fmt(y2)}" stroke="#000000" stroke-width="1.5"/>')
    lines.append(f'<polygon id="simplex" points="{_points(np.eye(3))}" fill="none" '
                 f'stroke="#000000" stroke-width="2"/>')
    if np.all(part.center >= -1e-12):
        (cx, cy), = to_canvas(to_plane(part.center))
        lines.append(f'<circle id="center" cx="{_fmt(cx)}" cy="{_fmt(cy)}" r="4" fill="#000000"/>')
    for i, (x, y) in enumerate(to_canvas(CORNERS)):
        dy = 16.0 if i < 2 else -6.0
        lines.append(f'<text x="{_fmt(x)}" y="{_fmt(y + dy)}" font-size="12" '
                     f'text-anchor="middle">e{i + 1}</text>')
    lines.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
