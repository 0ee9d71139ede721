"""Ternary diagrams of k=2 locus surfaces as standalone SVG.

The weight simplex is drawn as an equilateral triangle on a fixed 600x520
canvas, tiled by the lattice triangles of a topology map and colored by
contiguous topology region; projected data points are overlaid as dots.
Output is deterministic: no timestamps, fixed number formatting.
"""

from __future__ import annotations

from .locus import SimplexPoint, SimplexTopologyMap
from ._util import fmt

WIDTH, HEIGHT = 600, 520
CORNERS = ((40.0, 480.0), (560.0, 480.0), (300.0, 29.7))

PALETTE = (
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948",
    "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac", "#86bcb6", "#d37295",
)


def barycentric_xy(p: SimplexPoint) -> tuple[float, float]:
    """Canvas position of a weight vector (corner i carries weight p[i])."""
    x = sum(w * c[0] for w, c in zip(p.p, CORNERS))
    y = sum(w * c[1] for w, c in zip(p.p, CORNERS))
    return x, y


def _coord(v: float) -> str:
    return f"{v:.2f}"


def ternary_svg(topo_map: SimplexTopologyMap,
                data_points: list[SimplexPoint] | None = None,
                corner_names: tuple[str, str, str] = ("v0", "v1", "v2")) -> str:
    """Render a topology map (and optional projected data) as SVG text."""
    r = topo_map.resolution
    index = {}
    for i, p in enumerate(topo_map.points):
        a = round(p.p[0] * r)
        b = round(p.p[1] * r)
        index[(a, b)] = i

    def xy(a: int, b: int) -> tuple[float, float]:
        return barycentric_xy(topo_map.points[index[(a, b)]])

    # lattice triangles, each attributed to the majority region of its corners
    triangles_by_region: dict[int, list[tuple]] = {}
    for a in range(r):
        for b in range(r - a):
            up = ((a, b), (a + 1, b), (a, b + 1))
            cells = [up]
            if a + b <= r - 2:
                cells.append(((a + 1, b), (a, b + 1), (a + 1, b + 1)))
            for cell in cells:
                labels = [topo_map.region_labels[index[c]] for c in cell]
                # majority label of the corners, first corner breaking ties
                label = max(set(labels),
                            key=lambda l: (labels.count(l), -labels.index(l)))
                triangles_by_region.setdefault(label, []).append(cell)

    regions = topo_map.regions()
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    for label in sorted(triangles_by_region):
        subpaths = []
        for cell in triangles_by_region[label]:
            pts = [xy(a, b) for a, b in cell]
            subpaths.append(
                "M" + " L".join(f"{_coord(x)},{_coord(y)}" for x, y in pts) + " Z")
        color = PALETTE[label % len(PALETTE)]
        topo = regions[label]
        parts.append(f'<path d="{" ".join(subpaths)}" fill="{color}" stroke="{color}" '
                     f'stroke-width="0.5"><title>region {label}: {topo}</title></path>')
    # frame
    frame = " L".join(f"{_coord(x)},{_coord(y)}" for x, y in CORNERS)
    parts.append(f'<path d="M{frame} Z" fill="none" stroke="black" stroke-width="1.5"/>')
    for name, (x, y) in zip(corner_names, CORNERS):
        dy = 16.0 if y > HEIGHT / 2 else -8.0
        parts.append(f'<text x="{_coord(x)}" y="{_coord(y + dy)}" font-size="13" '
                     f'text-anchor="middle" font-family="sans-serif">{name}</text>')
    if data_points:
        for p in data_points:
            x, y = barycentric_xy(p)
            parts.append(f'<circle cx="{_coord(x)}" cy="{_coord(y)}" r="3" '
                         f'fill="black" fill-opacity="0.7"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def lattice_csv(topo_map: SimplexTopologyMap) -> str:
    """The lattice behind a topology map as CSV."""
    lines = ["p0,p1,p2,topology,region"]
    for p, topo, label in zip(topo_map.points, topo_map.topologies,
                              topo_map.region_labels):
        weights = ",".join(fmt(w) for w in p.p)
        lines.append(f'{weights},"{topo}",{label}')
    return "\n".join(lines) + "\n"
