"""Ternary SVG rendering and the lattice CSV."""

import pytest

from treespace.locus import SimplexPoint, VertexSet, simplex_topology_map
from treespace.ternary import barycentric_xy, lattice_csv, ternary_svg, CORNERS

from conftest import tree_from_xi


@pytest.fixture(scope="module")
def topo_map(reference_vertices):
    return simplex_topology_map(VertexSet(reference_vertices), resolution=12)


def test_corners_map_to_triangle_corners():
    for i in range(3):
        p = SimplexPoint.vertex(2, i)
        assert barycentric_xy(p) == CORNERS[i]


def test_svg_is_deterministic_and_well_formed(topo_map):
    dots = [SimplexPoint((0.2, 0.5, 0.3)), SimplexPoint((0.6, 0.2, 0.2))]
    svg1 = ternary_svg(topo_map, dots)
    svg2 = ternary_svg(topo_map, dots)
    assert svg1 == svg2
    assert svg1.startswith("<svg")
    assert 'width="600" height="520"' in svg1
    assert svg1.count("<circle") == 2
    # one path per drawn topology region plus the frame; regions too small
    # to win any lattice triangle contribute no path
    n_paths = svg1.count("<path")
    assert 2 <= n_paths <= len(set(topo_map.region_labels)) + 1


def test_lattice_csv_rows(topo_map):
    text = lattice_csv(topo_map)
    lines = text.strip().splitlines()
    assert lines[0] == "p0,p1,p2,topology,region"
    assert len(lines) == 1 + len(topo_map.points)
    assert lines[1].startswith("0,0,1,")
