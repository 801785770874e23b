"""The five elementary lattices seeding dataset generation.

All seeds live on the vertex/body slots with zero offsets. The 1x variants
are the octant portions of period-2 lattices (simple cubic frame, body-
centered cell); the 2x variants tile the octant itself. The BCC cells keep
their cube edges so every corner has at least two incident members in the
reflected cell.
"""

from __future__ import annotations

from .graph import TrussGraph, make_graph

# vertex slot for corner (i, j, k): index 4i + 2j + k
V000, V001, V010, V011 = 0, 1, 2, 3
V100, V101, V110, V111 = 4, 5, 6, 7
BODY = 26

_OCTANT_EDGES = [
    (V000, V100), (V001, V101), (V010, V110), (V011, V111),  # along x
    (V000, V010), (V001, V011), (V100, V110), (V101, V111),  # along y
    (V000, V001), (V010, V011), (V100, V101), (V110, V111),  # along z
]


def octet_1x() -> TrussGraph:
    """Octet cell: RVE corner plus the three adjacent RVE face centers (a tetrahedron)."""
    quad = [V001, V010, V100, V111]
    beams = [(a, b) for i, a in enumerate(quad) for b in quad[i + 1:]]
    return make_graph(beams)


def sc_1x() -> TrussGraph:
    """Simple cubic frame with period 2: three half-edges meeting at (1,1,1)."""
    return make_graph([(V011, V111), (V101, V111), (V110, V111)])


def bcc_1x() -> TrussGraph:
    """Body-centered cell with period 2: cube frame plus the body diagonal."""
    return make_graph([(V000, V111), (V011, V111), (V101, V111), (V110, V111)])


def sc_2x() -> TrussGraph:
    """Simple cubic with period 1: all 8 vertices and the 12 octant edges."""
    return make_graph(list(_OCTANT_EDGES))


def bcc_2x() -> TrussGraph:
    """Body-centered with period 1: octant frame plus 8 half-diagonals."""
    beams = list(_OCTANT_EDGES) + [(v, BODY) for v in range(8)]
    return make_graph(beams)


def elementary_seeds() -> list[TrussGraph]:
    """The five seeds, in a fixed order."""
    return [octet_1x(), bcc_1x(), sc_1x(), bcc_2x(), sc_2x()]
