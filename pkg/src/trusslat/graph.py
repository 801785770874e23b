"""Octant truss graphs: validity rules, repair, superposition and the
reflection into the full periodic unit cell.

A structure is a symmetric 27x27 binary adjacency matrix (unit diagonal)
plus a packed 27-vector of node offsets. The full cell Omega = [-1,1]^3 is
obtained by mirroring the octant about the three coordinate planes.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from . import slots
from .slots import (
    FREE_AXES,
    N_SLOTS,
    NOMINAL_POSITIONS,
    OFFSET_BOUND,
    VERTEX_SLOTS,
    node_position,
    offset_slice,
    offsets_for_point,
)

R_MAX = np.sqrt(3.0)  # longest permitted beam, in octant coordinates
CELL_VOLUME = 8.0

# validity failure tags
DISCONNECTED = "disconnected"
DANGLING_NODE = "dangling_node"
BEAM_TOO_LONG = "beam_too_long"
OFFSET_OUT_OF_RANGE = "offset_out_of_range"
NO_BOUNDARY_CONTACT = "no_boundary_contact"
EMPTY = "empty"

_GEOM_TOL = 1e-6


class DegenerateStructureError(ValueError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class TrussGraph:
    """Immutable octant graph: (adjacency, packed offsets)."""

    adjacency: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=np.uint8)
        if adj.shape != (N_SLOTS, N_SLOTS):
            raise ValueError(f"adjacency must be {N_SLOTS}x{N_SLOTS}")
        if not np.array_equal(adj, adj.T):
            raise ValueError("adjacency must be symmetric")
        if not np.all(np.diag(adj) == 1):
            raise ValueError("adjacency diagonal must be 1")
        off = np.asarray(self.offsets, dtype=np.float64)
        if off.shape != (slots.N_OFFSETS,):
            raise ValueError(f"offsets must have length {slots.N_OFFSETS}")
        object.__setattr__(self, "adjacency", _frozen(adj))
        object.__setattr__(self, "offsets", _frozen(off))

    # -- basic queries -------------------------------------------------

    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1).astype(int) - 1  # off-diagonal

    def active_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.degrees() > 0)

    def beams(self) -> list[tuple[int, int]]:
        i, j = np.nonzero(np.triu(self.adjacency, k=1))
        return list(zip(i.tolist(), j.tolist()))

    def positions(self) -> np.ndarray:
        return slots.all_positions(self.offsets)

    def digest(self, quantum: float = 1e-4) -> str:
        """Content hash over adjacency bits and quantized offsets."""
        bits = np.packbits(self.adjacency[np.triu_indices(N_SLOTS, k=1)])
        q = np.round(self.offsets / quantum).astype(np.int64)
        return hashlib.sha256(bits.tobytes() + q.tobytes()).hexdigest()[:16]

    def equals(self, other: "TrussGraph") -> bool:
        return np.array_equal(self.adjacency, other.adjacency) and np.array_equal(
            self.offsets, other.offsets
        )


def make_graph(beams, offsets=None) -> TrussGraph:
    """Build a TrussGraph from a beam list; inactive-node offsets are zeroed."""
    adj = np.eye(N_SLOTS, dtype=np.uint8)
    for i, j in beams:
        if i == j:
            raise ValueError("self loops not allowed")
        adj[i, j] = adj[j, i] = 1
    off = np.zeros(slots.N_OFFSETS) if offsets is None else np.asarray(offsets, float).copy()
    deg = adj.sum(axis=1) - 1
    for s in range(N_SLOTS):
        if deg[s] == 0:
            off[offset_slice(s)] = 0.0
    return TrussGraph(adj, off)


@dataclass(frozen=True)
class ValidityReport:
    valid: bool
    failures: tuple[str, ...] = field(default_factory=tuple)


def _component_count(adj: np.ndarray, active: np.ndarray) -> int:
    if len(active) == 0:
        return 0
    active_set = set(active.tolist())
    seen: set[int] = set()
    comps = 0
    for start in active:
        if start in seen:
            continue
        comps += 1
        stack = [start]
        seen.add(start)
        while stack:
            node = stack.pop()
            for nxt in np.flatnonzero(adj[node]):
                if nxt != node and nxt in active_set and nxt not in seen:
                    seen.add(int(nxt))
                    stack.append(int(nxt))
    return comps


def _reflected_degree(pos: np.ndarray, node: int, neighbors: np.ndarray) -> int:
    """Incident-beam count of ``node`` in the reflected full cell.

    Mirrors about the symmetry planes x=0, y=0, z=0 fix any node with a zero
    coordinate and map its beams onto additional distinct beams, so a node
    resting on a symmetry plane with one transversal octant beam is not
    dangling in the real structure.
    """
    p = pos[node]
    zero_axes = [a for a in range(3) if abs(p[a]) < _GEOM_TOL]
    images = set()
    for q in pos[neighbors]:
        for mask in range(1 << len(zero_axes)):
            img = q.copy()
            for b, axis in enumerate(zero_axes):
                if mask >> b & 1:
                    img[axis] = -img[axis]
            images.add(tuple(np.round(img / 1e-9).astype(np.int64).tolist()))
    return len(images)


def validate(g: TrussGraph) -> ValidityReport:
    """Diagnostic validity check; never raises.

    Flags: empty structure, offsets out of clearance bounds, more than one
    connected component over the active nodes, dangling nodes (reflected-cell
    degree < 2), beams longer than R_MAX, and missing contact with the
    octant boundary planes x=1, y=1, z=1.
    """
    failures: list[str] = []
    beams = g.beams()
    active = g.active_nodes()
    if not beams:
        return ValidityReport(False, (EMPTY,))

    if np.any(np.abs(g.offsets) > OFFSET_BOUND + 1e-12):
        failures.append(OFFSET_OUT_OF_RANGE)

    pos = slots.all_positions(g.offsets)
    adj = g.adjacency

    if _component_count(adj, active) != 1:
        failures.append(DISCONNECTED)

    for node in active:
        neigh = np.array([m for m in np.flatnonzero(adj[node]) if m != node], dtype=int)
        if _reflected_degree(pos, node, neigh) < 2:
            failures.append(DANGLING_NODE)
            break

    for i, j in beams:
        if np.linalg.norm(pos[i] - pos[j]) > R_MAX + 1e-9:
            failures.append(BEAM_TOO_LONG)
            break

    for axis in range(3):
        if not np.any(np.abs(pos[active, axis] - 1.0) < _GEOM_TOL):
            failures.append(NO_BOUNDARY_CONTACT)
            break

    return ValidityReport(not failures, tuple(failures))


def repair(g: TrussGraph) -> TrussGraph | None:
    """Prune dangling nodes, keep the largest component, re-validate.

    Returns the repaired graph, or None (REJECT) when the result still
    fails validation. Valid inputs are returned unchanged.
    """
    if validate(g).valid:
        return g

    adj = g.adjacency.copy()
    pos = slots.all_positions(g.offsets)

    while True:
        deg = adj.sum(axis=1) - 1
        active = np.flatnonzero(deg > 0)
        pruned = False
        for node in active:
            neigh = np.array([m for m in np.flatnonzero(adj[node]) if m != node], dtype=int)
            if len(neigh) == 0:
                continue
            if _reflected_degree(pos, node, neigh) < 2:
                adj[node, :] = 0
                adj[:, node] = 0
                adj[node, node] = 1
                pruned = True
        if not pruned:
            break

    active = np.flatnonzero(adj.sum(axis=1) - 1 > 0)
    if len(active) > 0:
        # keep only the largest connected component (ties: lowest min index)
        comps: list[list[int]] = []
        seen: set[int] = set()
        active_set = set(active.tolist())
        for start in active:
            if start in seen:
                continue
            comp = [int(start)]
            seen.add(int(start))
            stack = [int(start)]
            while stack:
                node = stack.pop()
                for nxt in np.flatnonzero(adj[node]):
                    if nxt != node and nxt in active_set and nxt not in seen:
                        seen.add(int(nxt))
                        comp.append(int(nxt))
                        stack.append(int(nxt))
            comps.append(sorted(comp))
        comps.sort(key=lambda c: (-len(c), c[0]))
        for comp in comps[1:]:
            for node in comp:
                adj[node, :] = 0
                adj[:, node] = 0
                adj[node, node] = 1

    off = g.offsets.copy()
    deg = adj.sum(axis=1) - 1
    for s in range(N_SLOTS):
        if deg[s] == 0:
            off[offset_slice(s)] = 0.0
    result = TrussGraph(adj, off)
    return result if validate(result).valid else None


# -- superposition and intersection fixing ------------------------------


def superpose(g1: TrussGraph, g2: TrussGraph) -> TrussGraph | None:
    """Element-wise OR of two graphs, then intersection resolution.

    Slots active in both graphs must agree on their offsets to 1e-9,
    otherwise the pair is rejected (returns None).
    """
    act1 = set(g1.active_nodes().tolist())
    act2 = set(g2.active_nodes().tolist())
    off = np.zeros(slots.N_OFFSETS)
    for s in range(N_SLOTS):
        sl = offset_slice(s)
        in1, in2 = s in act1, s in act2
        if in1 and in2:
            if np.any(np.abs(g1.offsets[sl] - g2.offsets[sl]) > 1e-9):
                return None
            off[sl] = g1.offsets[sl]
        elif in1:
            off[sl] = g1.offsets[sl]
        elif in2:
            off[sl] = g2.offsets[sl]
    adj = np.maximum(g1.adjacency, g2.adjacency)
    return resolve_intersections(TrussGraph(adj, off))


def _segment_closest(p1, p2, q1, q2):
    """Closest points of two segments (as 3-tuples): (s, t, dist); s, t in [0, 1]."""
    d1 = (p2[0] - p1[0], p2[1] - p1[1], p2[2] - p1[2])
    d2 = (q2[0] - q1[0], q2[1] - q1[1], q2[2] - q1[2])
    r = (p1[0] - q1[0], p1[1] - q1[1], p1[2] - q1[2])
    a = d1[0] * d1[0] + d1[1] * d1[1] + d1[2] * d1[2]
    e = d2[0] * d2[0] + d2[1] * d2[1] + d2[2] * d2[2]
    f = d2[0] * r[0] + d2[1] * r[1] + d2[2] * r[2]
    b = d1[0] * d2[0] + d1[1] * d2[1] + d1[2] * d2[2]
    c = d1[0] * r[0] + d1[1] * r[1] + d1[2] * r[2]
    denom = a * e - b * b
    s = min(max((b * f - c * e) / denom, 0.0), 1.0) if denom > 1e-14 * a * e else 0.0
    t = (b * s + f) / e
    if t < 0.0:
        t = 0.0
        s = min(max(-c / a, 0.0), 1.0)
    elif t > 1.0:
        t = 1.0
        s = min(max((b - c) / a, 0.0), 1.0)
    gx = p1[0] + s * d1[0] - (q1[0] + t * d2[0])
    gy = p1[1] + s * d1[1] - (q1[1] + t * d2[1])
    gz = p1[2] + s * d1[2] - (q1[2] + t * d2[2])
    return s, t, math.sqrt(gx * gx + gy * gy + gz * gz)


def _parallel(p1, p2, q1, q2) -> bool:
    ux, uy, uz = p2[0] - p1[0], p2[1] - p1[1], p2[2] - p1[2]
    vx, vy, vz = q2[0] - q1[0], q2[1] - q1[1], q2[2] - q1[2]
    cx = uy * vz - uz * vy
    cy = uz * vx - ux * vz
    cz = ux * vy - uy * vx
    nu = math.sqrt(ux * ux + uy * uy + uz * uz)
    nv = math.sqrt(vx * vx + vy * vy + vz * vz)
    return math.sqrt(cx * cx + cy * cy + cz * cz) < 1e-9 * nu * nv


def _host_slot(point, adj, off, tol=_GEOM_TOL):
    """Slot that can carry ``point``: an active node there, else the first
    inactive slot whose fixed axes match and free axes reach it in-bounds."""
    deg = adj.sum(axis=1) - 1
    pos = slots.all_positions(off)
    for s in range(N_SLOTS):
        if deg[s] > 0 and np.linalg.norm(pos[s] - point) < tol:
            return s, None
    for s in range(N_SLOTS):
        if deg[s] > 0:
            continue
        values = offsets_for_point(s, point, tol)
        if values is not None:
            return s, values
    return None, None


def resolve_intersections(g: TrussGraph) -> TrussGraph | None:
    """Split transversally crossing beams at a shared node, or reject.

    A crossing is resolved by activating the slot that realizes the
    intersection point (an already-active node there also qualifies) and
    splitting each beam the point is interior to. Structures whose crossing
    point fits no slot, and collinear overlapping beams, are rejected.
    """
    adj = g.adjacency.copy()
    off = g.offsets.copy()

    for _ in range(200):
        i_idx, j_idx = np.nonzero(np.triu(adj, k=1))
        beams = list(zip(i_idx.tolist(), j_idx.tolist()))
        pos_arr = slots.all_positions(off)
        pos = [tuple(row) for row in pos_arr.tolist()]

        split = None
        overlap = False
        for bi in range(len(beams)):
            a, b = beams[bi]
            for bj in range(bi + 1, len(beams)):
                c, d = beams[bj]
                shared = {a, b} & {c, d}
                if shared:
                    if len(shared) == 2:
                        continue
                    m = shared.pop()
                    o1 = b if a == m else a
                    o2 = d if c == m else c
                    dot = sum((pos[o1][k] - pos[m][k]) * (pos[o2][k] - pos[m][k]) for k in range(3))
                    if dot > 0 and _parallel(pos[m], pos[o1], pos[m], pos[o2]):
                        overlap = True
                    continue
                s, t, dist = _segment_closest(pos[a], pos[b], pos[c], pos[d])
                if dist >= _GEOM_TOL:
                    continue
                if _parallel(pos[a], pos[b], pos[c], pos[d]):
                    overlap = True
                    continue
                point = 0.5 * (
                    pos_arr[a] + s * (pos_arr[b] - pos_arr[a]) + pos_arr[c] + t * (pos_arr[d] - pos_arr[c])
                )
                len1 = math.dist(pos[a], pos[b])
                len2 = math.dist(pos[c], pos[d])
                int1 = _GEOM_TOL < s * len1 and _GEOM_TOL < (1 - s) * len1
                int2 = _GEOM_TOL < t * len2 and _GEOM_TOL < (1 - t) * len2
                if int1 or int2:
                    split = (a, b, c, d, point, int1, int2)
                    break
            if split:
                break

        if split is None:
            if overlap:
                return None
            graph = TrussGraph(adj, off)
            # normalize: zero offsets of nodes deactivated along the way
            return make_graph(graph.beams(), offsets=off)

        a, b, c, d, point, int1, int2 = split
        slot, values = _host_slot(point, adj, off)
        if slot is None:
            return None
        if values is not None:
            off[offset_slice(slot)] = values
        if int1:
            adj[a, b] = adj[b, a] = 0
            for end in (a, b):
                if end != slot:
                    adj[end, slot] = adj[slot, end] = 1
        if int2:
            adj[c, d] = adj[d, c] = 0
            for end in (c, d):
                if end != slot:
                    adj[end, slot] = adj[slot, end] = 1

    return None


# -- unit-cell realization ----------------------------------------------


@dataclass(frozen=True)
class UnitCell:
    """Reflected beam network in Omega = [-1,1]^3.

    ``beams`` rows are (node_i, node_j, share_weight); weights 1/2 and 1/4
    mark beams lying in a cell boundary face or on a cell boundary edge,
    where periodic neighbors contribute coincident material.
    """

    nodes: np.ndarray
    beams: tuple[tuple[int, int, float], ...]
    radius: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "nodes", _frozen(np.asarray(self.nodes, float)))

    @property
    def total_weighted_length(self) -> float:
        total = 0.0
        for i, j, w in self.beams:
            total += w * float(np.linalg.norm(self.nodes[i] - self.nodes[j]))
        return total

    def with_radius(self, radius: float) -> "UnitCell":
        return UnitCell(self.nodes, self.beams, radius)


def _quantize(p: np.ndarray) -> tuple[int, int, int]:
    q = np.round(p / 1e-9).astype(np.int64)
    return (int(q[0]), int(q[1]), int(q[2]))


def reflect_to_cell(g: TrussGraph) -> UnitCell:
    """Mirror the octant about x=0, y=0, z=0 into the full unit cell.

    Nodes are deduplicated by coordinate, beams by unordered node pair.
    Node ordering is lexicographic in (x, y, z) for deterministic output.
    """
    pos = slots.all_positions(g.offsets)
    beams = g.beams()
    if not beams:
        raise DegenerateStructureError("graph has no beams")

    node_ids: dict[tuple[int, int, int], int] = {}
    coords: list[np.ndarray] = []
    edge_set: set[tuple[int, int]] = set()

    def node_id(p: np.ndarray) -> int:
        key = _quantize(p)
        if key not in node_ids:
            node_ids[key] = len(coords)
            coords.append(p + 0.0)  # +0.0 turns -0.0 into 0.0
        return node_ids[key]

    for sx in (1.0, -1.0):
        for sy in (1.0, -1.0):
            for sz in (1.0, -1.0):
                sign = np.array([sx, sy, sz])
                for i, j in beams:
                    a = node_id(pos[i] * sign)
                    b = node_id(pos[j] * sign)
                    if a == b:
                        continue
                    edge_set.add((min(a, b), max(a, b)))

    # deterministic ordering: sort nodes lexicographically, remap beams
    order = sorted(range(len(coords)), key=lambda k: tuple(coords[k]))
    remap = {old: new for new, old in enumerate(order)}
    nodes = np.array([coords[k] for k in order])

    weighted = []
    for a, b in sorted(edge_set):
        pa, pb = coords[a], coords[b]
        shared_faces = sum(
            1
            for axis in range(3)
            if abs(abs(pa[axis]) - 1.0) < 1e-9
            and abs(abs(pb[axis]) - 1.0) < 1e-9
            and pa[axis] * pb[axis] > 0
        )
        weight = 1.0 if shared_faces == 0 else (0.5 if shared_faces == 1 else 0.25)
        i, j = remap[a], remap[b]
        weighted.append((min(i, j), max(i, j), weight))
    weighted.sort()

    for i, j, _ in weighted:
        if np.linalg.norm(nodes[i] - nodes[j]) <= 1e-9:
            raise DegenerateStructureError("zero-length beam after reflection")

    return UnitCell(nodes, tuple(weighted))


def radius_for_density(cell: UnitCell, rho: float) -> UnitCell:
    """Strut radius giving relative density ``rho``; joint overlap ignored."""
    if not 0.0 < rho < 1.0:
        raise ValueError(f"relative density must be in (0, 1), got {rho}")
    length = cell.total_weighted_length
    if length <= 0.0:
        raise DegenerateStructureError("total weighted length is zero")
    radius = float(np.sqrt(rho * CELL_VOLUME / (np.pi * length)))
    return cell.with_radius(radius)
