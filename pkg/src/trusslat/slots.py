"""27-slot node table of the octant design domain.

The octant [0,1]^3 carries a fixed catalog of candidate node sites:
8 vertices (fixed), 12 edge midpoints (movable along the edge), 6 face
centers (movable in the face) and one body node (movable in 3D). Movable
coordinates are ``0.5 + offset`` with the offset bounded away from the
octant boundary by a clearance so nodes never coincide.
"""

from __future__ import annotations

import hashlib

import numpy as np

N_SLOTS = 27
N_OFFSETS = 27  # 12 edge + 6*2 face + 3 body free coordinates
N_UPPER = N_SLOTS * (N_SLOTS - 1) // 2  # 351 upper-triangle adjacency entries

OFFSET_BOUND = 0.45  # 0.5 minus the 0.05 clearance

KIND_VERTEX = "vertex"
KIND_EDGE = "edge"
KIND_FACE = "face"
KIND_BODY = "body"


def _build_table():
    kinds = []
    nominal = np.zeros((N_SLOTS, 3))
    free_axes = []

    # vertices 0..7: binary corners, x-major order
    for i in (0, 1):
        for j in (0, 1):
            for k in (0, 1):
                idx = 4 * i + 2 * j + k
                nominal[idx] = (i, j, k)
                kinds.append(KIND_VERTEX)
                free_axes.append(())
    # edges 8..19: midpoints, grouped by the free axis
    for axis in range(3):
        fixed = [a for a in range(3) if a != axis]
        for u in (0, 1):
            for v in (0, 1):
                idx = len(kinds)
                pos = np.full(3, 0.5)
                pos[fixed[0]] = u
                pos[fixed[1]] = v
                nominal[idx] = pos
                kinds.append(KIND_EDGE)
                free_axes.append((axis,))
    # faces 20..25: centers, fixed axis ascending, low face before high face
    for axis in range(3):
        for side in (0, 1):
            idx = len(kinds)
            pos = np.full(3, 0.5)
            pos[axis] = side
            nominal[idx] = pos
            kinds.append(KIND_FACE)
            free_axes.append(tuple(a for a in range(3) if a != axis))
    # body 26
    nominal[26] = (0.5, 0.5, 0.5)
    kinds.append(KIND_BODY)
    free_axes.append((0, 1, 2))

    nominal.flags.writeable = False
    return tuple(kinds), nominal, tuple(free_axes)


SLOT_KINDS, NOMINAL_POSITIONS, FREE_AXES = _build_table()

VERTEX_SLOTS = tuple(i for i, k in enumerate(SLOT_KINDS) if k == KIND_VERTEX)

# packed offset vector layout: one scalar per free axis, slots in index order
_starts = []
_n = 0
for _i in range(N_SLOTS):
    _starts.append(_n)
    _n += len(FREE_AXES[_i])
assert _n == N_OFFSETS
OFFSET_START = tuple(_starts)


def offset_slice(slot: int) -> slice:
    """Slice of the packed offset vector owned by ``slot``."""
    start = OFFSET_START[slot]
    return slice(start, start + len(FREE_AXES[slot]))


def node_position(slot: int, offsets: np.ndarray, check: bool = True) -> np.ndarray:
    """Realized coordinate of ``slot`` in the octant given packed offsets.

    Free-axis coordinates are ``0.5 + offset``; fixed axes keep their nominal
    value. Raises ValueError for offsets outside ``[-OFFSET_BOUND, OFFSET_BOUND]``
    unless ``check`` is disabled.
    """
    pos = NOMINAL_POSITIONS[slot].copy()
    lam = np.asarray(offsets, dtype=float)[offset_slice(slot)]
    if check and np.any(np.abs(lam) > OFFSET_BOUND + 1e-12):
        raise ValueError(f"offset out of range for slot {slot}: {lam}")
    for axis, value in zip(FREE_AXES[slot], lam):
        pos[axis] = 0.5 + value
    return pos


# owner slot and axis of each packed offset entry
FREE_SLOT_INDEX = np.array(
    [s for s in range(N_SLOTS) for _ in FREE_AXES[s]], dtype=np.intp
)
FREE_AXIS_INDEX = np.array(
    [a for s in range(N_SLOTS) for a in FREE_AXES[s]], dtype=np.intp
)


def all_positions(offsets: np.ndarray, check: bool = False) -> np.ndarray:
    """(27, 3) realized coordinates for every slot."""
    if check and np.any(np.abs(offsets) > OFFSET_BOUND + 1e-12):
        raise ValueError("offset out of range")
    pos = NOMINAL_POSITIONS.copy()
    pos[FREE_SLOT_INDEX, FREE_AXIS_INDEX] = 0.5 + np.asarray(offsets, dtype=float)
    return pos


def offsets_for_point(slot: int, point: np.ndarray, tol: float = 1e-6):
    """Packed offset values placing ``slot`` at ``point``, or None.

    Returns None when a fixed coordinate disagrees with ``point`` beyond
    ``tol`` or a required offset falls outside the clearance bounds.
    """
    point = np.asarray(point, dtype=float)
    free = FREE_AXES[slot]
    values = np.zeros(len(free))
    for a in range(3):
        if a in free:
            lam = point[a] - 0.5
            if abs(lam) > OFFSET_BOUND + tol:
                return None
            values[free.index(a)] = np.clip(lam, -OFFSET_BOUND, OFFSET_BOUND)
        elif abs(point[a] - NOMINAL_POSITIONS[slot][a]) > tol:
            return None
    return values


def slot_table_hash() -> str:
    """Stable digest of the compiled slot table used in file headers."""
    h = hashlib.sha256()
    for i in range(N_SLOTS):
        h.update(SLOT_KINDS[i].encode())
        h.update(NOMINAL_POSITIONS[i].tobytes())
        h.update(bytes(FREE_AXES[i]))
    return h.hexdigest()[:16]
