"""Linear Timoshenko-beam FE homogenization with periodic boundary conditions.

Each strut is a 2-node, 12-DOF space frame element (axial, torsion, two
shear-flexible bending planes) with a circular section; the share weight of
boundary-coincident beams scales the section properties. The effective
stiffness follows from the energy bilinear form of the six unit macroscopic
strain cases under periodic displacement fluctuations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .graph import CELL_VOLUME, DegenerateStructureError, UnitCell


class MechanismError(RuntimeError):
    """Singular periodic stiffness: the cell carries a zero-energy mechanism."""


class SymmetryViolationError(RuntimeError):
    """Orthotropy-forbidden couplings exceed tolerance (broken reflection symmetry)."""


@dataclass(frozen=True)
class MaterialParams:
    e_s: float = 1.0
    nu_s: float = 0.3

    def __post_init__(self):
        if self.e_s <= 0.0:
            raise ValueError("e_s must be positive")
        if not -1.0 < self.nu_s < 0.5:
            raise ValueError("nu_s must be in (-1, 0.5)")

    @property
    def g_s(self) -> float:
        return self.e_s / (2.0 * (1.0 + self.nu_s))

    @property
    def shear_correction(self) -> float:
        # Cowper's factor for a solid circular section
        return 6.0 * (1.0 + self.nu_s) / (7.0 + 6.0 * self.nu_s)


@dataclass(frozen=True)
class StiffnessRecord:
    """The 9 orthotropic components (C1111, C1122, C1133, C2222, C2233, C3333,
    C2323, C3131, C1212), in units of the base Young's modulus."""

    components: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.components, dtype=float)
        if c.shape != (9,):
            raise ValueError("expected 9 stiffness components")
        c = np.ascontiguousarray(c)
        c.flags.writeable = False
        object.__setattr__(self, "components", c)

    def voigt_matrix(self) -> np.ndarray:
        """6x6 engineering-shear Voigt matrix (orthotropic block structure)."""
        c11, c12, c13, c22, c23, c33, c44, c55, c66 = self.components
        m = np.zeros((6, 6))
        m[:3, :3] = [[c11, c12, c13], [c12, c22, c23], [c13, c23, c33]]
        m[3, 3], m[4, 4], m[5, 5] = c44, c55, c66
        return m

    @staticmethod
    def from_voigt(matrix: np.ndarray) -> "StiffnessRecord":
        m = np.asarray(matrix, dtype=float)
        return StiffnessRecord(
            np.array([m[0, 0], m[0, 1], m[0, 2], m[1, 1], m[1, 2], m[2, 2],
                      m[3, 3], m[4, 4], m[5, 5]])
        )


def element_stiffness(p_i, p_j, radius: float, weight: float, mat: MaterialParams) -> np.ndarray:
    """12x12 global-axes stiffness of one Timoshenko frame element.

    Section properties scale linearly with the share weight:
    A = w*pi*r^2, I = w*pi*r^4/4, J = 2I.
    """
    p_i = np.asarray(p_i, float)
    p_j = np.asarray(p_j, float)
    d = p_j - p_i
    length = float(np.linalg.norm(d))
    if length <= 1e-9:
        raise DegenerateStructureError("zero-length beam element")
    if radius <= 0.0:
        raise ValueError("radius must be positive")

    area = weight * np.pi * radius**2
    inertia = weight * np.pi * radius**4 / 4.0
    torsion = 2.0 * inertia
    e, g = mat.e_s, mat.g_s
    kappa = mat.shear_correction
    phi = 12.0 * e * inertia / (kappa * g * area * length**2)

    k = np.zeros((12, 12))
    ax = e * area / length
    k[np.ix_([0, 6], [0, 6])] = ax * np.array([[1, -1], [-1, 1]])
    tor = g * torsion / length
    k[np.ix_([3, 9], [3, 9])] = tor * np.array([[1, -1], [-1, 1]])

    b = e * inertia / (length**3 * (1.0 + phi))
    l = length
    # bending in the local x-y plane (deflection u_y, rotation theta_z)
    kb = b * np.array(
        [
            [12, 6 * l, -12, 6 * l],
            [6 * l, (4 + phi) * l**2, -6 * l, (2 - phi) * l**2],
            [-12, -6 * l, 12, -6 * l],
            [6 * l, (2 - phi) * l**2, -6 * l, (4 + phi) * l**2],
        ]
    )
    k[np.ix_([1, 5, 7, 11], [1, 5, 7, 11])] += kb
    # bending in the local x-z plane (deflection u_z, rotation theta_y)
    kc = b * np.array(
        [
            [12, -6 * l, -12, -6 * l],
            [-6 * l, (4 + phi) * l**2, 6 * l, (2 - phi) * l**2],
            [-12, 6 * l, 12, 6 * l],
            [-6 * l, (2 - phi) * l**2, 6 * l, (4 + phi) * l**2],
        ]
    )
    k[np.ix_([2, 4, 8, 10], [2, 4, 8, 10])] += kc

    # local-to-global rotation; the roll angle is arbitrary for a circular section
    x_hat = d / length
    ref = np.array([0.0, 0.0, 1.0])
    if abs(x_hat @ ref) > 0.999:
        ref = np.array([0.0, 1.0, 0.0])
    y_hat = np.cross(ref, x_hat)
    y_hat /= np.linalg.norm(y_hat)
    z_hat = np.cross(x_hat, y_hat)
    rot = np.vstack([x_hat, y_hat, z_hat])
    t = np.zeros((12, 12))
    for blk in range(4):
        t[3 * blk : 3 * blk + 3, 3 * blk : 3 * blk + 3] = rot
    return t.T @ k @ t


def _strain_tensors() -> np.ndarray:
    """Six unit macroscopic strain cases (3 normal + 3 engineering shear)."""
    cases = np.zeros((6, 3, 3))
    for a in range(3):
        cases[a, a, a] = 1.0
    for a, (i, j) in enumerate([(1, 2), (2, 0), (0, 1)], start=3):
        cases[a, i, j] = cases[a, j, i] = 0.5
    return cases


_COUPLING_MASK = np.zeros((6, 6), dtype=bool)
_COUPLING_MASK[:3, 3:] = True
_COUPLING_MASK[3:, :3] = True
for _i in range(3, 6):
    for _j in range(3, 6):
        if _i != _j:
            _COUPLING_MASK[_i, _j] = True


def _periodic_masters(nodes: np.ndarray, period: float = 2.0) -> np.ndarray:
    """Map node -> representative under identification of opposite faces.

    Faces are located from the cell's own bounding box, so rigid
    translations of the node coordinates do not change the pairing.
    """
    lo = nodes.min(axis=0)
    canon = nodes.copy()
    for a in range(3):
        wrap = np.abs(canon[:, a] - (lo[a] + period)) < 1e-9
        canon[wrap, a] = lo[a]
    keys = np.round((canon - lo) / 1e-9).astype(np.int64)
    index: dict[tuple[int, int, int], int] = {}
    master = np.zeros(len(nodes), dtype=int)
    for n, key in enumerate(map(tuple, keys.tolist())):
        if key not in index:
            index[key] = n
        master[n] = index[key]
    return master


def homogenize_stiffness(
    cell: UnitCell, mat: MaterialParams | None = None, coupling_tol: float = 1e-8
) -> StiffnessRecord:
    """Effective orthotropic stiffness of a periodic unit cell.

    Assembles the 6-DOF/node frame stiffness, couples opposite-face nodes
    (equal rotations, displacements differing by the affine map of the
    macroscopic strain), pins one master node's translations, solves the six
    unit strain cases and reads C off the energy bilinear form. The twelve
    couplings forbidden by orthotropy are checked against ``coupling_tol``
    times max|C| and then zeroed.
    """
    if mat is None:
        mat = MaterialParams()
    if cell.radius <= 0.0:
        raise ValueError("cell radius not set; call radius_for_density first")

    nodes = cell.nodes
    n_nodes = len(nodes)
    n_dof = 6 * n_nodes
    k_full = np.zeros((n_dof, n_dof))
    for i, j, w in cell.beams:
        ke = element_stiffness(nodes[i], nodes[j], cell.radius, w, mat)
        dofs = np.r_[6 * i : 6 * i + 6, 6 * j : 6 * j + 6]
        k_full[np.ix_(dofs, dofs)] += ke

    master = _periodic_masters(nodes)
    reps = np.unique(master)
    rep_index = {int(r): k for k, r in enumerate(reps)}
    n_red = 6 * len(reps)

    # reduced dof of each full dof
    red_of = np.zeros(n_dof, dtype=int)
    for n in range(n_nodes):
        r = rep_index[int(master[n])]
        red_of[6 * n : 6 * n + 6] = np.arange(6 * r, 6 * r + 6)

    t_map = np.zeros((n_dof, n_red))
    t_map[np.arange(n_dof), red_of] = 1.0

    # affine displacement of the six strain cases: u = eps x, rotations zero
    u_aff = np.zeros((n_dof, 6))
    for a, eps in enumerate(_strain_tensors()):
        u_aff[0 : n_dof : 6, a] = nodes @ eps[0]
        u_aff[1 : n_dof : 6, a] = nodes @ eps[1]
        u_aff[2 : n_dof : 6, a] = nodes @ eps[2]

    k_red = t_map.T @ k_full @ t_map
    f_red = -t_map.T @ (k_full @ u_aff)

    # pin the translations of the first master node (rigid modes)
    keep = np.ones(n_red, dtype=bool)
    keep[0:3] = False
    kk = k_red[np.ix_(keep, keep)]
    ff = f_red[keep]
    try:
        cho = scipy.linalg.cho_factor(kk, check_finite=False)
        q = scipy.linalg.cho_solve(cho, ff, check_finite=False)
    except (scipy.linalg.LinAlgError, np.linalg.LinAlgError) as exc:
        raise MechanismError(f"singular periodic stiffness: {exc}") from exc

    a_mat = u_aff.T @ k_full @ u_aff
    c_voigt = (a_mat + f_red[keep].T @ q) / CELL_VOLUME
    c_voigt = 0.5 * (c_voigt + c_voigt.T)

    scale = np.max(np.abs(c_voigt))
    couplings = np.abs(c_voigt[_COUPLING_MASK])
    if np.any(couplings >= coupling_tol * scale):
        raise SymmetryViolationError(
            f"orthotropy couplings up to {couplings.max():.3e} vs limit "
            f"{coupling_tol * scale:.3e}"
        )
    c_voigt[_COUPLING_MASK] = 0.0
    return StiffnessRecord.from_voigt(c_voigt)
