"""Derived elastic quantities of an orthotropic stiffness record.

Directional Young's modulus from the full compliance tensor, engineering
constants from the inverted normal block, Voigt/Reuss polycrystal averages
and the universal anisotropy index. Voigt matrices use engineering shear
throughout; the tensor shear factors appear only when expanding the
fourth-order compliance tensor for the directional modulus.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .fe import StiffnessRecord

# Voigt pair -> tensor index pairs
_VOIGT_PAIRS = [(0, 0), (1, 1), (2, 2), (1, 2), (2, 0), (0, 1)]


class SPDViolationError(ValueError):
    """Stiffness matrix is not symmetric positive definite."""


def voigt_spd_check(c_voigt: np.ndarray) -> None:
    eig = np.linalg.eigvalsh(0.5 * (c_voigt + c_voigt.T))
    if eig.min() <= 0.0:
        raise SPDViolationError(f"stiffness not SPD (min eigenvalue {eig.min():.3e})")


def compliance_matrix(record: StiffnessRecord) -> np.ndarray:
    """6x6 engineering-shear compliance (inverse of the Voigt stiffness)."""
    c = record.voigt_matrix()
    voigt_spd_check(c)
    s = np.zeros((6, 6))
    s[:3, :3] = np.linalg.inv(c[:3, :3])
    for k in range(3, 6):
        s[k, k] = 1.0 / c[k, k]
    return s


def compliance_tensor(record: StiffnessRecord) -> np.ndarray:
    """Full 3x3x3x3 compliance tensor (tensor-shear convention)."""
    s_voigt = compliance_matrix(record)
    s4 = np.zeros((3, 3, 3, 3))
    for p, (i, j) in enumerate(_VOIGT_PAIRS):
        for q, (k, l) in enumerate(_VOIGT_PAIRS):
            factor = (2.0 if p >= 3 else 1.0) * (2.0 if q >= 3 else 1.0)
            value = s_voigt[p, q] / factor
            for a, b in ((i, j), (j, i)):
                for c, d in ((k, l), (l, k)):
                    s4[a, b, c, d] = value
    return s4


def directional_modulus(record: StiffnessRecord, direction) -> float:
    """Effective Young's modulus along ``direction``: E(d) = 1 / (d d : S : d d)."""
    d = np.asarray(direction, dtype=float)
    norm = np.linalg.norm(d)
    if norm == 0.0:
        raise ValueError("direction must be nonzero")
    if abs(norm - 1.0) > 1e-9:
        warnings.warn("direction not unit length; normalizing", stacklevel=2)
        d = d / norm
    s4 = compliance_tensor(record)
    return float(1.0 / np.einsum("ijkl,i,j,k,l->", s4, d, d, d, d))


def directional_moduli(record: StiffnessRecord, directions: np.ndarray) -> np.ndarray:
    """Vectorized E(d) for an (n, 3) array of unit directions."""
    d = np.asarray(directions, dtype=float)
    d = d / np.linalg.norm(d, axis=1, keepdims=True)
    s4 = compliance_tensor(record)
    return 1.0 / np.einsum("ijkl,ni,nj,nk,nl->n", s4, d, d, d, d)


@dataclass(frozen=True)
class ElasticMetrics:
    e: tuple[float, float, float]              # E_11, E_22, E_33
    g: tuple[float, float, float]              # G_23, G_31, G_12
    nu: dict[str, float]                       # nu_ij, i = loading axis
    k_voigt: float
    g_voigt: float
    k_reuss: float
    g_reuss: float
    anisotropy_index: float


def engineering_constants(record: StiffnessRecord):
    """(E_ii, G_ij, nu_ij) from the inverted normal block.

    Convention: nu_ij = -eps_j / eps_i under uniaxial stress along axis i.
    """
    s = compliance_matrix(record)
    e = tuple(1.0 / s[i, i] for i in range(3))
    g = (record.components[6], record.components[7], record.components[8])
    nu = {}
    for i in range(3):
        for j in range(3):
            if i != j:
                nu[f"nu_{i + 1}{j + 1}"] = float(-s[i, j] / s[i, i])
    return e, g, nu


def polycrystal_averages(record: StiffnessRecord):
    """(K_V, G_V, K_R, G_R, A_U): Voigt/Reuss averages and anisotropy index."""
    c = record.voigt_matrix()
    voigt_spd_check(c)
    s = compliance_matrix(record)

    c_diag = c[0, 0] + c[1, 1] + c[2, 2]
    c_off = c[0, 1] + c[0, 2] + c[1, 2]
    c_shear = c[3, 3] + c[4, 4] + c[5, 5]
    k_voigt = (c_diag + 2.0 * c_off) / 9.0
    g_voigt = (c_diag - c_off + 3.0 * c_shear) / 15.0

    s_diag = s[0, 0] + s[1, 1] + s[2, 2]
    s_off = s[0, 1] + s[0, 2] + s[1, 2]
    s_shear = s[3, 3] + s[4, 4] + s[5, 5]
    k_reuss = 1.0 / (s_diag + 2.0 * s_off)
    g_reuss = 15.0 / (4.0 * s_diag - 4.0 * s_off + 3.0 * s_shear)

    a_u = 5.0 * g_voigt / g_reuss + k_voigt / k_reuss - 6.0
    return k_voigt, g_voigt, k_reuss, g_reuss, a_u


def elastic_metrics(record: StiffnessRecord) -> ElasticMetrics:
    e, g, nu = engineering_constants(record)
    k_v, g_v, k_r, g_r, a_u = polycrystal_averages(record)
    return ElasticMetrics(e, g, nu, k_v, g_v, k_r, g_r, a_u)


def sphere_directions(n_theta: int, n_phi: int) -> np.ndarray:
    """(n, 3) unit directions on a (polar, azimuthal) grid including the poles."""
    thetas = np.linspace(0.0, np.pi, n_theta)
    phis = np.linspace(0.0, 2.0 * np.pi, n_phi, endpoint=False)
    dirs = []
    for th in thetas:
        for ph in phis:
            dirs.append(
                (np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th))
            )
    return np.asarray(dirs)


def surface_table(record: StiffnessRecord, n_theta: int = 33, n_phi: int = 64) -> np.ndarray:
    """(n, 4) rows (dx, dy, dz, E(d)) sampling the elastic surface."""
    dirs = sphere_directions(n_theta, n_phi)
    moduli = directional_moduli(record, dirs)
    return np.column_stack([dirs, moduli])


def isotropic_record(e: float, nu: float) -> StiffnessRecord:
    """Isotropic stiffness from (E, nu), mainly for tests and synthetic inputs."""
    lam = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    mu = e / (2.0 * (1.0 + nu))
    return StiffnessRecord(
        np.array([lam + 2 * mu, lam, lam, lam + 2 * mu, lam, lam + 2 * mu, mu, mu, mu])
    )


def cubic_record(c11: float, c12: float, c44: float) -> StiffnessRecord:
    return StiffnessRecord(np.array([c11, c12, c12, c11, c12, c11, c44, c44, c44]))
