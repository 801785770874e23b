import numpy as np
import pytest

from trusslat.elastic import (
    SPDViolationError,
    compliance_matrix,
    cubic_record,
    directional_moduli,
    directional_modulus,
    elastic_metrics,
    engineering_constants,
    isotropic_record,
    polycrystal_averages,
    sphere_directions,
    surface_table,
)
from trusslat.fe import StiffnessRecord


def random_spd_record(rng) -> StiffnessRecord:
    b = rng.normal(size=(3, 3))
    normal = b @ b.T + 0.5 * np.eye(3)
    shears = rng.uniform(0.2, 2.0, 3)
    return StiffnessRecord(
        np.array([normal[0, 0], normal[0, 1], normal[0, 2], normal[1, 1],
                  normal[1, 2], normal[2, 2], *shears])
    )


class TestDirectionalModulus:
    def test_axis_direction_equals_engineering(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            rec = random_spd_record(rng)
            e, _, _ = engineering_constants(rec)
            for axis in range(3):
                d = np.zeros(3)
                d[axis] = 1.0
                assert directional_modulus(rec, d) == pytest.approx(e[axis], rel=1e-10)

    def test_isotropic_direction_independent(self):
        rec = isotropic_record(1.0, 0.3)
        rng = np.random.default_rng(1)
        dirs = rng.normal(size=(100, 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        e = directional_moduli(rec, dirs)
        assert np.ptp(e) < 1e-10

    def test_cubic_111_against_rotation_oracle(self):
        # rotate the compliance tensor so <111> aligns with e1, then read s11
        rec = cubic_record(2.0, 0.8, 0.6)
        d = np.array([1.0, 1.0, 1.0]) / np.sqrt(3)
        from trusslat.elastic import compliance_tensor

        s4 = compliance_tensor(rec)
        e1 = np.array([1.0, 0.0, 0.0])
        v = np.cross(d, e1)
        c = d @ e1
        vx = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])
        r = np.eye(3) + vx + vx @ vx / (1 + c)  # maps d to e1
        s4_rot = np.einsum("ia,jb,kc,ld,abcd->ijkl", r, r, r, r, s4)
        oracle = 1.0 / s4_rot[0, 0, 0, 0]
        assert directional_modulus(rec, d) == pytest.approx(oracle, rel=1e-10)

    def test_even_function(self):
        rng = np.random.default_rng(3)
        rec = random_spd_record(rng)
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        assert directional_modulus(rec, d) == pytest.approx(
            directional_modulus(rec, -d), rel=1e-12
        )

    def test_nonunit_direction_warns(self):
        rec = isotropic_record(1.0, 0.3)
        with pytest.warns(UserWarning):
            value = directional_modulus(rec, np.array([2.0, 0.0, 0.0]))
        assert value == pytest.approx(1.0, rel=1e-10)

    def test_zero_direction_raises(self):
        with pytest.raises(ValueError):
            directional_modulus(isotropic_record(1.0, 0.3), np.zeros(3))


class TestEngineeringConstants:
    def test_isotropic_roundtrip(self):
        e, g, nu = engineering_constants(isotropic_record(2.0, 0.25))
        assert np.allclose(e, 2.0, rtol=1e-12)
        assert all(v == pytest.approx(0.25, rel=1e-12) for v in nu.values())
        assert np.allclose(g, 2.0 / (2 * 1.25), rtol=1e-12)

    def test_compliance_symmetry_relation(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            rec = random_spd_record(rng)
            e, _, nu = engineering_constants(rec)
            assert nu["nu_12"] / e[0] == pytest.approx(nu["nu_21"] / e[1], rel=1e-12)
            assert nu["nu_13"] / e[0] == pytest.approx(nu["nu_31"] / e[2], rel=1e-12)

    def test_non_spd_raises(self):
        bad = StiffnessRecord(np.array([1, 2, 2, 1, 2, 1, 0.5, 0.5, 0.5]))
        with pytest.raises(SPDViolationError):
            compliance_matrix(bad)


class TestPolycrystalAverages:
    def test_isotropic_all_equal(self):
        k_v, g_v, k_r, g_r, a_u = polycrystal_averages(isotropic_record(1.0, 0.3))
        assert k_v == pytest.approx(1.0 / (3 * (1 - 0.6)), rel=1e-12)
        assert g_v == pytest.approx(1.0 / 2.6, rel=1e-12)
        assert k_r == pytest.approx(k_v, rel=1e-12)
        assert g_r == pytest.approx(g_v, rel=1e-12)
        assert abs(a_u) < 1e-10

    def test_cubic_substitution_oracle(self):
        # frozen values computed by direct substitution before implementation:
        # C11=2, C12=1, C44=0.5 -> K_V=K_R=4/3, G_V=G_R=1/2, A_U=0
        k_v, g_v, k_r, g_r, a_u = polycrystal_averages(cubic_record(2.0, 1.0, 0.5))
        assert k_v == pytest.approx(4.0 / 3.0, abs=1e-12)
        assert k_r == pytest.approx(4.0 / 3.0, abs=1e-12)
        assert g_v == pytest.approx(0.5, abs=1e-12)
        assert g_r == pytest.approx(0.5, abs=1e-12)
        assert abs(a_u) < 1e-12

    def test_anisotropic_cubic_oracle(self):
        # Zener-anisotropic cubic: C11=2, C12=1, C44=1.5
        # K: 4/3 both.  G_V = (1 + 3*1.5*3/3)/5... direct: (3*2-3*1+9*1.5)/15
        c11, c12, c44 = 2.0, 1.0, 1.5
        g_v_expect = (3 * c11 - 3 * c12 + 9 * c44) / 15.0
        s11 = (c11 + c12) / ((c11 - c12) * (c11 + 2 * c12))
        s12 = -c12 / ((c11 - c12) * (c11 + 2 * c12))
        s44 = 1.0 / c44
        g_r_expect = 15.0 / (4 * 3 * s11 - 4 * 3 * s12 + 3 * 3 * s44)
        k_v, g_v, k_r, g_r, a_u = polycrystal_averages(cubic_record(c11, c12, c44))
        assert g_v == pytest.approx(g_v_expect, rel=1e-12)
        assert g_r == pytest.approx(g_r_expect, rel=1e-12)
        assert k_v == pytest.approx(k_r, rel=1e-12)
        assert a_u == pytest.approx(5 * g_v_expect / g_r_expect - 5, rel=1e-9)

    def test_hill_ordering_random(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            k_v, g_v, k_r, g_r, a_u = polycrystal_averages(random_spd_record(rng))
            assert k_v >= k_r - 1e-12
            assert g_v >= g_r - 1e-12
            assert a_u >= -1e-9


class TestSurface:
    def test_direction_grid(self):
        dirs = sphere_directions(5, 8)
        assert dirs.shape == (40, 3)
        assert np.allclose(np.linalg.norm(dirs, axis=1), 1.0, atol=1e-12)

    def test_table_constant_for_isotropy(self):
        table = surface_table(isotropic_record(1.0, 0.3), 9, 16)
        assert table.shape == (9 * 16, 4)
        assert np.ptp(table[:, 3]) < 1e-10


class TestMetricsBundle:
    def test_fields(self):
        m = elastic_metrics(isotropic_record(1.0, 0.3))
        assert m.k_voigt == pytest.approx(m.k_reuss, rel=1e-12)
        assert len(m.nu) == 6
        assert m.anisotropy_index == pytest.approx(0.0, abs=1e-10)
