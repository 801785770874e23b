import numpy as np
import pytest

from trusslat.latent import (
    TraversalSpec,
    neighborhood,
    sample_prior,
    slerp,
    slerp_path,
    traverse,
)
from trusslat.vae import decode


class TestSlerp:
    rng = np.random.default_rng(0)

    def test_endpoints_exact(self):
        z1 = self.rng.normal(size=8)
        z2 = self.rng.normal(size=8)
        assert np.array_equal(slerp(z1, z2, 0.0), z1)
        assert np.array_equal(slerp(z1, z2, 1.0), z2)

    def test_orthonormal_midpoint(self):
        z1 = np.zeros(4)
        z2 = np.zeros(4)
        z1[0] = 1.0
        z2[1] = 1.0
        mid = slerp(z1, z2, 0.5)
        assert np.allclose(mid, (z1 + z2) / np.sqrt(2.0), atol=1e-12)

    def test_near_parallel_falls_back_to_lerp(self):
        z1 = np.array([1.0, 0.0])
        z2 = z1 * 3.0
        for alpha in (0.25, 0.5, 0.75):
            assert np.allclose(slerp(z1, z2, alpha), (1 - alpha) * z1 + alpha * z2)

    def test_zero_vector_raises(self):
        with pytest.raises(ValueError):
            slerp(np.zeros(3), np.ones(3), 0.5)

    def test_norm_follows_closed_form(self):
        z1 = self.rng.normal(size=6)
        z2 = self.rng.normal(size=6)
        n1, n2 = np.linalg.norm(z1), np.linalg.norm(z2)
        cos = np.clip(z1 @ z2 / (n1 * n2), -1, 1)
        theta = np.arccos(cos)
        for alpha in np.linspace(0, 1, 7):
            z = slerp(z1, z2, alpha)
            direct = (
                np.sin((1 - alpha) * theta) / np.sin(theta) * z1
                + np.sin(alpha * theta) / np.sin(theta) * z2
            )
            assert np.allclose(z, direct, atol=1e-12)

    def test_path_shape(self):
        z1, z2 = self.rng.normal(size=5), self.rng.normal(size=5)
        path = slerp_path(z1, z2, 9)
        assert path.shape == (9, 5)


class TestSamplePrior:
    def test_empty(self, tiny_model):
        model, _ = tiny_model
        samples, validity = sample_prior(model, 0, np.random.default_rng(0))
        assert samples == [] and np.isnan(validity)

    def test_deterministic(self, tiny_model):
        model, _ = tiny_model
        s1, v1 = sample_prior(model, 20, np.random.default_rng(5))
        s2, v2 = sample_prior(model, 20, np.random.default_rng(5))
        assert v1 == v2
        for a, b in zip(s1, s2):
            assert np.array_equal(a.z, b.z)
            assert a.result.graph.equals(b.result.graph)


class TestTraverse:
    def test_axis_kinds(self, tiny_model):
        model, _ = tiny_model
        layout = model.layout  # (8, 6, 2): topo 0..5, shared 6..7, geometry 8..11
        assert layout.axis_kind(0) == "topology"
        assert layout.axis_kind(layout.d_a - 1) == "shared"
        assert layout.axis_kind(layout.d - 1) == "geometry"
        with pytest.raises(ValueError):
            layout.axis_kind(layout.d)

    def test_geometry_axis_leaves_logits_bit_identical(self, tiny_model):
        model, _ = tiny_model
        base = np.random.default_rng(3).standard_normal(model.layout.d)
        spec = TraversalSpec(base, model.layout.d - 1, -2.0, 2.0, 7)
        points, kind = traverse(spec, model)
        assert kind == "geometry"
        ref = points[0].result.logits
        for pt in points[1:]:
            assert np.array_equal(pt.result.logits, ref)

    def test_topology_axis_leaves_offsets_bit_identical(self, tiny_model):
        model, _ = tiny_model
        base = np.random.default_rng(4).standard_normal(model.layout.d)
        spec = TraversalSpec(base, 0, -2.0, 2.0, 7)
        points, kind = traverse(spec, model)
        assert kind == "topology"
        ref = points[0].result.offsets
        for pt in points[1:]:
            assert np.array_equal(pt.result.offsets, ref)

    def test_zero_width_range(self, tiny_model):
        model, _ = tiny_model
        base = np.zeros(model.layout.d)
        points, _ = traverse(TraversalSpec(base, 2, 0.7, 0.7, 3), model)
        for pt in points[1:]:
            assert pt.result.graph.equals(points[0].result.graph)

    def test_step_minimum(self):
        with pytest.raises(ValueError):
            TraversalSpec(np.zeros(4), 0, 0.0, 1.0, 1)


class TestNeighborhood:
    def test_sigma_zero_limit(self, tiny_model):
        model, _ = tiny_model
        rng = np.random.default_rng(9)
        z0 = rng.standard_normal(model.layout.d)
        base = decode(z0, model)
        samples = neighborhood(z0, 1e-12, 5, np.random.default_rng(1), model)
        for s in samples:
            assert s.result.graph.equals(base.graph)

    def test_requires_positive_sigma(self, tiny_model):
        model, _ = tiny_model
        with pytest.raises(ValueError):
            neighborhood(np.zeros(model.layout.d), 0.0, 3, np.random.default_rng(0), model)

    def test_deterministic(self, tiny_model):
        model, _ = tiny_model
        z0 = np.zeros(model.layout.d)
        a = neighborhood(z0, 0.5, 8, np.random.default_rng(2), model)
        b = neighborhood(z0, 0.5, 8, np.random.default_rng(2), model)
        for s, t in zip(a, b):
            assert np.array_equal(s.z, t.z)
