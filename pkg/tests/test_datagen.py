import numpy as np
import pytest

from trusslat import slots
from trusslat.datagen import (
    DatagenConfig,
    GenerationExhaustedError,
    _stream,
    build_library,
    generate_dataset,
    perturb,
)
from trusslat.graph import validate
from trusslat.seeds import bcc_1x, bcc_2x, elementary_seeds, octet_1x, sc_1x, sc_2x


class TestSeeds:
    def test_five_valid_seeds(self):
        seeds = elementary_seeds()
        assert len(seeds) == 5
        for g in seeds:
            assert validate(g).valid
            assert np.all(g.offsets == 0.0)

    def test_sc2x_structure(self):
        g = sc_2x()
        assert len(g.active_nodes()) == 8
        assert len(g.beams()) == 12
        pos = slots.all_positions(g.offsets)
        for i, j in g.beams():
            assert np.linalg.norm(pos[i] - pos[j]) == pytest.approx(1.0)

    def test_bcc1x_contains_body_diagonal(self):
        g = bcc_1x()
        assert (0, 7) in g.beams()
        pos = slots.all_positions(g.offsets)
        assert np.linalg.norm(pos[7] - pos[0]) == pytest.approx(np.sqrt(3.0))

    def test_octet_is_tetrahedron(self):
        g = octet_1x()
        assert len(g.beams()) == 6
        assert len(g.active_nodes()) == 4

    def test_bcc2x_adds_half_diagonals(self):
        g = bcc_2x()
        assert len(g.beams()) == 20
        assert 26 in g.active_nodes()

    def test_distinct(self):
        digests = {g.digest() for g in elementary_seeds()}
        assert len(digests) == 5


class TestPerturb:
    cfg = DatagenConfig(rng_seed=0)

    def test_identity_configuration(self):
        frozen = DatagenConfig(insert_prob=0, remove_prob=0, jitter_scale=0)
        g = sc_2x()
        out = perturb(g, frozen, _stream(1, 0))
        assert out.equals(g)

    def test_jitter_only_keeps_adjacency(self):
        cfg = DatagenConfig(insert_prob=0, remove_prob=0, jitter_scale=0.1)
        g = bcc_2x()
        out = perturb(g, cfg, _stream(2, 0))
        assert np.array_equal(out.adjacency, g.adjacency)
        assert np.all(np.abs(out.offsets) <= 0.45)
        assert not np.array_equal(out.offsets, g.offsets)

    def test_deterministic(self):
        g = octet_1x()
        a = perturb(g, self.cfg, _stream(7, 3))
        b = perturb(g, self.cfg, _stream(7, 3))
        assert a.equals(b)

    def test_always_valid(self):
        for task in range(20):
            out = perturb(sc_1x(), self.cfg, _stream(5, task))
            assert validate(out).valid


class TestGenerateDataset:
    def test_unique_valid_deterministic(self):
        cfg = DatagenConfig(n_library=25, n_dataset=60, rng_seed=123)
        recs1 = generate_dataset(cfg)
        recs2 = generate_dataset(cfg)
        assert len(recs1) == 60
        digests = [r.graph.digest() for r in recs1]
        assert len(set(digests)) == 60
        assert all(validate(r.graph).valid for r in recs1)
        assert all(a.graph.equals(b.graph) for a, b in zip(recs1, recs2))
        assert all(
            a.provenance == b.provenance for a, b in zip(recs1, recs2)
        )

    def test_offsets_within_clearance(self):
        cfg = DatagenConfig(n_library=20, n_dataset=30, rng_seed=321)
        for rec in generate_dataset(cfg):
            assert np.all(np.abs(rec.graph.offsets) <= 0.45 + 1e-12)

    def test_library_budget_error(self):
        # a one-iteration budget cannot reach an absurd library size
        cfg = DatagenConfig(
            n_library=10_000, n_dataset=10, rng_seed=0, library_retry_factor=1
        )
        with pytest.raises(GenerationExhaustedError):
            build_library(cfg)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            DatagenConfig(insert_prob=1.5)
        with pytest.raises(ValueError):
            DatagenConfig(n_dataset=0)
