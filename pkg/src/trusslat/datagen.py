"""Stochastic dataset generation: perturbation, superposition, dedup.

Randomness is drawn from numpy SeedSequence sub-streams keyed by the
config seed and a task index, so generation is reproducible bit-for-bit
and independent of how the work is scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import slots
from .graph import TrussGraph, superpose, validate
from .seeds import elementary_seeds
from .slots import OFFSET_BOUND, VERTEX_SLOTS, offset_slice


class GenerationExhaustedError(RuntimeError):
    """Raised when the retry budget runs out before enough unique graphs exist."""


@dataclass(frozen=True)
class DatagenConfig:
    n_library: int = 200
    n_dataset: int = 2000
    n_perturb_iters: int = 10
    insert_prob: float = 0.3
    remove_prob: float = 0.2
    jitter_scale: float = 0.3
    rng_seed: int = 0
    library_retry_factor: int = 40
    dataset_retry_factor: int = 50

    def __post_init__(self):
        for name in ("insert_prob", "remove_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {p}")
        if self.n_library <= 0 or self.n_dataset <= 0 or self.n_perturb_iters < 0:
            raise ValueError("counts must be positive")


@dataclass(frozen=True)
class Provenance:
    parent_a: int
    parent_b: int
    stream: int


@dataclass
class DatasetRecord:
    graph: TrussGraph
    properties: np.ndarray | None = None
    provenance: Provenance = field(default_factory=lambda: Provenance(0, 0, 0))


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def _try_insert(g: TrussGraph, rng: np.random.Generator) -> TrussGraph:
    active = g.active_nodes()
    inactive = [s for s in range(slots.N_SLOTS) if s not in set(active.tolist())]
    if not inactive or len(active) < 2:
        return g
    slot = int(rng.choice(inactive))
    off = g.offsets.copy()
    sl = offset_slice(slot)
    off[sl] = rng.uniform(-OFFSET_BOUND, OFFSET_BOUND, size=sl.stop - sl.start)
    pos = slots.all_positions(off)
    dists = np.linalg.norm(pos[active] - pos[slot], axis=1)
    k = min(int(rng.integers(2, 4)), len(active))
    nearest = active[np.argsort(dists, kind="stable")[:k]]
    adj = g.adjacency.copy()
    for n in nearest:
        adj[slot, n] = adj[n, slot] = 1
    return TrussGraph(adj, off)


def _try_remove(g: TrussGraph, rng: np.random.Generator) -> TrussGraph:
    removable = [s for s in g.active_nodes() if s not in VERTEX_SLOTS]
    if not removable:
        return g
    slot = int(rng.choice(removable))
    adj = g.adjacency.copy()
    adj[slot, :] = 0
    adj[:, slot] = 0
    adj[slot, slot] = 1
    off = g.offsets.copy()
    off[offset_slice(slot)] = 0.0
    return TrussGraph(adj, off)


def _jitter(g: TrussGraph, scale: float, rng: np.random.Generator) -> TrussGraph:
    if scale == 0.0:
        return g
    off = g.offsets.copy()
    for s in g.active_nodes():
        sl = offset_slice(s)
        off[sl] += rng.uniform(-0.5, 0.5, size=sl.stop - sl.start) * scale
    np.clip(off, -OFFSET_BOUND, OFFSET_BOUND, out=off)
    return TrussGraph(g.adjacency, off)


def perturb(g: TrussGraph, cfg: DatagenConfig, rng: np.random.Generator) -> TrussGraph:
    """Apply cfg.n_perturb_iters random insert/remove/jitter rounds.

    Every round is validated; an invalid outcome is rolled back and
    resampled (up to 20 attempts, then the round is skipped), so the
    result is always valid when the input is.
    """
    current = g
    for _ in range(cfg.n_perturb_iters):
        for _attempt in range(20):
            trial = current
            if rng.random() < cfg.insert_prob:
                trial = _try_insert(trial, rng)
            if rng.random() < cfg.remove_prob:
                trial = _try_remove(trial, rng)
            trial = _jitter(trial, cfg.jitter_scale, rng)
            if validate(trial).valid:
                current = trial
                break
    return current


def build_library(cfg: DatagenConfig) -> list[TrussGraph]:
    """Perturb the elementary seeds until cfg.n_library unique valid graphs exist."""
    seeds = elementary_seeds()
    library: list[TrussGraph] = []
    seen: set[str] = set()
    budget = cfg.library_retry_factor * cfg.n_library
    for task in range(budget):
        seed_idx = task % len(seeds)
        g = perturb(seeds[seed_idx], cfg, _stream(cfg.rng_seed, 0, task))
        digest = g.digest()
        if digest not in seen:
            seen.add(digest)
            library.append(g)
            if len(library) >= cfg.n_library:
                return library
    raise GenerationExhaustedError(
        f"library budget exhausted: {len(library)}/{cfg.n_library} unique graphs"
    )


def generate_dataset(cfg: DatagenConfig) -> list[DatasetRecord]:
    """Superpose random library pairs into cfg.n_dataset unique valid graphs.

    Rejected superpositions (offset conflicts, unresolvable intersections,
    invalid unions) are skipped; duplicates are removed by content hash.
    """
    library = build_library(cfg)
    records: list[DatasetRecord] = []
    seen: set[str] = set()
    budget = cfg.dataset_retry_factor * cfg.n_dataset
    for task in range(budget):
        rng = _stream(cfg.rng_seed, 1, task)
        ia = int(rng.integers(0, len(library)))
        ib = int(rng.integers(0, len(library)))
        merged = superpose(library[ia], library[ib])
        if merged is None or not validate(merged).valid:
            continue
        digest = merged.digest()
        if digest in seen:
            continue
        seen.add(digest)
        records.append(DatasetRecord(merged, provenance=Provenance(ia, ib, task)))
        if len(records) >= cfg.n_dataset:
            return records
    raise GenerationExhaustedError(
        f"dataset budget exhausted: {len(records)}/{cfg.n_dataset} unique graphs"
    )
