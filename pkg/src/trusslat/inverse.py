"""Gradient-based inverse design in the latent space.

Per optimization step the candidate latent vectors are decoded, the decoded
graphs are re-encoded (binary adjacency crossing the threshold via a
straight-through estimator), and the property predictor evaluates the
projected posterior mean. Invalid decodes receive a constant penalty and
the iterate falls back. Final ranking is by FE re-homogenization; the
original seed structures stay in the candidate pool, so the returned best
is never worse than the best seed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import slots
from .autodiff import (
    Tensor,
    binarize_straight_through,
    concat,
    eigenvalues_symmetric,
    parameter,
)
from .datagen import DatasetRecord
from .fe import (
    MaterialParams,
    MechanismError,
    SymmetryViolationError,
    homogenize_stiffness,
)
from .graph import (
    DegenerateStructureError,
    TrussGraph,
    radius_for_density,
    reflect_to_cell,
    repair,
)
from .nn import AdamState, adam_step, forward
from .slots import FREE_SLOT_INDEX
from .vae import (
    ModelState,
    PropertyVector,
    assemble_graph,
    decode_tensors,
    encode,
    encode_tensors,
    records_to_arrays,
)

OBJECTIVE_KINDS = ("max_e22", "min_nu21", "max_kvgv", "match_curve", "match_stiffness")
_MATCH_KINDS = {"match_curve": "curve13", "match_stiffness": "stiffness9"}


class OptimizationFailedError(RuntimeError):
    """Every seed decoded to an unrepairable structure throughout the run."""


@dataclass(frozen=True)
class Objective:
    kind: str
    target: PropertyVector | None = None

    def __post_init__(self):
        if self.kind not in OBJECTIVE_KINDS:
            raise ValueError(f"unknown objective kind {self.kind!r}")
        if self.kind in _MATCH_KINDS:
            if self.target is None:
                raise ValueError(f"{self.kind} requires a target")
            if self.target.kind != _MATCH_KINDS[self.kind]:
                raise ValueError(
                    f"{self.kind} needs a {_MATCH_KINDS[self.kind]} target, "
                    f"got {self.target.kind}"
                )

    @property
    def property_kind(self) -> str:
        return "curve13" if self.kind == "match_curve" else "stiffness9"

    @property
    def sign(self) -> int:
        """-1 for maximized quantities (internally everything is minimized)."""
        return -1 if self.kind in ("max_e22", "max_kvgv") else 1


def _sqrt(x):
    return x.sqrt() if isinstance(x, Tensor) else np.sqrt(x)


def _col(c, i):
    return c[:, i]


def stiffness_objective(components, kind: str):
    """Scalar-to-minimize from (batch, 9) stiffness components.

    Works on numpy arrays and autodiff tensors alike; only ratios of
    homogeneous-degree-1 quantities appear, so rescaling all components
    leaves the argmin unchanged.
    """
    c11, c12, c13 = _col(components, 0), _col(components, 1), _col(components, 2)
    c22, c23, c33 = _col(components, 3), _col(components, 4), _col(components, 5)
    c44, c55, c66 = _col(components, 6), _col(components, 7), _col(components, 8)
    if kind == "max_e22":
        det = (
            c11 * (c22 * c33 - c23**2)
            - c12 * (c12 * c33 - c23 * c13)
            + c13 * (c12 * c23 - c22 * c13)
        )
        e22 = det / (c11 * c33 - c13**2)
        return -e22
    if kind == "min_nu21":
        nu21 = (c12 * c33 - c13 * c23) / (c11 * c33 - c13**2)
        return nu21
    if kind == "max_kvgv":
        diag = c11 + c22 + c33
        off = c12 + c13 + c23
        k_v = (diag + 2.0 * off) / 9.0
        g_v = (diag - off + 3.0 * (c44 + c55 + c66)) / 15.0
        return -(k_v / g_v)
    raise ValueError(f"not a stiffness objective: {kind}")


def nrmse(pred, target: np.ndarray):
    """RMSE normalized by max|target| over the last axis."""
    scale = float(np.max(np.abs(target)))
    if scale == 0.0:
        raise ValueError("target is identically zero")
    diff = pred - target
    return _sqrt((diff**2).mean(axis=1)) / scale


def objective_value(props: PropertyVector, objective: Objective) -> float:
    """Evaluate the objective on a single property vector (lower is better)."""
    if props.kind != objective.property_kind:
        raise ValueError(
            f"objective {objective.kind} expects {objective.property_kind}, "
            f"got {props.kind}"
        )
    row = props.values[None, :]
    if objective.kind in _MATCH_KINDS:
        return float(nrmse(row, objective.target.values[None, :])[0])
    return float(stiffness_objective(row, objective.kind)[0])


_NORMAL_BLOCK_COLS = (0, 1, 2, 1, 3, 4, 2, 4, 5)


def _spd_barrier(components: Tensor, tau: float, scale: float) -> Tensor:
    """Smoothed log-barrier pushing the normal 3x3 block toward SPD."""
    b = components.shape[0]
    cols = [components[:, c].reshape(b, 1) for c in _NORMAL_BLOCK_COLS]
    blocks = concat(cols, axis=1).reshape(b, 3, 3)
    lam = eigenvalues_symmetric(blocks)
    return ((lam * (-1.0 / scale)).softplus()).sum(axis=1) * tau


# -- seeding ---------------------------------------------------------------


@dataclass(frozen=True)
class Seed:
    mu: np.ndarray
    graph: TrussGraph | None = None
    label: np.ndarray | None = None


def seed_selection(
    records: list[DatasetRecord], objective: Objective, model: ModelState, k: int = 100
) -> list[Seed]:
    """The k dataset entries closest to the objective, encoded to posterior means."""
    labeled = [r for r in records if r.properties is not None]
    if not labeled:
        raise ValueError("seed selection needs labeled records")
    values = np.array(
        [
            objective_value(PropertyVector(model.property_kind, r.properties), objective)
            for r in labeled
        ]
    )
    if k > len(labeled):
        warnings.warn(
            f"requested {k} seeds but only {len(labeled)} labeled records; truncating",
            stacklevel=2,
        )
        k = len(labeled)
    order = np.argsort(values, kind="stable")[:k]
    chosen = [labeled[i] for i in order]
    a, x, _ = records_to_arrays(chosen)
    mu, _ = encode((a, x), model)
    return [
        Seed(mu[i], graph=chosen[i].graph, label=chosen[i].properties)
        for i in range(len(chosen))
    ]


# -- projection -------------------------------------------------------------


@dataclass(frozen=True)
class Projection:
    mu: np.ndarray
    predicted: np.ndarray
    graphs: list[TrussGraph]
    repaired: list[TrussGraph | None]
    objective: np.ndarray
    total: Tensor | None


def _const_params(model: ModelState) -> dict[str, Tensor]:
    return {name: Tensor(block.flat) for name, block in model.blocks.items()}


_PAIR_TO_NODES = np.zeros((slots.N_UPPER, slots.N_SLOTS))
for _p, (_i, _j) in enumerate(zip(*np.triu_indices(slots.N_SLOTS, k=1))):
    _PAIR_TO_NODES[_p, _i] = 1.0
    _PAIR_TO_NODES[_p, _j] = 1.0


def project_objective(
    z: Tensor,
    model: ModelState,
    objective: Objective,
    penalty: float = 1e6,
    barrier_tau: float = 1e-4,
    barrier_scale: float = 1e-3,
    adjacency_mode: str = "straight_through",
) -> Projection:
    """Decode -> re-encode -> predict -> objective, batched over rows of z.

    ``adjacency_mode`` selects what the re-encoder sees across the binary
    threshold: 'straight_through' (binary forward, identity gradient),
    'probabilities' (smooth sigmoid everywhere) or 'detached' (binary,
    no adjacency gradient; the offsets branch stays differentiable).
    """
    params = _const_params(model)
    logits, x_out = decode_tensors(params, model, z)
    probs = logits.sigmoid()
    bits_data = (logits.data > 0.0).astype(np.float64)
    if adjacency_mode == "straight_through":
        a_input = binarize_straight_through(probs)
    elif adjacency_mode == "probabilities":
        a_input = probs
    elif adjacency_mode == "detached":
        a_input = Tensor(bits_data)
    else:
        raise ValueError(f"unknown adjacency mode {adjacency_mode!r}")

    degree = bits_data @ _PAIR_TO_NODES
    mask = (degree > 0).astype(np.float64)[:, FREE_SLOT_INDEX]
    x_masked = x_out * Tensor(mask)

    mu, _ = encode_tensors(params, model, a_input, x_masked)
    pred_norm = forward(model.predictor.spec, params["predictor"], mu)
    pred = pred_norm * Tensor(model.label_std) + Tensor(model.label_mean)

    if objective.kind in _MATCH_KINDS:
        per_row = nrmse(pred, objective.target.values[None, :])
    else:
        per_row = stiffness_objective(pred, objective.kind)
        per_row = per_row + _spd_barrier(pred, barrier_tau, barrier_scale)

    graphs = [assemble_graph(bits_data[i], x_masked.data[i]) for i in range(len(bits_data))]
    repaired = [repair(g) for g in graphs]
    valid = np.array([r is not None for r in repaired], dtype=float)

    total = (per_row * Tensor(valid)).sum()
    obj_values = np.where(valid > 0, per_row.data, penalty)
    return Projection(mu.data, pred.data, graphs, repaired, obj_values, total)


def project_and_predict(z: np.ndarray, model: ModelState):
    """Single-vector projection: (projected mu, PropertyVector, decoded graph)."""
    zt = Tensor(np.atleast_2d(np.asarray(z, dtype=float)))
    params = _const_params(model)
    logits, x_out = decode_tensors(params, model, zt)
    bits = (logits.data > 0.0).astype(np.float64)
    degree = bits @ _PAIR_TO_NODES
    mask = (degree > 0).astype(np.float64)[:, FREE_SLOT_INDEX]
    x_masked = x_out.data * mask
    graph = assemble_graph(bits[0], x_masked[0])
    mu, _ = encode(graph, model)
    from .vae import predict_property_vector

    return mu, predict_property_vector(mu, model), graph


# -- optimization -----------------------------------------------------------


@dataclass(frozen=True)
class OptimConfig:
    learning_rate: float = 0.01
    max_steps: int = 500
    patience: int = 50
    penalty: float = 1e6
    barrier_tau: float = 1e-4
    barrier_scale: float = 1e-3
    adjacency_mode: str = "straight_through"
    n_seeds: int = 100


@dataclass
class SeedTrajectory:
    seed_index: int
    z_path: np.ndarray
    objective_path: np.ndarray
    digests: list[str]
    best_step: int = -1
    best_objective: float = float("inf")
    best_graph: TrussGraph | None = None


@dataclass
class Candidate:
    seed_index: int
    source: str  # "seed" or "optimized"
    graph: TrussGraph
    predicted_objective: float | None = None
    fe_properties: np.ndarray | None = None
    fe_objective: float | None = None
    fe_failure: str | None = None


@dataclass
class OptimRun:
    objective: Objective
    trajectories: list[SeedTrajectory]
    candidates: list[Candidate]
    best: Candidate | None
    fe_verified: bool


def optimize(
    objective: Objective,
    seeds: list[Seed],
    model: ModelState,
    cfg: OptimConfig | None = None,
    material: MaterialParams | None = None,
    rho: float = 0.15,
) -> OptimRun:
    """Adam on the latent vectors of all seeds in parallel.

    Each seed tracks its best-by-predicted candidate; early stopping freezes
    a seed after ``patience`` steps without improvement, and rejected decodes
    keep the previous iterate. The candidate pool (original seed structures
    plus per-seed optima) is ranked by FE-recomputed properties.
    """
    if not seeds:
        raise ValueError("need at least one seed")
    cfg = cfg or OptimConfig()
    material = material or MaterialParams()
    if model.property_kind != objective.property_kind:
        raise ValueError(
            f"model predicts {model.property_kind}, objective needs "
            f"{objective.property_kind}"
        )

    z = np.array([s.mu for s in seeds], dtype=float)
    n, d = z.shape
    adam = AdamState.init(n * d, lr=cfg.learning_rate)
    frozen = np.zeros(n, dtype=bool)
    stale = np.zeros(n, dtype=int)

    trajectories = [
        SeedTrajectory(i, np.zeros((0, d)), np.zeros(0), []) for i in range(n)
    ]
    z_hist: list[np.ndarray] = []
    obj_hist: list[np.ndarray] = []

    any_valid_ever = False
    for _step in range(cfg.max_steps):
        zt = parameter(z)
        proj = project_objective(
            zt, model, objective,
            penalty=cfg.penalty, barrier_tau=cfg.barrier_tau,
            barrier_scale=cfg.barrier_scale, adjacency_mode=cfg.adjacency_mode,
        )
        z_hist.append(z.copy())
        obj_hist.append(proj.objective.copy())
        for i in range(n):
            trajectories[i].digests.append(proj.graphs[i].digest())
            if proj.repaired[i] is not None:
                any_valid_ever = True
                if proj.objective[i] < trajectories[i].best_objective - 1e-15:
                    trajectories[i].best_objective = float(proj.objective[i])
                    trajectories[i].best_step = _step
                    trajectories[i].best_graph = proj.repaired[i]
                    stale[i] = 0
                else:
                    stale[i] += 1
            else:
                stale[i] += 1
        frozen |= stale >= cfg.patience
        if frozen.all() or _step == cfg.max_steps - 1:
            break

        proj.total.backward()
        grad = zt.grad if zt.grad is not None else np.zeros_like(z)
        z_new, adam = adam_step(adam, z.ravel(), grad.ravel())
        z_new = z_new.reshape(n, d)
        hold = frozen | np.array([r is None for r in proj.repaired])
        z_new[hold] = z[hold]
        z = z_new

    if not any_valid_ever:
        raise OptimizationFailedError("all seeds decoded to unrepairable structures")

    for i in range(n):
        trajectories[i].z_path = np.array([zh[i] for zh in z_hist])
        trajectories[i].objective_path = np.array([oh[i] for oh in obj_hist])

    candidates: list[Candidate] = []
    seen: set[str] = set()
    for i, seed in enumerate(seeds):
        if seed.graph is not None:
            dig = seed.graph.digest()
            if dig not in seen:
                seen.add(dig)
                cand = Candidate(i, "seed", seed.graph)
                if seed.label is not None and objective.property_kind == "stiffness9":
                    cand.fe_properties = np.asarray(seed.label, dtype=float)
                candidates.append(cand)
        traj = trajectories[i]
        if traj.best_graph is not None:
            dig = traj.best_graph.digest()
            if dig not in seen:
                seen.add(dig)
                candidates.append(
                    Candidate(i, "optimized", traj.best_graph,
                              predicted_objective=traj.best_objective)
                )

    fe_verified = _fe_rank(candidates, objective, material, rho)
    best = candidates[0] if candidates else None
    return OptimRun(objective, trajectories, candidates, best, fe_verified)


def _fe_rank(candidates: list[Candidate], objective: Objective,
             material: MaterialParams, rho: float) -> bool:
    """Attach FE objectives and sort candidates in place; False for curve13."""
    if objective.property_kind != "stiffness9":
        candidates.sort(
            key=lambda c: (c.predicted_objective if c.predicted_objective is not None
                           else np.inf)
        )
        return False
    for cand in candidates:
        if cand.fe_properties is None:
            try:
                cell = radius_for_density(reflect_to_cell(cand.graph), rho)
                cand.fe_properties = homogenize_stiffness(cell, material).components
            except (MechanismError, DegenerateStructureError,
                    SymmetryViolationError, ValueError) as exc:
                cand.fe_failure = str(exc)
                continue
        cand.fe_objective = objective_value(
            PropertyVector("stiffness9", cand.fe_properties), objective
        )
    candidates.sort(
        key=lambda c: c.fe_objective if c.fe_objective is not None else np.inf
    )
    return True


def verify(
    candidates: list[Candidate], objective: Objective,
    material: MaterialParams | None = None, rho: float = 0.15,
) -> tuple[list[Candidate], bool]:
    """FE-recompute and re-rank candidates; skipped (False) for curve13."""
    material = material or MaterialParams()
    for cand in candidates:
        cand.fe_properties = None
        cand.fe_objective = None
        cand.fe_failure = None
    verified = _fe_rank(candidates, objective, material, rho)
    return candidates, verified
