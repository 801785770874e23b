"""Variational autoencoder with overlapping topology/geometry embeddings
and a jointly trained property predictor.

Adjacency (351 upper-triangle bits) and node offsets (27 reals) pass
through separate encoders whose posterior means and log-sigmas are merged
by partial overlap: the first latent dimensions are topology-specific, a
middle band is the average of both encoders (shared), and the tail is
geometry-specific. Two decoders consume the complementary halves. The
predictor maps the posterior mean to normalized property labels.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import slots
from .autodiff import NumericError, Tensor, binarize_straight_through, concat, parameter
from .datagen import DatasetRecord
from .graph import TrussGraph
from .nn import AdamState, MlpSpec, ParamBlock, adam_step, forward, glorot_init, mlp
from .slots import N_SLOTS, N_UPPER, OFFSET_BOUND

_TRIU = np.triu_indices(N_SLOTS, k=1)

PROPERTY_DIMS = {"stiffness9": 9, "curve13": 13}

STRAIN_POINTS = tuple(0.005 + 0.02 * i for i in range(13))  # curve13 strain grid


class TrainingDivergedError(RuntimeError):
    def __init__(self, message: str, state: "ModelState"):
        super().__init__(message)
        self.state = state


@dataclass(frozen=True)
class PropertyVector:
    kind: str
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if self.kind not in PROPERTY_DIMS:
            raise ValueError(f"unknown property kind {self.kind!r}")
        if values.shape != (PROPERTY_DIMS[self.kind],):
            raise ValueError(
                f"{self.kind} expects {PROPERTY_DIMS[self.kind]} values, got {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("property values must be finite")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class LatentLayout:
    d_a: int = 16
    d_x: int = 28
    d_ax: int = 4

    def __post_init__(self):
        if self.d_ax < 0 or self.d_ax > min(self.d_a, self.d_x):
            raise ValueError("need 0 <= d_ax <= min(d_a, d_x)")

    @property
    def d(self) -> int:
        return self.d_a + self.d_x - self.d_ax

    def axis_kind(self, axis: int) -> str:
        if not 0 <= axis < self.d:
            raise ValueError(f"axis {axis} outside latent dimension {self.d}")
        if axis < self.d_a - self.d_ax:
            return "topology"
        if axis < self.d_a:
            return "shared"
        return "geometry"


@dataclass(frozen=True)
class ArchitectureConfig:
    enc_a_hidden: tuple[int, ...] = (256, 128)
    enc_x_hidden: tuple[int, ...] = (128, 128)
    dec_a_hidden: tuple[int, ...] = (128, 256)
    dec_x_hidden: tuple[int, ...] = (128, 128)
    predictor_hidden: tuple[int, ...] = (128, 128)
    activation: str = "tanh"


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    batch_size: int = 256
    learning_rate: float = 1e-3
    beta_cycle: int = 100
    beta_onset: int = 50
    beta_slope: float = 0.025
    rng_seed: int = 0
    split: tuple[float, float, float] = (0.90, 0.01, 0.09)
    weight_recon_a: float = float(N_UPPER)
    weight_recon_x: float = 100.0 * slots.N_OFFSETS
    weight_property: float = 9.0

    def __post_init__(self):
        if self.beta_onset >= self.beta_cycle:
            raise ValueError("beta_onset must be smaller than beta_cycle")
        if abs(sum(self.split) - 1.0) > 1e-9 or any(f < 0 for f in self.split):
            raise ValueError("split fractions must be nonnegative and sum to 1")


@dataclass(frozen=True)
class ModelState:
    """All trainable parameters plus label normalization and layout."""

    layout: LatentLayout
    enc_a: ParamBlock
    enc_x: ParamBlock
    dec_a: ParamBlock
    dec_x: ParamBlock
    predictor: ParamBlock
    label_mean: np.ndarray
    label_std: np.ndarray
    property_kind: str
    config_digest: str = ""

    def __post_init__(self):
        std = np.asarray(self.label_std, dtype=float)
        if np.any(std <= 0):
            raise ValueError("label stds must be positive")
        object.__setattr__(self, "label_mean", np.asarray(self.label_mean, dtype=float))
        object.__setattr__(self, "label_std", std)

    @property
    def blocks(self) -> dict[str, ParamBlock]:
        return {
            "enc_a": self.enc_a,
            "enc_x": self.enc_x,
            "dec_a": self.dec_a,
            "dec_x": self.dec_x,
            "predictor": self.predictor,
        }

    def with_blocks(self, blocks: dict[str, ParamBlock]) -> "ModelState":
        return replace(self, **blocks)


def config_digest(*configs) -> str:
    blob = json.dumps([asdict(c) for c in configs], sort_keys=True, default=list)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def init_model(
    layout: LatentLayout,
    arch: ArchitectureConfig,
    property_kind: str,
    rng: np.random.Generator,
    digest: str = "",
) -> ModelState:
    n_props = PROPERTY_DIMS[property_kind]
    act = arch.activation
    specs = {
        "enc_a": mlp((N_UPPER, *arch.enc_a_hidden, 2 * layout.d_a), hidden=act),
        "enc_x": mlp((slots.N_OFFSETS, *arch.enc_x_hidden, 2 * layout.d_x), hidden=act),
        "dec_a": mlp((layout.d_a, *arch.dec_a_hidden, N_UPPER), hidden=act),
        "dec_x": mlp((layout.d_x, *arch.dec_x_hidden, slots.N_OFFSETS), hidden=act, out="tanh"),
        "predictor": mlp((layout.d, *arch.predictor_hidden, n_props), hidden=act),
    }
    blocks = {name: glorot_init(spec, rng) for name, spec in specs.items()}
    return ModelState(
        layout=layout,
        label_mean=np.zeros(n_props),
        label_std=np.ones(n_props),
        property_kind=property_kind,
        config_digest=digest,
        **blocks,
    )


# -- serialization ------------------------------------------------------


def serialize(g: TrussGraph) -> tuple[np.ndarray, np.ndarray]:
    """Graph -> (351 upper-triangle binaries, 27 packed offsets)."""
    a_vec = g.adjacency[_TRIU].astype(np.float64)
    return a_vec, g.offsets.copy()


def deserialize(a_vec: np.ndarray, x_vec: np.ndarray) -> TrussGraph:
    """Exact inverse of serialize on well-formed graphs."""
    adj = np.eye(N_SLOTS, dtype=np.uint8)
    bits = (np.asarray(a_vec, dtype=float) > 0.5).astype(np.uint8)
    adj[_TRIU] = bits
    adj.T[_TRIU] = bits
    off = np.asarray(x_vec, dtype=np.float64).copy()
    deg = adj.sum(axis=1) - 1
    for s in range(N_SLOTS):
        if deg[s] == 0:
            off[slots.offset_slice(s)] = 0.0
    return TrussGraph(adj, off)


def records_to_arrays(records: list[DatasetRecord]):
    """Stack records into (A, X, Y) matrices; Y is None when unlabeled."""
    a = np.zeros((len(records), N_UPPER))
    x = np.zeros((len(records), slots.N_OFFSETS))
    ys = []
    for i, rec in enumerate(records):
        a[i], x[i] = serialize(rec.graph)
        ys.append(rec.properties)
    y = None if any(v is None for v in ys) else np.asarray(ys, dtype=float)
    return a, x, y


# -- encode / decode ----------------------------------------------------


def _compose_overlap(layout: LatentLayout, part_a: Tensor, part_x: Tensor) -> Tensor:
    """Eq.-style partial overlap of the two encoder outputs."""
    d_a, d_ax = layout.d_a, layout.d_ax
    pieces = [
        part_a[:, : d_a - d_ax],
        (part_a[:, d_a - d_ax :] + part_x[:, :d_ax]) * 0.5,
        part_x[:, d_ax:],
    ]
    return concat(pieces, axis=1)


def encode_tensors(model_params: dict[str, Tensor], model: ModelState,
                   a: Tensor, x: Tensor) -> tuple[Tensor, Tensor]:
    layout = model.layout
    out_a = forward(model.enc_a.spec, model_params["enc_a"], a)
    out_x = forward(model.enc_x.spec, model_params["enc_x"], x)
    mu = _compose_overlap(layout, out_a[:, : layout.d_a], out_x[:, : layout.d_x])
    log_sigma = _compose_overlap(layout, out_a[:, layout.d_a :], out_x[:, layout.d_x :])
    return mu, log_sigma


def _const_params(model: ModelState) -> dict[str, Tensor]:
    return {name: Tensor(block.flat) for name, block in model.blocks.items()}


def encode(g: TrussGraph | tuple[np.ndarray, np.ndarray], model: ModelState):
    """Posterior (mu, log_sigma) of one graph or a pre-serialized batch."""
    if isinstance(g, TrussGraph):
        a_vec, x_vec = serialize(g)
        a_vec, x_vec = a_vec[None], x_vec[None]
        single = True
    else:
        a_vec, x_vec = g
        a_vec, x_vec = np.atleast_2d(a_vec), np.atleast_2d(x_vec)
        single = False
    mu, log_sigma = encode_tensors(_const_params(model), model, Tensor(a_vec), Tensor(x_vec))
    if single:
        return mu.data[0], log_sigma.data[0]
    return mu.data, log_sigma.data


def reparameterize(mu: np.ndarray, log_sigma: np.ndarray, eps: np.ndarray) -> np.ndarray:
    """z = mu + eps * exp(log_sigma)."""
    return np.asarray(mu) + np.asarray(eps) * np.exp(np.asarray(log_sigma))


def decode_tensors(model_params: dict[str, Tensor], model: ModelState, z: Tensor):
    """(adjacency logits, bounded offsets) for a batch of latent vectors."""
    layout = model.layout
    logits = forward(model.dec_a.spec, model_params["dec_a"], z[:, : layout.d_a])
    x_out = forward(model.dec_x.spec, model_params["dec_x"], z[:, layout.d_a - layout.d_ax :])
    return logits, x_out * OFFSET_BOUND


@dataclass(frozen=True)
class DecodeResult:
    logits: np.ndarray
    offsets: np.ndarray
    graph: TrussGraph


def assemble_graph(logits_row: np.ndarray, offsets_row: np.ndarray) -> TrussGraph:
    """Threshold logits (sigmoid > 0.5, i.e. logit > 0, ties excluded) into a graph."""
    bits = (logits_row > 0.0).astype(np.float64)
    return deserialize(bits, offsets_row)


def decode(z: np.ndarray, model: ModelState):
    """Decode one latent vector (returns DecodeResult) or a batch (list)."""
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    zb = np.atleast_2d(z)
    logits, x_out = decode_tensors(_const_params(model), model, Tensor(zb))
    results = [
        DecodeResult(logits.data[i], x_out.data[i], assemble_graph(logits.data[i], x_out.data[i]))
        for i in range(len(zb))
    ]
    return results[0] if single else results


def normalize_labels(model: ModelState, y: np.ndarray) -> np.ndarray:
    return (y - model.label_mean) / model.label_std


def denormalize_labels(model: ModelState, y: np.ndarray) -> np.ndarray:
    return y * model.label_std + model.label_mean


def predict_properties(mu: np.ndarray, model: ModelState) -> np.ndarray:
    """De-normalized property prediction from the posterior mean."""
    mu = np.asarray(mu, dtype=float)
    single = mu.ndim == 1
    pred = forward(model.predictor.spec, Tensor(model.predictor.flat), Tensor(np.atleast_2d(mu)))
    out = denormalize_labels(model, pred.data)
    return out[0] if single else out


def predict_property_vector(mu: np.ndarray, model: ModelState) -> PropertyVector:
    return PropertyVector(model.property_kind, predict_properties(mu, model))


# -- losses and schedule -------------------------------------------------


@dataclass(frozen=True)
class LossTerms:
    total: float
    recon_a: float
    recon_x: float
    prop: float
    kld: float


def kld_closed_form(mu: Tensor, log_sigma: Tensor) -> Tensor:
    """Per-batch mean of the closed-form KL divergence to N(0, I)."""
    s2 = (log_sigma * 2.0).exp()
    return ((s2 + mu**2 - 1.0 - log_sigma * 2.0) * 0.5).sum(axis=1).mean()


def loss_tensors(
    model_params: dict[str, Tensor],
    model: ModelState,
    batch: tuple[np.ndarray, np.ndarray, np.ndarray | None],
    beta: float,
    eps: np.ndarray,
    weights: tuple[float, float, float] = (1.0, 1.0, 1.0),
) -> dict[str, Tensor]:
    """Eq.-4-style joint loss: reconstruction + property + beta * KLD.

    Components are MSEs (means over entries); ``weights`` rescales them
    (the training default uses entry counts, recovering the literal
    squared-norm form). The predictor consumes the posterior mean, never
    the sampled z.
    """
    a_vec, x_vec, y = batch
    a_t, x_t = Tensor(a_vec), Tensor(x_vec)
    mu, log_sigma = encode_tensors(model_params, model, a_t, x_t)
    z = mu + Tensor(eps) * log_sigma.exp()
    logits, x_out = decode_tensors(model_params, model, z)

    recon_a = ((logits.sigmoid() - a_t) ** 2).mean(axis=1).mean()
    recon_x = ((x_out - x_t) ** 2).mean(axis=1).mean()
    if y is not None:
        pred = forward(model.predictor.spec, model_params["predictor"], mu)
        prop = ((pred - Tensor(y)) ** 2).mean(axis=1).mean()
    else:
        prop = Tensor(0.0)
    kld = kld_closed_form(mu, log_sigma)
    w_a, w_x, w_p = weights
    total = recon_a * w_a + recon_x * w_x + prop * w_p + kld * beta
    return {"total": total, "recon_a": recon_a, "recon_x": recon_x, "prop": prop, "kld": kld}


def loss(
    batch, model: ModelState, beta: float, eps: np.ndarray | None = None,
    weights: tuple[float, float, float] = (1.0, 1.0, 1.0),
) -> LossTerms:
    """Evaluate the joint loss (no gradients); eps defaults to zero draws."""
    a_vec = np.atleast_2d(batch[0])
    if eps is None:
        eps = np.zeros((len(a_vec), model.layout.d))
    terms = loss_tensors(_const_params(model), model,
                         (a_vec, np.atleast_2d(batch[1]),
                          None if batch[2] is None else np.atleast_2d(batch[2])),
                         beta, eps, weights)
    out = LossTerms(**{k: float(v.data) for k, v in terms.items()})
    if not np.isfinite(out.total):
        raise NumericError("non-finite loss")
    return out


def beta_schedule(epoch: int, cfg: TrainConfig) -> float:
    """Cyclical KL weight: 0 before the onset, then a linear ramp capped at 1."""
    if epoch < 0:
        raise ValueError("epoch must be nonnegative")
    local = epoch % cfg.beta_cycle
    if local < cfg.beta_onset:
        return 0.0
    return min(1.0, cfg.beta_slope * (local - cfg.beta_onset))


# -- training -------------------------------------------------------------


def split_indices(n: int, split, rng: np.random.Generator):
    order = rng.permutation(n)
    n_train = int(round(split[0] * n))
    n_val = int(round(split[1] * n))
    return order[:n_train], order[n_train : n_train + n_val], order[n_train + n_val :]


def dataset_split(n: int, cfg: TrainConfig):
    """The exact (train, val, test) index split train() will use for ``cfg``."""
    seq = np.random.SeedSequence(cfg.rng_seed)
    rng_split = np.random.default_rng(seq.spawn(3)[1])
    return split_indices(n, cfg.split, rng_split)


@dataclass
class EpochStats:
    epoch: int
    beta: float
    total: float
    recon_a: float
    recon_x: float
    prop: float
    kld: float
    val_total: float


def train(
    records: list[DatasetRecord],
    cfg: TrainConfig,
    layout: LatentLayout | None = None,
    arch: ArchitectureConfig | None = None,
    property_kind: str = "stiffness9",
) -> tuple[ModelState, list[EpochStats]]:
    """Joint mini-batch Adam training; deterministic under a fixed seed."""
    layout = layout or LatentLayout()
    arch = arch or ArchitectureConfig()
    a_all, x_all, y_all = records_to_arrays(records)
    if y_all is None:
        raise ValueError("records must be labeled before training")
    if y_all.shape[1] != PROPERTY_DIMS[property_kind]:
        raise ValueError(
            f"labels have {y_all.shape[1]} columns, expected {PROPERTY_DIMS[property_kind]}"
        )

    seq = np.random.SeedSequence(cfg.rng_seed)
    spawned = seq.spawn(3)
    rng_init, rng_train = np.random.default_rng(spawned[0]), np.random.default_rng(spawned[2])
    idx_train, idx_val, _ = dataset_split(len(records), cfg)
    if len(idx_train) == 0:
        raise ValueError("empty training split")

    label_mean = y_all[idx_train].mean(axis=0)
    label_std = y_all[idx_train].std(axis=0)
    label_std[label_std < 1e-12] = 1.0

    digest = config_digest(cfg, layout, arch)
    model = replace(
        init_model(layout, arch, property_kind, rng_init, digest),
        label_mean=label_mean,
        label_std=label_std,
    )
    y_norm = (y_all - label_mean) / label_std

    adam = {
        name: AdamState.init(block.spec.n_params, lr=cfg.learning_rate)
        for name, block in model.blocks.items()
    }
    weights = (cfg.weight_recon_a, cfg.weight_recon_x, cfg.weight_property)
    history: list[EpochStats] = []
    last_good = model

    for epoch in range(cfg.epochs):
        beta = beta_schedule(epoch, cfg)
        order = rng_train.permutation(len(idx_train))
        sums = np.zeros(5)
        n_batches = 0
        for start in range(0, len(order), cfg.batch_size):
            sel = idx_train[order[start : start + cfg.batch_size]]
            eps = rng_train.standard_normal((len(sel), layout.d))
            params = {name: parameter(block.flat) for name, block in model.blocks.items()}
            terms = loss_tensors(
                params, model, (a_all[sel], x_all[sel], y_norm[sel]), beta, eps, weights
            )
            total = terms["total"]
            if not np.isfinite(total.data):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}", last_good
                )
            total.backward()
            new_blocks = {}
            for name, block in model.blocks.items():
                grad = params[name].grad
                if grad is None:
                    grad = np.zeros_like(block.flat)
                new_flat, adam[name] = adam_step(adam[name], block.flat, grad)
                new_blocks[name] = block.with_flat(new_flat)
            model = model.with_blocks(new_blocks)
            sums += [float(terms[k].data) for k in ("total", "recon_a", "recon_x", "prop", "kld")]
            n_batches += 1

        means = sums / max(n_batches, 1)
        if len(idx_val) > 0:
            val = loss(
                (a_all[idx_val], x_all[idx_val], y_norm[idx_val]),
                model, beta, eps=np.zeros((len(idx_val), layout.d)), weights=weights,
            ).total
        else:
            val = float("nan")
        history.append(EpochStats(epoch, beta, *means.tolist(), val))
        last_good = model

    return model, history


# -- evaluation ------------------------------------------------------------


def pooled_r2(y_true: np.ndarray, y_pred: np.ndarray) -> float:
    """Variance-weighted R^2 pooled over all output components."""
    resid = np.sum((y_true - y_pred) ** 2)
    total = np.sum((y_true - y_true.mean(axis=0)) ** 2)
    return float(1.0 - resid / total) if total > 0 else float("nan")


def per_component_r2(y_true: np.ndarray, y_pred: np.ndarray) -> np.ndarray:
    resid = np.sum((y_true - y_pred) ** 2, axis=0)
    total = np.sum((y_true - y_true.mean(axis=0)) ** 2, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        return 1.0 - resid / total


@dataclass(frozen=True)
class EvalMetrics:
    topology_accuracy: float
    r2_offsets: float
    r2_properties: float
    validity_score: float
    r2_offsets_components: np.ndarray
    r2_properties_components: np.ndarray


def evaluate(
    model: ModelState,
    records: list[DatasetRecord],
    n_prior: int = 1000,
    rng: np.random.Generator | None = None,
) -> EvalMetrics:
    """Reconstruction/prediction quality on a test set plus the validity score."""
    from .graph import repair  # local import to keep module load light

    a, x, y = records_to_arrays(records)
    mu, _ = encode((a, x), model)
    logits, x_out = decode_tensors(_const_params(model), model, Tensor(mu))
    bits = (logits.data > 0.0).astype(float)
    accuracy = float((bits == a).mean())
    r2_x = pooled_r2(x, x_out.data)
    if y is not None:
        pred = predict_properties(mu, model)
        r2_y = pooled_r2(y, pred)
        r2_y_comp = per_component_r2(y, pred)
    else:
        r2_y, r2_y_comp = float("nan"), np.array([])

    rng = rng or np.random.default_rng(0)
    n_valid = 0
    if n_prior > 0:
        zs = rng.standard_normal((n_prior, model.layout.d))
        for res in decode(zs, model):
            if repair(res.graph) is not None:
                n_valid += 1
    validity = n_valid / n_prior if n_prior > 0 else float("nan")

    return EvalMetrics(
        accuracy, r2_x, r2_y, validity, per_component_r2(x, x_out.data), r2_y_comp
    )
