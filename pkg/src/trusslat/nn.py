"""Dense networks over flat parameter vectors, plus the Adam optimizer.

Parameters of one network live in a single flat float64 vector with a
layout map, so gradients, optimizer state and checkpoints are plain
arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .autodiff import Tensor, parameter

ACTIVATIONS = ("tanh", "relu", "sigmoid", "identity")


@dataclass(frozen=True)
class MlpSpec:
    layer_widths: tuple[int, ...]
    activations: tuple[str, ...]

    def __post_init__(self):
        if len(self.layer_widths) < 2:
            raise ValueError("an MLP needs at least input and output widths")
        if any(w <= 0 for w in self.layer_widths):
            raise ValueError("layer widths must be positive")
        if len(self.activations) != len(self.layer_widths) - 1:
            raise ValueError("need one activation per affine layer")
        for a in self.activations:
            if a not in ACTIVATIONS:
                raise ValueError(f"unknown activation {a!r}")
        object.__setattr__(self, "layer_widths", tuple(int(w) for w in self.layer_widths))
        object.__setattr__(self, "activations", tuple(self.activations))

    @property
    def n_params(self) -> int:
        return sum(
            nin * nout + nout
            for nin, nout in zip(self.layer_widths[:-1], self.layer_widths[1:])
        )


def mlp(widths, hidden="tanh", out="identity") -> MlpSpec:
    widths = tuple(widths)
    return MlpSpec(widths, tuple([hidden] * (len(widths) - 2) + [out]))


@dataclass(frozen=True)
class ParamBlock:
    """Flat parameter vector of one MlpSpec."""

    spec: MlpSpec
    flat: np.ndarray

    def __post_init__(self):
        flat = np.asarray(self.flat, dtype=np.float64)
        if flat.shape != (self.spec.n_params,):
            raise ValueError(
                f"expected {self.spec.n_params} parameters, got {flat.shape}"
            )
        if not np.all(np.isfinite(flat)):
            raise ValueError("parameters must be finite")
        flat = np.ascontiguousarray(flat)
        flat.flags.writeable = False
        object.__setattr__(self, "flat", flat)

    def with_flat(self, flat: np.ndarray) -> "ParamBlock":
        return ParamBlock(self.spec, flat)


def glorot_init(spec: MlpSpec, rng: np.random.Generator) -> ParamBlock:
    """Uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases."""
    chunks = []
    for nin, nout in zip(spec.layer_widths[:-1], spec.layer_widths[1:]):
        bound = np.sqrt(6.0 / (nin + nout))
        chunks.append(rng.uniform(-bound, bound, size=nin * nout))
        chunks.append(np.zeros(nout))
    return ParamBlock(spec, np.concatenate(chunks))


def _apply_activation(x: Tensor, name: str) -> Tensor:
    if name == "tanh":
        return x.tanh()
    if name == "relu":
        return x.relu()
    if name == "sigmoid":
        return x.sigmoid()
    return x


def forward(spec: MlpSpec, params: Tensor | ParamBlock, x: Tensor) -> Tensor:
    """Batched MLP forward pass; ``x`` has shape (batch, in_width)."""
    theta = params if isinstance(params, Tensor) else Tensor(params.flat)
    if x.shape[-1] != spec.layer_widths[0]:
        raise ValueError(
            f"input width {x.shape[-1]} != spec width {spec.layer_widths[0]}"
        )
    offset = 0
    out = x
    for nin, nout, act in zip(
        spec.layer_widths[:-1], spec.layer_widths[1:], spec.activations
    ):
        w = theta[offset : offset + nin * nout].reshape(nin, nout)
        offset += nin * nout
        b = theta[offset : offset + nout]
        offset += nout
        out = _apply_activation(out @ w + b, act)
    return out


def forward_array(spec: MlpSpec, params: ParamBlock, x: np.ndarray) -> np.ndarray:
    """Inference-only forward pass on plain arrays."""
    return forward(spec, Tensor(params.flat), Tensor(np.atleast_2d(x))).data


def gradient(loss_fn, params: ParamBlock) -> np.ndarray:
    """Exact reverse-mode gradient of a scalar loss over a parameter block."""
    theta = parameter(params.flat)
    loss = loss_fn(theta)
    loss.check_finite("loss")
    loss.backward()
    return theta.grad.copy()


@dataclass(frozen=True)
class AdamState:
    """Bias-corrected Adam state for one flat parameter vector."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @staticmethod
    def init(n_params: int, lr: float = 1e-3, beta1: float = 0.9,
             beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        return AdamState(np.zeros(n_params), np.zeros(n_params), 0, lr, beta1, beta2, eps)


def adam_step(state: AdamState, params: np.ndarray, grads: np.ndarray):
    """One bias-corrected Adam update; returns (new_params, new_state)."""
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ValueError("parameter/gradient/state shapes disagree")
    step = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grads
    v = state.beta2 * state.v + (1.0 - state.beta2) * grads**2
    m_hat = m / (1.0 - state.beta1**step)
    v_hat = v / (1.0 - state.beta2**step)
    new_params = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new_params, replace(state, m=m, v=v, step=step)
