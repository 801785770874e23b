"""Latent-space exploration: prior sampling, axis traversal, spherical
interpolation and neighborhood sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import TrussGraph, repair
from .vae import DecodeResult, ModelState, decode, predict_properties


@dataclass(frozen=True)
class LatentSample:
    z: np.ndarray
    result: DecodeResult
    repaired: TrussGraph | None

    @property
    def valid(self) -> bool:
        return self.repaired is not None


def sample_prior(model: ModelState, n: int, rng: np.random.Generator):
    """Decode n standard-normal draws; returns (samples, validity fraction)."""
    if n == 0:
        return [], float("nan")
    zs = rng.standard_normal((n, model.layout.d))
    results = decode(zs, model)
    samples = [LatentSample(z, res, repair(res.graph)) for z, res in zip(zs, results)]
    validity = sum(s.valid for s in samples) / n
    return samples, validity


def slerp(z1: np.ndarray, z2: np.ndarray, alpha: float) -> np.ndarray:
    """Spherical linear interpolation along the great arc between z1 and z2.

    The angle comes from the normalized dot product; nearly parallel inputs
    fall back to linear interpolation.
    """
    z1 = np.asarray(z1, dtype=float)
    z2 = np.asarray(z2, dtype=float)
    n1, n2 = np.linalg.norm(z1), np.linalg.norm(z2)
    if n1 == 0.0 or n2 == 0.0:
        raise ValueError("slerp endpoints must be nonzero")
    cos_theta = np.clip(z1 @ z2 / (n1 * n2), -1.0, 1.0)
    theta = np.arccos(cos_theta)
    if theta < 1e-6:
        return (1.0 - alpha) * z1 + alpha * z2
    s = np.sin(theta)
    return np.sin((1.0 - alpha) * theta) / s * z1 + np.sin(alpha * theta) / s * z2


def slerp_path(z1: np.ndarray, z2: np.ndarray, steps: int) -> np.ndarray:
    return np.array([slerp(z1, z2, a) for a in np.linspace(0.0, 1.0, steps)])


@dataclass(frozen=True)
class TraversalSpec:
    base: np.ndarray
    axis: int
    lo: float
    hi: float
    steps: int

    def __post_init__(self):
        if self.steps < 2:
            raise ValueError("traversal needs at least 2 steps")
        object.__setattr__(self, "base", np.asarray(self.base, dtype=float))
        if not 0 <= self.axis < len(self.base):
            raise ValueError("axis outside latent dimension")


@dataclass(frozen=True)
class TraversalPoint:
    z: np.ndarray
    value: float
    result: DecodeResult
    repaired: TrussGraph | None
    properties: np.ndarray


def traverse(spec: TraversalSpec, model: ModelState):
    """Vary one latent axis; decode and property-predict each point.

    Returns (points, axis kind); the kind names which latent partition the
    axis belongs to (topology-specific, shared, geometry-specific).
    """
    kind = model.layout.axis_kind(spec.axis)
    values = np.linspace(spec.lo, spec.hi, spec.steps)
    zs = np.tile(spec.base, (spec.steps, 1))
    zs[:, spec.axis] = values
    # decode row by row: batched BLAS may differ in the last bit between
    # rows, which would break the exact invariance of the untouched branch
    results = [decode(z, model) for z in zs]
    points = []
    for z, value, res in zip(zs, values, results):
        props = predict_properties(_reencoded_mu(res.graph, model), model)
        points.append(TraversalPoint(z, float(value), res, repair(res.graph), props))
    return points, kind


def _reencoded_mu(graph: TrussGraph, model: ModelState) -> np.ndarray:
    from .vae import encode

    mu, _ = encode(graph, model)
    return mu


def neighborhood(
    z0: np.ndarray, sigma: float, n: int, rng: np.random.Generator, model: ModelState
):
    """Decode n draws from N(z0, sigma^2 I)."""
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    z0 = np.asarray(z0, dtype=float)
    zs = z0 + sigma * rng.standard_normal((n, len(z0)))
    results = decode(zs, model)
    return [LatentSample(z, res, repair(res.graph)) for z, res in zip(zs, results)]
