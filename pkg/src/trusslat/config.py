"""Run configuration: one YAML file covering every module's knobs.

Unknown keys are rejected at any nesting level and ``config dump`` prints
the full default document, so a config file is always self-describing.
The top-level seed feeds the datagen and training RNGs (the CLI --seed
flag overrides it).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, fields, replace

import yaml

from .datagen import DatagenConfig
from .fe import MaterialParams
from .inverse import OptimConfig
from .vae import ArchitectureConfig, LatentLayout, TrainConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    rho: float = 0.15
    material: MaterialParams = field(default_factory=MaterialParams)
    datagen: DatagenConfig = field(default_factory=DatagenConfig)
    latent: LatentLayout = field(default_factory=LatentLayout)
    architecture: ArchitectureConfig = field(default_factory=ArchitectureConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    optimize: OptimConfig = field(default_factory=OptimConfig)

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(
            self,
            seed=seed,
            datagen=replace(self.datagen, rng_seed=seed),
            train=replace(self.train, rng_seed=seed),
        )


# sections whose rng seed is owned by the top-level seed
_HIDDEN_FIELDS = {"datagen": {"rng_seed"}, "train": {"rng_seed"}}

_SECTION_TYPES = {
    "material": MaterialParams,
    "datagen": DatagenConfig,
    "latent": LatentLayout,
    "architecture": ArchitectureConfig,
    "train": TrainConfig,
    "optimize": OptimConfig,
}


def _coerce(value, typ):
    # dataclass field types are strings under deferred annotations
    if typ == "float":
        return float(value)
    if typ == "int":
        if isinstance(value, float) and not value.is_integer():
            raise ConfigError(f"expected integer, got {value}")
        return int(value)
    return value


def _build_section(name: str, cls, doc: dict):
    if not isinstance(doc, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    allowed = {f.name for f in fields(cls)} - _HIDDEN_FIELDS.get(name, set())
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(unknown)}")
    kwargs = {}
    for f in fields(cls):
        if f.name in doc:
            value = doc[f.name]
            if isinstance(value, list):
                value = tuple(value)
            kwargs[f.name] = _coerce(value, f.type)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid section {name!r}: {exc}") from exc


def from_mapping(doc: dict) -> RunConfig:
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a mapping")
    allowed = {"seed", "rho"} | set(_SECTION_TYPES)
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    kwargs = {}
    if "seed" in doc:
        kwargs["seed"] = _coerce(doc["seed"], "int")
    if "rho" in doc:
        rho = float(doc["rho"])
        if not 0.0 < rho < 1.0:
            raise ConfigError(f"rho must be in (0, 1), got {rho}")
        kwargs["rho"] = rho
    for name, cls in _SECTION_TYPES.items():
        if name in doc:
            kwargs[name] = _build_section(name, cls, doc[name])
    cfg = RunConfig(**kwargs)
    return cfg.with_seed(cfg.seed)


def load(path) -> RunConfig:
    with open(path) as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    return from_mapping(doc)


def to_mapping(cfg: RunConfig) -> dict:
    doc: dict = {"seed": cfg.seed, "rho": cfg.rho}
    for name in _SECTION_TYPES:
        section = dataclasses.asdict(getattr(cfg, name))
        for hidden in _HIDDEN_FIELDS.get(name, set()):
            section.pop(hidden, None)
        doc[name] = {
            k: list(v) if isinstance(v, tuple) else v for k, v in section.items()
        }
    return doc


def dump(cfg: RunConfig | None = None) -> str:
    """YAML text with every default explicit."""
    return yaml.safe_dump(to_mapping(cfg or RunConfig()), sort_keys=False)
