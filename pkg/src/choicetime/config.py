"""Versioned JSON run configuration."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .inference.model import ModelKind
from .inference.sampler import Hyperprior, SamplerConfig
from .simulation import SimulationSpec

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


def sampler_config_from_dict(d: dict) -> SamplerConfig:
    d = dict(d)
    unknown = set(d) - {f.name for f in fields(SamplerConfig)}
    if unknown:
        raise ConfigError(f"unknown sampler keys {sorted(unknown)}")
    if "hyper" in d and isinstance(d["hyper"], dict):
        d["hyper"] = Hyperprior(**d["hyper"])
    return SamplerConfig(**d)


@dataclass
class RunConfig:
    model: str = "cet"
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    simulation: SimulationSpec = field(default_factory=SimulationSpec)
    seed: int = 0
    output_dir: str = "out"
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        ModelKind.parse(self.model)

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "model": self.model,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "sampler": asdict(self.sampler),
            "simulation": self.simulation.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        version = d.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version!r}; expected {SCHEMA_VERSION}")
        unknown = set(d) - {"schema_version", "model", "seed", "output_dir", "sampler", "simulation"}
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        try:
            cfg = cls(
                model=d.get("model", "cet"),
                sampler=sampler_config_from_dict(d.get("sampler", {})),
                simulation=SimulationSpec.from_dict(d.get("simulation", {})),
                seed=int(d.get("seed", 0)),
                output_dir=d.get("output_dir", "out"),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        # the top-level seed drives the simulation unless it sets its own
        if "seed" in d and "seed" not in d.get("simulation", {}):
            cfg.simulation = replace(cfg.simulation, seed=cfg.seed)
        return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such file") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from None
    return RunConfig.from_dict(raw)
