"""Run configuration, stored as JSON."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from fleetrisk.features import FeatureOptions
from fleetrisk.phases import PhaseConfig
from fleetrisk.schema import ConfigError
from fleetrisk.strategies import STRATEGIES, merged_spec
from fleetrisk.synthetic import GeneratorConfig

KNOWN_STRATEGIES = STRATEGIES + ("oracle",)


@dataclass(frozen=True)
class ValidationConfig:
    fraction: float = 0.3
    draws: int = 5

    def __post_init__(self) -> None:
        if not 0.0 < self.fraction < 1.0:
            raise ConfigError("validation fraction must lie in (0, 1)")
        if self.draws < 1:
            raise ConfigError("validation draws must be positive")


@dataclass(frozen=True)
class RunConfig:
    generator: GeneratorConfig = GeneratorConfig()
    features: FeatureOptions = FeatureOptions(include_wavelet=True)
    strategies: tuple[dict, ...] = ({"name": "tree-baseline"}, {"name": "twostep"}, {"name": "jump"},
                                    {"name": "pseudolabel"})
    phases: PhaseConfig = PhaseConfig()
    validation: ValidationConfig = ValidationConfig()
    output_dir: str = "run"
    seed: int = 42

    def __post_init__(self) -> None:
        for spec in self.strategies:
            name = spec.get("name")
            if name not in KNOWN_STRATEGIES:
                raise ConfigError(f"strategy {name!r} is not registered; choose from {', '.join(KNOWN_STRATEGIES)}")
            if name != "oracle":
                merged_spec(name, spec)
        names = [s["name"] for s in self.strategies]
        if len(set(names)) != len(names):
            raise ConfigError("each strategy may appear once per run")

    def with_overrides(self, seed: int | None = None, output_dir: str | None = None) -> "RunConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=seed, generator=replace(cfg.generator, seed=seed))
        if output_dir is not None:
            cfg = replace(cfg, output_dir=str(output_dir))
        return cfg

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "output_dir": self.output_dir,
            "generator": self.generator.to_dict(),
            "features": self.features.to_dict(),
            "strategies": [dict(s) for s in self.strategies],
            "phases": self.phases.to_dict(),
            "validation": {"fraction": self.validation.fraction, "draws": self.validation.draws},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        known = {"seed", "output_dir", "generator", "features", "strategies", "strategy", "phases", "validation"}
        if set(data) - known:
            raise ConfigError(f"unknown run config keys {sorted(set(data) - known)}")
        if "strategy" in data:
            if "strategies" in data:
                raise ConfigError("give either 'strategy' or 'strategies', not both")
            data["strategies"] = [data.pop("strategy")]
        kwargs = {}
        if "generator" in data:
            kwargs["generator"] = GeneratorConfig.from_dict(data["generator"])
        if "features" in data:
            kwargs["features"] = FeatureOptions.from_dict(data["features"])
        if "strategies" in data:
            kwargs["strategies"] = tuple(dict(s) for s in data["strategies"])
        if "phases" in data:
            kwargs["phases"] = PhaseConfig.from_dict(data["phases"])
        if "validation" in data:
            kwargs["validation"] = ValidationConfig(**data["validation"])
        for key in ("seed", "output_dir"):
            if key in data:
                kwargs[key] = data[key]
        return cls(**kwargs)


def load_run_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        return RunConfig.from_dict(json.loads(Path(path).read_text()))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None


def dump_json(data, path: str | Path) -> None:
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
