"""Run configuration: a TOML file mapped onto the component dataclasses.

Every section is optional; missing keys take the defaults below and unknown
keys are rejected.  ``RBF_SEED`` in the environment overrides ``seed``.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .data import CleanPolicy, SynthConfig
from .errors import ConfigError, MissingArtifactError
from .genetic import GaConfig
from .network import CENTER_STRATEGIES, NetworkSpec
from .traffic import DensityProfile, FeatureSpec
from .training import TrainingConfig

SEED_ENV = "RBF_SEED"


@dataclass(frozen=True)
class NetworkSection:
    hidden_units: tuple[int, ...] = (16,)
    hidden_outputs: tuple[int, ...] = (8,)
    sigma: float = 1.0
    output_activation: str = "linear"
    center_strategy: str = "sample_from_data"

    def __post_init__(self):
        object.__setattr__(self, "hidden_units", tuple(self.hidden_units))
        object.__setattr__(self, "hidden_outputs", tuple(self.hidden_outputs))
        if self.center_strategy not in CENTER_STRATEGIES:
            raise ConfigError(f"unknown center strategy {self.center_strategy!r}")

    def spec(self, input_dim, output_dim=1) -> NetworkSpec:
        return NetworkSpec(input_dim, self.hidden_units, self.hidden_outputs, self.sigma, output_dim, self.output_activation)


@dataclass(frozen=True)
class TrainingSection:
    learning_rate: float = 0.01
    num_epochs: int = 100
    loss: str = "mse"
    batch_mode: str = "per_sample"
    min_delta: Optional[float] = None
    patience: int = 10

    def build(self, seed) -> TrainingConfig:
        conv = None if self.min_delta is None else (self.min_delta, self.patience)
        return TrainingConfig(self.learning_rate, self.num_epochs, self.loss, self.batch_mode, conv, seed)


@dataclass(frozen=True)
class GaSection:
    population_size: int = 100
    mutation_rate: float = 0.1
    num_generations: int = 100
    crossover: str = "one_point"
    mutation_sigma: float = 0.1
    elitism: int = 1
    tournament_size: int = 3
    include_geometry: bool = False

    def build(self, seed) -> GaConfig:
        return GaConfig(**asdict(self), seed=seed)


@dataclass(frozen=True)
class DataSection:
    horizon: int = 1
    train_fraction: float = 0.8
    split_mode: str = "chronological"
    strict_csv: bool = True


@dataclass(frozen=True)
class TrafficSection:
    free_flow_density: float = 10.0
    congested_density: float = 40.0
    low_threshold: float = 0.3
    high_threshold: float = 0.7

    @property
    def profile(self):
        return DensityProfile(self.free_flow_density, self.congested_density)

    @property
    def thresholds(self):
        return (self.low_threshold, self.high_threshold)


_PIPELINE_CLEAN = CleanPolicy(action="winsorize", window=37)

_SECTIONS = {
    "synth": SynthConfig,
    "features": FeatureSpec,
    "clean": CleanPolicy,
    "data": DataSection,
    "traffic": TrafficSection,
    "network": NetworkSection,
    "training": TrainingSection,
    "ga": GaSection,
}


def _canonical(v):
    if isinstance(v, dict):
        return {k: _canonical(x) for k, x in v.items()}
    if isinstance(v, list):
        return [_canonical(x) for x in v]
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return float(v)
    return v


@dataclass(frozen=True)
class RunConfig:
    seed: int = 7
    synth: SynthConfig = field(default_factory=SynthConfig)
    features: FeatureSpec = field(default_factory=FeatureSpec)
    clean: CleanPolicy = _PIPELINE_CLEAN
    data: DataSection = field(default_factory=DataSection)
    traffic: TrafficSection = field(default_factory=TrafficSection)
    network: NetworkSection = field(default_factory=NetworkSection)
    training: TrainingSection = field(default_factory=TrainingSection)
    ga: GaSection = field(default_factory=GaSection)

    def to_dict(self):
        return json.loads(json.dumps(asdict(self)))

    def hash(self) -> str:
        """Short digest of the canonical config; numbers hash by value, so ``10`` and ``10.0`` agree."""
        blob = json.dumps(_canonical(self.to_dict()), sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def with_seed(self, seed) -> "RunConfig":
        return replace(self, seed=int(seed))


def _build(cls, values, section, base=None):
    known = {f.name for f in fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}")
    merged = asdict(base) if base is not None else {}
    merged.update(values)
    try:
        return cls(**merged)
    except TypeError as exc:
        raise ConfigError(f"[{section}]: {exc}") from None


def config_from_dict(d) -> RunConfig:
    known = set(_SECTIONS) | {"seed"}
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown config section(s): {', '.join(sorted(unknown))}")
    kwargs = {}
    if "seed" in d:
        kwargs["seed"] = int(d["seed"])
    defaults = RunConfig()
    for name, cls in _SECTIONS.items():
        if name in d:
            if not isinstance(d[name], dict):
                raise ConfigError(f"[{name}] must be a table")
            kwargs[name] = _build(cls, d[name], name, getattr(defaults, name))
    return RunConfig(**kwargs)


def load_config(path=None, env=None) -> RunConfig:
    """Read ``path`` (defaults only when None) and apply the ``RBF_SEED`` override."""
    env = os.environ if env is None else env
    if path is None:
        cfg = RunConfig()
    else:
        path = Path(path)
        if not path.exists():
            raise MissingArtifactError(f"config file not found: {path}")
        try:
            cfg = config_from_dict(tomllib.loads(path.read_text(encoding="utf-8")))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    if env.get(SEED_ENV):
        try:
            cfg = cfg.with_seed(int(env[SEED_ENV]))
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {env[SEED_ENV]!r}") from None
    return cfg
