"""Experiment configuration: JSON in, validated dataclasses out, stable hash."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from ..errors import ConfigError, DomainError
from ..evaluation import UtilityWeights
from ..intent.corpus import CASE_STUDY_INTENT
from ..optimizer import OptimizerConfig
from ..physics import ChannelParams

PIPELINES = ("cot", "non_cot")
BACKENDS = ("mock", "http")
EMBEDDERS = ("hashing", "http")
SWEEP_BOUNDS_M = (200.0, 600.0)


@dataclass(frozen=True)
class ScenarioTemplate:
    area_m: tuple[float, float] = (1000.0, 1000.0)
    user_count: int = 10
    n_uavs: int = 1
    altitude_m: float = 100.0
    max_tx_power_dbm: float = 20.0
    channel: ChannelParams = field(default_factory=ChannelParams)


@dataclass(frozen=True)
class ActivationConfig:
    episodes: int = 5000
    lr: float = 0.1
    gamma: float = 0.0
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    seed: int = 0
    # user-placement seeds for the training episodes, disjoint from evaluation seeds
    train_seeds: tuple[int, ...] = tuple(range(100, 110))
    policy_path: str | None = None


@dataclass(frozen=True)
class HttpConfig:
    model: str = "gpt-4o"
    temperature: float = 0.0
    timeout_s: float = 60.0
    retries: int = 2
    max_in_flight: int = 4
    embed_model: str = "text-embedding-3-small"


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioTemplate = field(default_factory=ScenarioTemplate)
    range_sweep: tuple[float, ...] = tuple(float(r) for r in range(200, 551, 50))
    seeds: tuple[int, ...] = tuple(range(10))
    pipelines: tuple[str, ...] = PIPELINES
    backend: str = "mock"
    embedder: str = "hashing"
    intent: str = CASE_STUDY_INTENT
    intent_clusters: int = 4
    config_seed: int = 0
    weights: UtilityWeights = field(default_factory=UtilityWeights)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    activation: ActivationConfig = field(default_factory=ActivationConfig)
    http: HttpConfig = field(default_factory=HttpConfig)
    exemplar_path: str | None = None
    feedback_threshold: float | None = None
    workers: int = 1

    def __post_init__(self) -> None:
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        lo, hi = SWEEP_BOUNDS_M
        for r in self.range_sweep:
            if not (lo <= r <= hi):
                raise ConfigError(f"sweep range {r} m outside [{lo:g}, {hi:g}]")
        bad = [p for p in self.pipelines if p not in PIPELINES]
        if bad or not self.pipelines:
            raise ConfigError(f"pipelines must be drawn from {PIPELINES}, got {self.pipelines}")
        if self.backend not in BACKENDS:
            raise ConfigError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if self.embedder not in EMBEDDERS:
            raise ConfigError(f"embedder must be one of {EMBEDDERS}, got {self.embedder!r}")
        if self.intent_clusters < 1 or self.workers < 1 or self.scenario.user_count < 1:
            raise ConfigError("intent_clusters, workers and user_count must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()

    def replace(self, **changes) -> "ExperimentConfig":
        doc = self.to_dict()
        doc.update(changes)
        return ExperimentConfig.from_dict(doc)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        try:
            return _build(cls, doc)
        except ConfigError:
            raise
        except (TypeError, ValueError, DomainError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path | None) -> "ExperimentConfig":
        if path is None:
            return cls()
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a JSON object")
        return cls.from_dict(doc)


_NESTED = {
    "scenario": ScenarioTemplate,
    "channel": ChannelParams,
    "weights": UtilityWeights,
    "optimizer": OptimizerConfig,
    "activation": ActivationConfig,
    "http": HttpConfig,
}
_TUPLES = {"area_m", "range_sweep", "seeds", "pipelines", "train_seeds"}


def _build(cls, doc):
    if isinstance(doc, cls):
        return doc
    if not isinstance(doc, dict):
        raise ConfigError(f"{cls.__name__} expects an object, got {doc!r}")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {', '.join(unknown)}")
    kwargs = {}
    for key, value in doc.items():
        if key in _NESTED:
            value = _build(_NESTED[key], value)
        elif key in _TUPLES:
            value = tuple(value)
            if key == "range_sweep":
                value = tuple(float(v) for v in value)
        kwargs[key] = value
    return cls(**kwargs)
