"""Activation training on mock-pipeline rewards, and the trained-vs-random comparison."""

from __future__ import annotations

import statistics
from dataclasses import dataclass
from pathlib import Path

from ..activation import ActivationPolicy, ActivationState, QFunction, select_module, state_from_scenario
from ..activation import train_activation
from ..cot.modules import default_modules
from ..errors import ConfigError, UnrecognizedIntent
from ..intent import load_corpus, parse_intent
from ..rng import SplitMix64, derive_seed
from .config import ExperimentConfig
from .runner import build_scenario, classify_intent, run_single

# salt for the random-activation stream so it never coincides with agent seeds
_RANDOM_SALT = 0x52414E44


class ModuleRewardEnv:
    """One-step episodes over (intent, seed, range) contexts; reward is Q_total.

    Rewards come from :func:`run_single` with the module forced and mock
    backends, memoized per (context, module) because the mocks are pure.
    """

    def __init__(self, config: ExperimentConfig, intents: list[str] | None = None, seed: int = 0) -> None:
        self.config = config.replace(backend="mock")
        self.modules = default_modules()
        self.n_actions = len(self.modules)
        intents = intents or [config.intent]
        self.contexts: list[tuple[str, int, float, ActivationState]] = []
        for text in intents:
            cluster = classify_intent(self.config, text).category
            for s in config.activation.train_seeds:
                for r in config.range_sweep:
                    state = state_from_scenario(build_scenario(self.config, s, r), cluster)
                    self.contexts.append((text, s, r, state))
        self.rng = SplitMix64(seed)
        self._current = self.contexts[0]
        self._memo: dict[tuple, float] = {}

    def reset(self) -> ActivationState:
        self._current = self.contexts[self.rng.randbelow(len(self.contexts))]
        return self._current[3]

    def reward(self, context, action: int) -> float:
        key = (context[:3], action)
        if key not in self._memo:
            text, seed, range_m, _ = context
            rec = run_single(self.config, seed, range_m, "cot", module=self.modules[action], intent_text=text)
            self._memo[key] = rec.utility.q_total
        return self._memo[key]

    def step(self, action: int) -> tuple[float, ActivationState | None]:
        return self.reward(self._current, action), None


def training_intents(config: ExperimentConfig, corpus: bool) -> list[str]:
    if not corpus:
        return [config.intent]
    out = [config.intent]
    for item in load_corpus():
        try:
            parse_intent(item.text)
        except UnrecognizedIntent:
            continue
        if item.text not in out:
            out.append(item.text)
    return out


def train_policy(config: ExperimentConfig, *, corpus: bool = False) -> ActivationPolicy:
    a = config.activation
    env = ModuleRewardEnv(config, training_intents(config, corpus), seed=derive_seed(a.seed, 1))
    return train_activation(env, a.episodes, a.lr, a.gamma, a.epsilon_start, a.epsilon_end, a.seed)


_POLICIES: dict[str, ActivationPolicy] = {}


def ensure_policy(config: ExperimentConfig) -> ActivationPolicy:
    """Load the configured policy file, or train one (cached per config)."""
    path = config.activation.policy_path
    if path:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"policy file {path} does not exist")
        return ActivationPolicy.from_json(p.read_text(encoding="utf-8"))
    key = config.config_hash()
    if key not in _POLICIES:
        _POLICIES[key] = train_policy(config)
    return _POLICIES[key]


def greedy_by_cluster(policy: ActivationPolicy, config: ExperimentConfig) -> dict[int, int]:
    """Greedy module per intent cluster, at the median sweep range."""
    ranges = sorted(config.range_sweep)
    probe = build_scenario(config, config.seeds[0], ranges[len(ranges) // 2])
    return {
        c: select_module(state_from_scenario(probe, c), policy.greedy()) for c in range(config.intent_clusters)
    }


@dataclass(frozen=True)
class ArmSummary:
    label: str
    mean_coverage: float
    mean_sum_rate_bps: float
    mean_q_total: float
    module_counts: tuple[int, ...]
    n: int


@dataclass(frozen=True)
class ActivationComparison:
    trained: ArmSummary
    random: ArmSummary


def _summary(label: str, records, n_modules: int) -> ArmSummary:
    counts = [0] * n_modules
    for r in records:
        counts[r.module_id] += 1
    return ArmSummary(
        label,
        statistics.fmean(r.metrics["coverage_ratio"] for r in records),
        statistics.fmean(r.metrics["sum_rate_bps"] for r in records),
        statistics.fmean(r.utility.q_total for r in records),
        tuple(counts),
        len(records),
    )


def compare_activation(config: ExperimentConfig, policy: ActivationPolicy) -> ActivationComparison:
    """Trained greedy vs uniform-random module choice on identical episodes.

    Episodes are every (range, seed) of the config with the configured intent.
    """
    config = config.replace(backend="mock")
    modules = default_modules()
    greedy = policy.greedy()
    trained, rand = [], []
    idx = 0
    for r in config.range_sweep:
        for s in config.seeds:
            random_policy = ActivationPolicy(QFunction(len(modules)), 1.0, derive_seed(config.config_seed ^ _RANDOM_SALT, idx))
            trained.append(run_single(config, s, r, "cot", policy=greedy, modules=modules))
            rand.append(run_single(config, s, r, "cot", policy=random_policy, modules=modules))
            idx += 1
    return ActivationComparison(_summary("trained", trained, len(modules)), _summary("random", rand, len(modules)))


@dataclass(frozen=True)
class TrainingReport:
    policy: ActivationPolicy
    policy_path: Path
    comparison_path: Path
    greedy: dict[int, int]
    comparison: ActivationComparison


def train_activation_cmd(config: ExperimentConfig, out_dir: str | Path, *, corpus: bool = True) -> TrainingReport:
    """Train on mock rewards, write ``policy.json`` and ``activation_comparison.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    policy = train_policy(config, corpus=corpus)
    policy_path = out / "policy.json"
    policy_path.write_text(policy.to_json() + "\n", encoding="utf-8")
    comparison = compare_activation(config, policy)
    comparison_path = out / "activation_comparison.csv"
    lines = ["activation,mean_coverage,mean_sum_rate_bps,mean_q_total,n"]
    for arm in (comparison.trained, comparison.random):
        lines.append(f"{arm.label},{arm.mean_coverage!r},{arm.mean_sum_rate_bps!r},{arm.mean_q_total!r},{arm.n}")
    comparison_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return TrainingReport(policy, policy_path, comparison_path, greedy_by_cluster(policy, config), comparison)
