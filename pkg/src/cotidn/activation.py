"""Choosing a CoT module per intent with a tabular Q-learner.

States combine the intent cluster with three system features, each binned into
quarters, so there are ``clusters * 4**3`` distinct states.  Every episode is a
single decision (a contextual bandit): observe the state, pick a module, receive
the composite utility as reward.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Protocol

from .errors import DomainError
from .physics import NetworkScenario
from .rng import SplitMix64

N_BINS = 4
_STATES_PER_CLUSTER = N_BINS**3


def _bin(v: float) -> int:
    return min(int(v * N_BINS), N_BINS - 1)


def _clamp01(v: float) -> float:
    return min(max(v, 0.0), 1.0)


@dataclass(frozen=True)
class ActivationState:
    cluster: int
    user_density: float
    range_norm: float
    power_budget_norm: float

    def __post_init__(self) -> None:
        if self.cluster < 0:
            raise DomainError("cluster index must be non-negative")
        for v in self.features:
            if not (0.0 <= v <= 1.0):
                raise DomainError(f"feature {v} outside [0, 1]")

    @property
    def features(self) -> tuple[float, float, float]:
        return (self.user_density, self.range_norm, self.power_budget_norm)

    @property
    def state_id(self) -> int:
        b = [_bin(v) for v in self.features]
        return self.cluster * _STATES_PER_CLUSTER + b[0] * N_BINS * N_BINS + b[1] * N_BINS + b[2]


def state_from_scenario(scenario: NetworkScenario, cluster: int) -> ActivationState:
    w, h = scenario.area_m
    area_km2 = w * h / 1e6
    comm_range = max(a.comm_range_m for a in scenario.uavs)
    return ActivationState(
        cluster=cluster,
        user_density=_clamp01(len(scenario.users) / area_km2 / 100.0),
        range_norm=_clamp01((comm_range - 200.0) / 400.0),
        power_budget_norm=_clamp01(scenario.max_tx_power_dbm / 20.0),
    )


@dataclass
class QFunction:
    n_actions: int
    table: dict[tuple[int, int], float] = field(default_factory=dict)

    def get(self, state_id: int, action: int) -> float:
        return self.table.get((state_id, action), 0.0)

    def row(self, state_id: int) -> list[float]:
        return [self.get(state_id, a) for a in range(self.n_actions)]

    def best_action(self, state_id: int) -> int:
        row = self.row(state_id)
        best = 0
        for a in range(1, self.n_actions):
            if row[a] > row[best]:
                best = a
        return best


@dataclass
class ActivationPolicy:
    q: QFunction
    epsilon: float = 0.0
    seed: int = 0
    rng: SplitMix64 = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not (0.0 <= self.epsilon <= 1.0):
            raise DomainError("epsilon must lie in [0, 1]")
        self.rng = SplitMix64(self.seed)

    def greedy(self) -> "ActivationPolicy":
        return ActivationPolicy(self.q, 0.0, self.seed)

    def to_json(self) -> str:
        doc = {
            "n_actions": self.q.n_actions,
            "bins": N_BINS,
            "seed": self.seed,
            "epsilon": self.epsilon,
            "q": {f"{s}:{a}": v for (s, a), v in sorted(self.q.table.items())},
        }
        return json.dumps(doc, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ActivationPolicy":
        doc = json.loads(text)
        if doc.get("bins", N_BINS) != N_BINS:
            raise DomainError(f"policy uses {doc['bins']} bins, expected {N_BINS}")
        table = {}
        for key, v in doc["q"].items():
            s, a = key.split(":")
            table[(int(s), int(a))] = float(v)
        return cls(QFunction(int(doc["n_actions"]), table), float(doc.get("epsilon", 0.0)), int(doc.get("seed", 0)))


@dataclass(frozen=True)
class RewardSample:
    state: ActivationState
    action: int
    reward: float
    next_state: ActivationState | None = None

    def __post_init__(self) -> None:
        if not math.isfinite(self.reward):
            raise DomainError("reward must be finite")


def select_module(state: ActivationState, policy: ActivationPolicy) -> int:
    """Epsilon-greedy choice; greedy ties go to the lowest action index."""
    if policy.rng.uniform() < policy.epsilon:
        return policy.rng.randbelow(policy.q.n_actions)
    return policy.q.best_action(state.state_id)


def update_q(q: QFunction, sample: RewardSample, lr: float, gamma: float) -> None:
    if not (0.0 < lr <= 1.0):
        raise DomainError("learning rate must lie in (0, 1]")
    if not (0.0 <= gamma < 1.0):
        raise DomainError("discount must lie in [0, 1)")
    s = sample.state.state_id
    future = 0.0
    if sample.next_state is not None and gamma > 0.0:
        future = max(q.row(sample.next_state.state_id))
    old = q.get(s, sample.action)
    q.table[(s, sample.action)] = old + lr * (sample.reward + gamma * future - old)


class EpisodeEnv(Protocol):
    """One-step environment; deterministic given its own seed."""

    n_actions: int

    def reset(self) -> ActivationState: ...

    def step(self, action: int) -> tuple[float, ActivationState | None]: ...


def linear_epsilon(episode: int, episodes: int, start: float = 1.0, end: float = 0.05) -> float:
    if episodes <= 1:
        return end
    return start + (end - start) * episode / (episodes - 1)


def train_activation(
    env: EpisodeEnv,
    episodes: int = 5000,
    lr: float = 0.1,
    gamma: float = 0.0,
    epsilon_start: float = 1.0,
    epsilon_end: float = 0.05,
    seed: int = 0,
) -> ActivationPolicy:
    """Run ``episodes`` epsilon-greedy episodes and return the greedy policy."""
    policy = ActivationPolicy(QFunction(env.n_actions), epsilon_start, seed)
    for t in range(episodes):
        policy.epsilon = linear_epsilon(t, episodes, epsilon_start, epsilon_end)
        state = env.reset()
        action = select_module(state, policy)
        reward, next_state = env.step(action)
        update_q(policy.q, RewardSample(state, action, reward, next_state), lr, gamma)
    return policy.greedy()


class SyntheticBandit:
    """Stationary bandit with Gaussian reward noise around fixed arm means."""

    def __init__(self, means, noise_sd: float = 0.1, seed: int = 0, state: ActivationState | None = None):
        self.means = list(means)
        self.n_actions = len(self.means)
        self.noise_sd = noise_sd
        self.rng = SplitMix64(seed)
        self.state = state or ActivationState(0, 0.1, 0.5, 1.0)

    def reset(self) -> ActivationState:
        return self.state

    def step(self, action: int) -> tuple[float, ActivationState | None]:
        noise = self.rng.gauss(0.0, self.noise_sd) if self.noise_sd > 0 else 0.0
        return self.means[action] + noise, None
