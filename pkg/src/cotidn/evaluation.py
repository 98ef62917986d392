"""Reasoning-quality fitness, wireless quality terms, and the composite utility.

The fitness components are computed from the physics engine alone, without a
judge model:

* consistency: share of numeric claims in the reasoning steps that agree with a
  recomputation to 5 % relative tolerance (1.0 when the trace makes no claims);
* informativeness: share of the module's reasoning stages that some step covers;
* misleadingness: share of claims that break a hard constraint (power cap,
  area bounds, coverage above one).
"""

from __future__ import annotations

import math
import re
from dataclasses import asdict, dataclass
from typing import Sequence

from .cot.modules import CASE_STUDY_STAGES, stages_matched
from .cot.types import ControlCommand, ReasoningTrace
from .errors import DomainError
from .physics import NetworkMetrics, NetworkScenario, nadir_reference_rate_bps

CLAIM_REL_TOL = 0.05

_NUM = r"([-+]?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)"
_SEP = r"\s*(?:=|:|of|is|at)?\s*"
_RATE_SCALE = {"gbps": 1e9, "mbps": 1e6, "kbps": 1e3, "bps": 1.0}
_FREQ_SCALE = {"ghz": 1e9, "mhz": 1e6, "khz": 1e3, "hz": 1.0}

CLAIM_PATTERNS: tuple[tuple[str, re.Pattern], ...] = tuple(
    (kind, re.compile(pat, re.IGNORECASE))
    for kind, pat in (
        ("coverage", r"coverage(?:\s+ratio)?" + _SEP + _NUM + r"\s*(%)?"),
        ("sum_rate", r"sum[- ]rate" + _SEP + _NUM + r"\s*(gbps|mbps|kbps|bps)\b"),
        ("tx_power", r"(?:transmit|tx) power" + _SEP + _NUM + r"\s*dBm"),
        ("power_cap", r"(?:power cap|max(?:imum)? (?:transmit )?power)" + _SEP + _NUM + r"\s*dBm"),
        ("noise", r"noise(?: power| floor)?" + _SEP + _NUM + r"\s*dBm"),
        ("position", r"UAV[^()\n]{0,40}?\(\s*" + _NUM + r"\s*(?:m)?\s*,\s*" + _NUM + r"\s*(?:m)?\s*\)"),
        ("range", r"range" + _SEP + _NUM + r"\s*m\b"),
        ("altitude", r"altitude" + _SEP + _NUM + r"\s*m\b"),
        ("bandwidth", r"bandwidth" + _SEP + _NUM + r"\s*(ghz|mhz|khz|hz)\b"),
        ("carrier", r"carrier(?: frequency)?" + _SEP + _NUM + r"\s*(ghz|mhz|khz|hz)\b"),
    )
)


@dataclass(frozen=True)
class Claim:
    kind: str
    values: tuple[float, ...]


@dataclass(frozen=True)
class FitnessBreakdown:
    consistency: float
    informativeness: float
    misleadingness: float

    def __post_init__(self) -> None:
        for name in ("consistency", "informativeness", "misleadingness"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise DomainError(f"{name}={v} outside [0, 1]")


@dataclass(frozen=True)
class UtilityWeights:
    alpha: float = 0.1
    beta: float = 0.45

    def __post_init__(self) -> None:
        if not (self.alpha >= 0.0 and self.beta >= 0.0):
            raise DomainError("utility weights must be non-negative")


@dataclass(frozen=True)
class UtilityReport:
    q_llm: float
    q_c: float
    q_r: float
    q_wireless: float
    q_total: float
    alpha: float
    beta: float

    def to_dict(self) -> dict:
        return asdict(self)


def extract_claims(steps: Sequence[str]) -> list[Claim]:
    claims = []
    for step in steps:
        for kind, pattern in CLAIM_PATTERNS:
            for m in pattern.finditer(step):
                groups = m.groups()
                if kind == "coverage":
                    v = float(groups[0])
                    claims.append(Claim(kind, (v / 100.0 if groups[1] else v,)))
                elif kind == "sum_rate":
                    claims.append(Claim(kind, (float(groups[0]) * _RATE_SCALE[groups[1].lower()],)))
                elif kind in ("bandwidth", "carrier"):
                    claims.append(Claim(kind, (float(groups[0]) * _FREQ_SCALE[groups[1].lower()],)))
                elif kind == "position":
                    claims.append(Claim(kind, (float(groups[0]), float(groups[1]))))
                else:
                    claims.append(Claim(kind, (float(groups[0]),)))
    return claims


def _close(claimed: float, truth: float) -> bool:
    if not math.isfinite(claimed):
        return False
    return abs(claimed - truth) <= CLAIM_REL_TOL * abs(truth) + 1e-9


def _claim_holds(c: Claim, scenario: NetworkScenario, command: ControlCommand, metrics: NetworkMetrics) -> bool:
    v = c.values[0]
    if c.kind == "coverage":
        return _close(v, metrics.coverage_ratio)
    if c.kind == "sum_rate":
        return _close(v, metrics.sum_rate_bps)
    if c.kind == "tx_power":
        return any(_close(v, p) for p in command.tx_powers_dbm)
    if c.kind == "power_cap":
        return _close(v, scenario.max_tx_power_dbm)
    if c.kind == "noise":
        return _close(v, scenario.channel.noise_dbm)
    if c.kind == "position":
        return any(_close(v, x) and _close(c.values[1], y) for x, y in command.uav_positions)
    if c.kind == "range":
        return any(_close(v, a.comm_range_m) for a in scenario.uavs)
    if c.kind == "altitude":
        return _close(v, scenario.altitude_m)
    if c.kind == "bandwidth":
        return _close(v, scenario.channel.bandwidth_hz)
    if c.kind == "carrier":
        return _close(v, scenario.channel.carrier_freq_hz)
    return False


def _claim_violates(c: Claim, scenario: NetworkScenario) -> bool:
    if c.kind == "tx_power":
        return not (0.0 <= c.values[0] <= scenario.max_tx_power_dbm)
    if c.kind == "position":
        w, h = scenario.area_m
        x, y = c.values
        return not (0.0 <= x <= w and 0.0 <= y <= h)
    if c.kind == "coverage":
        return not (0.0 <= c.values[0] <= 1.0)
    return False


def score_fitness(
    trace: ReasoningTrace,
    scenario: NetworkScenario,
    command: ControlCommand,
    metrics: NetworkMetrics,
    step_template: Sequence[str] = CASE_STUDY_STAGES,
) -> FitnessBreakdown:
    claims = extract_claims(trace.steps)
    if claims:
        consistency = sum(_claim_holds(c, scenario, command, metrics) for c in claims) / len(claims)
        misleading = sum(_claim_violates(c, scenario) for c in claims) / len(claims)
    else:
        consistency, misleading = 1.0, 0.0
    informativeness = stages_matched(trace.steps, step_template) / len(step_template) if step_template else 0.0
    return FitnessBreakdown(consistency, informativeness, misleading)


def q_llm(breakdown: FitnessBreakdown) -> float:
    return (breakdown.consistency + breakdown.informativeness + (1.0 - breakdown.misleadingness)) / 3.0


def q_wireless(metrics: NetworkMetrics, scenario: NetworkScenario) -> tuple[float, float]:
    """(coverage ratio, sum rate normalized by the nadir max-power rate)."""
    r_ref = nadir_reference_rate_bps(scenario.channel, scenario.max_tx_power_dbm, scenario.altitude_m)
    q_r = min(max(metrics.sum_rate_bps / r_ref, 0.0), 1.0) if r_ref > 0 else 0.0
    return metrics.coverage_ratio, q_r


def composite_utility(weights: UtilityWeights, q_llm: float, q_c: float, q_r: float) -> UtilityReport:
    for name, v in (("q_llm", q_llm), ("q_c", q_c), ("q_r", q_r)):
        if not (0.0 <= v <= 1.0):
            raise DomainError(f"{name}={v} outside [0, 1]")
    q_w = q_c + q_r
    total = weights.alpha * q_llm + weights.beta * q_w
    return UtilityReport(q_llm, q_c, q_r, q_w, total, weights.alpha, weights.beta)
