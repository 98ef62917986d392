"""Keyword grammar turning an intent sentence into objectives and numeric bounds."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from ..errors import UnrecognizedIntent
from .embedding import IntentText

OBJECTIVES = ("coverage", "sum_rate", "energy", "latency")

_OBJECTIVE_RULES = (
    ("coverage", re.compile(r"\bcoverage\b|\bcover(?:s|ed|ing)?\b", re.I)),
    ("sum_rate", re.compile(r"\bdata[- ]?rates?\b|\brates?\b|\bthroughput\b|\bbit[- ]?rates?\b", re.I)),
    ("energy", re.compile(r"\benergy\b|\bpower consumption\b", re.I)),
    ("latency", re.compile(r"\blatency\b|\bdelays?\b", re.I)),
)

_NUM = r"(\d+(?:\.\d+)?)"
_RATE_SCALE = {"gbps": 1e9, "mbps": 1e6, "kbps": 1e3, "bps": 1.0}

_CONSTRAINT_RULES = (
    (
        "min_coverage",
        re.compile(
            r"(?:at least|minimum(?: of)?|>=?|above)\s*" + _NUM + r"\s*%\s*(?:of users\s*)?(?:coverage|covered)"
            r"|coverage\s*(?:of\s*)?(?:at least|above|>=?|minimum(?: of)?)\s*" + _NUM + r"\s*%",
            re.I,
        ),
        lambda v, _unit: v / 100.0,
    ),
    (
        "max_power_dbm",
        re.compile(
            r"power[^.,;]{0,24}?(?:below|under|at most|no more than|<=?|maximum(?: of)?|max(?: of)?|cap(?: of)?)"
            r"\s*" + _NUM + r"\s*dBm",
            re.I,
        ),
        lambda v, _unit: v,
    ),
    (
        "min_sum_rate_bps",
        re.compile(r"(?:at least|above|>=?|minimum(?: of)?)\s*" + _NUM + r"\s*(gbps|mbps|kbps|bps)\b", re.I),
        lambda v, unit: v * _RATE_SCALE[unit.lower()],
    ),
    (
        "max_latency_ms",
        re.compile(
            r"(?:latency|delay)[^.,;]{0,24}?(?:below|under|at most|less than|<=?|within)\s*" + _NUM + r"\s*ms\b",
            re.I,
        ),
        lambda v, _unit: v,
    ),
)


@dataclass(frozen=True)
class ParsedIntent:
    objectives: frozenset[str]
    constraints: dict[str, float] = field(default_factory=dict)
    category: int = 0
    raw: IntentText | None = None


def parse_intent(text: IntentText | str, cluster: int = 0) -> ParsedIntent:
    intent = text if isinstance(text, IntentText) else IntentText(text)
    objectives = frozenset(name for name, rule in _OBJECTIVE_RULES if rule.search(intent.text))
    if not objectives:
        raise UnrecognizedIntent(f"no objective recognized in {intent.text!r}")

    constraints: dict[str, float] = {}
    for name, rule, convert in _CONSTRAINT_RULES:
        m = rule.search(intent.text)
        if not m:
            continue
        groups = [g for g in m.groups() if g is not None]
        value = convert(float(groups[0]), groups[1] if len(groups) > 1 else "")
        if math.isfinite(value):
            constraints[name] = value
    return ParsedIntent(objectives, constraints, cluster, intent)
