"""Strategy extraction: fenced JSON block -> validated ControlCommand.

Nothing is clamped or repaired.  Any value outside the scenario's bounds is a
:class:`~cotidn.errors.ValidationError` naming the offending field.
"""

from __future__ import annotations

import json
import re
from functools import lru_cache

from jsonschema import Draft202012Validator

from ..errors import ParseError, ValidationError
from ..physics import NetworkScenario
from .types import FENCE_TAG, ControlCommand, ReasoningTrace

_FENCE = re.compile(r"```" + FENCE_TAG + r"[ \t]*\r?\n(.*?)```", re.DOTALL)


def control_command_schema(scenario: NetworkScenario) -> dict:
    w, h = scenario.area_m
    k = len(scenario.uavs)
    return _schema(w, h, scenario.max_tx_power_dbm, k)


@lru_cache(maxsize=64)
def _schema_validator(w: float, h: float, pmax: float, k: int) -> Draft202012Validator:
    return Draft202012Validator(_schema(w, h, pmax, k))


def _schema(w: float, h: float, pmax: float, k: int) -> dict:
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": "ControlCommand",
        "type": "object",
        "required": ["uav_positions", "tx_powers_dbm"],
        "additionalProperties": False,
        "properties": {
            "uav_positions": {
                "description": "horizontal UAV positions in meters; altitude is fixed by the scenario",
                "type": "array",
                "minItems": k,
                "maxItems": k,
                "items": {
                    "type": "array",
                    "prefixItems": [
                        {"type": "number", "minimum": 0, "maximum": w},
                        {"type": "number", "minimum": 0, "maximum": h},
                    ],
                    "minItems": 2,
                    "maxItems": 2,
                },
            },
            "tx_powers_dbm": {
                "type": "array",
                "minItems": k,
                "maxItems": k,
                "items": {"type": "number", "minimum": 0, "maximum": pmax},
            },
            "assignments": {
                "description": "optional user id -> UAV index map",
                "type": "object",
                "patternProperties": {"^[0-9]+$": {"type": "integer", "minimum": 0, "maximum": k - 1}},
                "additionalProperties": False,
            },
        },
    }


def strategy_block_text(final_block: str) -> str:
    """Body of the last ``strategy`` fence, or the whole block when unfenced."""
    matches = _FENCE.findall(final_block)
    return matches[-1] if matches else final_block.strip()


def _reject_constant(name: str):
    raise ValueError(f"non-finite constant {name}")


def _field_of(error) -> str:
    if error.validator == "required":
        m = re.search(r"'([^']+)' is a required property", error.message)
        return m.group(1) if m else "(root)"
    if error.validator == "additionalProperties" and not error.path:
        m = re.search(r"\('([^']+)'", error.message)
        return m.group(1) if m else "(root)"
    return str(error.path[0]) if error.path else "(root)"


def extract_strategy(trace: ReasoningTrace, scenario: NetworkScenario) -> ControlCommand:
    text = strategy_block_text(trace.final_block)
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except ValueError as exc:
        raise ParseError(f"strategy block is not JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValidationError("(root)", "strategy block must be a JSON object")

    w, h = scenario.area_m
    validator = _schema_validator(w, h, scenario.max_tx_power_dbm, len(scenario.uavs))
    errors = sorted(validator.iter_errors(doc), key=lambda e: (list(map(str, e.path)), e.validator))
    if errors:
        err = errors[0]
        raise ValidationError(_field_of(err), err.message)

    assignments = doc.get("assignments")
    return ControlCommand(
        uav_positions=tuple((float(x), float(y)) for x, y in doc["uav_positions"]),
        tx_powers_dbm=tuple(float(p) for p in doc["tx_powers_dbm"]),
        assignments={int(k): int(v) for k, v in assignments.items()} if assignments is not None else None,
    )
