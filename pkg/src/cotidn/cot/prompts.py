"""Prompt assembly for CoT modules."""

from __future__ import annotations

import json
import re
from typing import Sequence

from ..intent.parsing import ParsedIntent
from ..physics import NetworkScenario
from .extraction import control_command_schema
from .types import FENCE_TAG, CotModuleSpec, ExemplarRecord, PromptBundle

ZERO_SHOT_TRIGGER = "Let's think step by step."
SCENARIO_FENCE = "scenario"

SYSTEM_PREAMBLE = (
    "You are a radio network planning assistant for UAV base stations. "
    "Reason in explicit numbered steps, use free-space path loss, thermal noise and "
    "Shannon capacity for every number you state, and never exceed the power cap or leave the area."
)

_SCENARIO_BLOCK = re.compile(r"```" + SCENARIO_FENCE + r"\s*\n(.*?)```", re.DOTALL)
_STAGE_LINE = re.compile(r"^\s*\d+\.\s+Stage:\s*(.+?)\s*$", re.MULTILINE)


def _fmt(v: float) -> str:
    return f"{v:g}"


def render_exemplars(exemplars: Sequence[ExemplarRecord]) -> str:
    blocks = []
    for i, ex in enumerate(exemplars, 1):
        chain = "\n".join(f"{n}. {step}" for n, step in enumerate(ex.reasoning_chain, 1))
        blocks.append(f"Example {i}\nQuestion: {ex.question}\n{ZERO_SHOT_TRIGGER}\n{chain}\nAnswer:\n{ex.answer}")
    return "\n\n".join(blocks)


def summarize_scenario(scenario: NetworkScenario) -> str:
    w, h = scenario.area_m
    ch = scenario.channel
    ranges = sorted({a.comm_range_m for a in scenario.uavs})
    lines = [
        "Scenario:",
        f"- {len(scenario.users)} users in a {_fmt(w)} m x {_fmt(h)} m area",
        f"- carrier frequency {_fmt(ch.carrier_freq_hz / 1e9)} GHz, bandwidth {_fmt(ch.bandwidth_hz / 1e6)} MHz, "
        f"noise temperature {_fmt(ch.temperature_k)} K",
        f"- {len(scenario.uavs)} UAV slot(s) at altitude {_fmt(scenario.altitude_m)} m, "
        f"communication range {', '.join(_fmt(r) for r in ranges)} m",
        f"- maximum transmit power {_fmt(scenario.max_tx_power_dbm)} dBm",
        "- full scenario (user coordinates in meters):",
        f"```{SCENARIO_FENCE}\n{json.dumps(scenario.to_dict(), sort_keys=True)}\n```",
    ]
    return "\n".join(lines)


def _task_instruction(intent_text: str, intent: ParsedIntent | None, stages: Sequence[str]) -> str:
    lines = [f"Intent: {intent_text}"]
    if intent is not None:
        lines.append(f"Objectives: {', '.join(sorted(intent.objectives))}")
        if intent.constraints:
            lines.append(
                "Constraints: " + ", ".join(f"{k}={_fmt(v)}" for k, v in sorted(intent.constraints.items()))
            )
    lines.append("Work through these stages in order, one numbered step per stage:")
    lines.extend(f"{i}. Stage: {stage}" for i, stage in enumerate(stages, 1))
    lines.append(ZERO_SHOT_TRIGGER)
    return "\n".join(lines)


def _schema_instruction(scenario: NetworkScenario) -> str:
    schema = json.dumps(control_command_schema(scenario), indent=1, sort_keys=True)
    return (
        f"End your reply with one fenced block opened by ```{FENCE_TAG} that contains only a JSON "
        f"object valid under this schema:\n```json\n{schema}\n```"
    )


def compose_prompt(module: CotModuleSpec, intent: ParsedIntent, scenario: NetworkScenario) -> PromptBundle:
    text = intent.raw.text if intent.raw is not None else ", ".join(sorted(intent.objectives))
    return PromptBundle(
        system_preamble=SYSTEM_PREAMBLE,
        exemplar_block=render_exemplars(module.exemplars),
        scenario_summary=summarize_scenario(scenario),
        task_instruction=_task_instruction(text, intent, module.step_template),
        output_schema_instruction=_schema_instruction(scenario),
    )


def zero_shot_prompt(question: str, scenario: NetworkScenario, stages: Sequence[str]) -> PromptBundle:
    """Exemplar-free prompt used to generate Auto-CoT chains."""
    return PromptBundle(
        system_preamble=SYSTEM_PREAMBLE,
        exemplar_block="",
        scenario_summary=summarize_scenario(scenario),
        task_instruction=_task_instruction(question, None, stages),
        output_schema_instruction=_schema_instruction(scenario),
    )


def direct_prompt(intent: ParsedIntent, scenario: NetworkScenario) -> PromptBundle:
    """Non-CoT baseline prompt: no exemplars, no stages, no trigger."""
    text = intent.raw.text if intent.raw is not None else ", ".join(sorted(intent.objectives))
    return PromptBundle(
        system_preamble=SYSTEM_PREAMBLE,
        exemplar_block="",
        scenario_summary=summarize_scenario(scenario),
        task_instruction=f"Intent: {text}\nAnswer directly with the control command.",
        output_schema_instruction=_schema_instruction(scenario),
    )


def scenario_from_prompt(prompt: PromptBundle) -> NetworkScenario | None:
    m = _SCENARIO_BLOCK.search(prompt.scenario_summary)
    if not m:
        return None
    return NetworkScenario.from_dict(json.loads(m.group(1)))


def stages_from_prompt(prompt: PromptBundle) -> tuple[str, ...]:
    return tuple(_STAGE_LINE.findall(prompt.task_instruction))


def intent_from_prompt(prompt: PromptBundle) -> str:
    first = prompt.task_instruction.splitlines()[0] if prompt.task_instruction else ""
    return first.removeprefix("Intent: ")
