"""Records passed between prompt construction, backends and extraction."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping

from ..errors import DomainError

TASK_TAGS = ("deployment", "power_control", "joint", "generic")
FENCE_TAG = "strategy"


@dataclass(frozen=True)
class ExemplarRecord:
    question: str
    reasoning_chain: tuple[str, ...]
    answer: str
    tag: str = "generic"

    def __post_init__(self) -> None:
        object.__setattr__(self, "reasoning_chain", tuple(self.reasoning_chain))
        if not self.reasoning_chain:
            raise DomainError("an exemplar needs at least one reasoning step")
        if not self.answer.strip():
            raise DomainError("an exemplar needs a non-empty answer")

    def to_dict(self) -> dict:
        return {
            "question": self.question,
            "reasoning_chain": list(self.reasoning_chain),
            "answer": self.answer,
            "tag": self.tag,
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ExemplarRecord":
        return cls(doc["question"], tuple(doc["reasoning_chain"]), doc["answer"], doc.get("tag", "generic"))


@dataclass(frozen=True)
class CotModuleSpec:
    id: int
    task_tag: str
    step_template: tuple[str, ...]
    exemplars: tuple[ExemplarRecord, ...] = ()
    name: str = ""

    def __post_init__(self) -> None:
        if self.task_tag not in TASK_TAGS:
            raise DomainError(f"unknown task tag {self.task_tag!r}")
        object.__setattr__(self, "step_template", tuple(self.step_template))
        object.__setattr__(self, "exemplars", tuple(self.exemplars))


@dataclass(frozen=True)
class PromptBundle:
    system_preamble: str
    exemplar_block: str
    scenario_summary: str
    task_instruction: str
    output_schema_instruction: str

    def render(self) -> str:
        parts = [self.exemplar_block, self.scenario_summary, self.task_instruction, self.output_schema_instruction]
        return "\n\n".join(p for p in parts if p)

    def messages(self) -> list[dict]:
        return [
            {"role": "system", "content": self.system_preamble},
            {"role": "user", "content": self.render()},
        ]


@dataclass(frozen=True)
class ReasoningTrace:
    steps: tuple[str, ...]
    final_block: str
    backend_id: str
    token_usage: Mapping[str, int] | None = None
    latency_ms: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "steps", tuple(self.steps))
        if not self.final_block.strip():
            raise DomainError("trace final block must be non-empty")


@dataclass(frozen=True)
class ControlCommand:
    uav_positions: tuple[tuple[float, float], ...]
    tx_powers_dbm: tuple[float, ...]
    assignments: Mapping[int, int] | None = field(default=None)

    def to_dict(self) -> dict:
        doc: dict = {
            "uav_positions": [[x, y] for x, y in self.uav_positions],
            "tx_powers_dbm": list(self.tx_powers_dbm),
        }
        if self.assignments is not None:
            doc["assignments"] = {str(k): v for k, v in sorted(self.assignments.items())}
        return doc

    def to_block(self) -> str:
        """The command as a fenced strategy block.

        ``repr``-exact float serialization keeps the round trip lossless.
        """
        return f"```{FENCE_TAG}\n{json.dumps(self.to_dict())}\n```"
