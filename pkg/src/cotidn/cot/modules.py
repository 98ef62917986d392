"""Registry of task-specific CoT modules and their reasoning stages."""

from __future__ import annotations

from dataclasses import replace
from typing import Iterable, Sequence

from .types import CotModuleSpec, ExemplarRecord

CASE_STUDY_STAGES = (
    "intent translation",
    "parameter extraction",
    "problem formulation",
    "solving",
    "utility computation",
)

# A step "covers" a stage when it mentions any of the stage's keywords.
STAGE_KEYWORDS: dict[str, tuple[str, ...]] = {
    "intent translation": ("intent translation", "quantifiable goal", "objectives"),
    "parameter extraction": ("parameter extraction", "extracted parameters", "user coordinates"),
    "problem formulation": ("problem formulation", "formulate", "maximize q_c"),
    "solving": ("solving", "solution", "heuristic search"),
    "utility computation": ("utility computation", "composite utility", "q_c + q_r"),
    "placement": ("placement", "position search"),
    "power allocation": ("power allocation", "transmit power level"),
    "understanding": ("understanding", "request"),
    "answer": ("answer", "proposal"),
}

JOINT, DEPLOYMENT, POWER_CONTROL, GENERIC = "joint", "deployment", "power_control", "generic"


def default_modules(exemplars: Iterable[ExemplarRecord] = ()) -> tuple[CotModuleSpec, ...]:
    """The four built-in modules, indexed by action id.

    Exemplars are attached to the module whose task tag they carry; ``generic``
    exemplars go to every module.
    """
    specs = (
        CotModuleSpec(0, GENERIC, ("understanding", "answer"), name="generic"),
        CotModuleSpec(
            1, DEPLOYMENT, ("intent translation", "parameter extraction", "placement"), name="deployment"
        ),
        CotModuleSpec(
            2,
            POWER_CONTROL,
            ("intent translation", "parameter extraction", "power allocation"),
            name="power-control",
        ),
        CotModuleSpec(3, JOINT, CASE_STUDY_STAGES, name="joint deployment and power control"),
    )
    pool = list(exemplars)
    if not pool:
        return specs
    return tuple(attach_exemplars(s, pool) for s in specs)


def attach_exemplars(spec: CotModuleSpec, pool: Sequence[ExemplarRecord]) -> CotModuleSpec:
    chosen = tuple(e for e in pool if e.tag in (spec.task_tag, GENERIC))
    return replace(spec, exemplars=spec.exemplars + chosen)


def module_by_tag(modules: Sequence[CotModuleSpec], tag: str) -> CotModuleSpec:
    for m in modules:
        if m.task_tag == tag:
            return m
    raise KeyError(tag)


def stages_matched(steps: Sequence[str], template: Sequence[str]) -> int:
    lowered = [s.lower() for s in steps]
    count = 0
    for stage in template:
        keys = STAGE_KEYWORDS.get(stage, (stage,))
        if any(k in step for step in lowered for k in keys):
            count += 1
    return count
