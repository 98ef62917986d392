from .types import (
    FENCE_TAG,
    TASK_TAGS,
    ControlCommand,
    CotModuleSpec,
    ExemplarRecord,
    PromptBundle,
    ReasoningTrace,
)

__all__ = [
    "FENCE_TAG",
    "TASK_TAGS",
    "ControlCommand",
    "CotModuleSpec",
    "ExemplarRecord",
    "PromptBundle",
    "ReasoningTrace",
]
