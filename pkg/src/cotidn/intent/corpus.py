"""Bundled intent corpus used to fit the intent clusters."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

from .embedding import IntentText


@lru_cache(maxsize=1)
def _load() -> dict:
    return json.loads(resources.files("cotidn").joinpath("data/intents.json").read_text(encoding="utf-8"))


def load_corpus() -> list[IntentText]:
    return [IntentText(d["text"], d["id"]) for d in _load()["intents"]]


CASE_STUDY_INTENT = _load()["case_study"]
