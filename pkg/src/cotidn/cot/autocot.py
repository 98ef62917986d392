"""Auto-CoT exemplar construction and the on-disk exemplar store.

Questions are embedded and clustered; the question closest to each centroid is
answered zero-shot (with the step-by-step trigger) by a backend, and the
resulting chain becomes a few-shot exemplar.  The store also takes high-utility
traces from live runs, which is how execution feedback flows back into prompts.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import DomainError
from ..intent.clustering import kmeans
from ..intent.embedding import Embedder, IntentText, embed_intents
from ..physics import NetworkScenario, make_scenario
from .modules import CASE_STUDY_STAGES
from .prompts import zero_shot_prompt
from .types import TASK_TAGS, ExemplarRecord, ReasoningTrace

log = logging.getLogger(__name__)


def build_auto_cot_exemplars(
    questions: Sequence[IntentText | str],
    k: int,
    backend,
    embedder: Embedder | None = None,
    *,
    scenario: NetworkScenario | None = None,
    stages: Sequence[str] = CASE_STUDY_STAGES,
    seed: int = 0,
    tag: str = "joint",
) -> list[ExemplarRecord]:
    """One exemplar per non-empty cluster, in cluster order.

    Backend errors propagate unchanged.  A cluster that ends up empty, or whose
    representative gets a step-less reply, is skipped with a warning.
    """
    items = [q if isinstance(q, IntentText) else IntentText(q, i) for i, q in enumerate(questions)]
    if k < 1 or len(items) < k:
        raise DomainError(f"need at least k={k} questions, got {len(items)}")
    scenario = scenario or make_scenario(seed, 10)

    embeddings = embed_intents(items, embedder)
    order = sorted(range(len(items)), key=lambda i: (items[i].id, i))
    points = np.array([embeddings[i].vector for i in order])
    clusters = kmeans(points, k, seed=seed)
    labels = np.array(clusters.assignments)

    out: list[ExemplarRecord] = []
    for j in range(k):
        members = np.flatnonzero(labels == j)
        if members.size == 0:
            log.warning("cluster %d is empty; no exemplar", j)
            continue
        dist = ((points[members] - clusters.centroids[j]) ** 2).sum(axis=1)
        pick = items[order[int(members[int(np.argmin(dist))])]]
        trace: ReasoningTrace = backend.invoke(zero_shot_prompt(pick.text, scenario, stages))
        if not trace.steps:
            log.warning("backend %s gave no reasoning for %r; skipped", trace.backend_id, pick.text)
            continue
        out.append(ExemplarRecord(pick.text, tuple(trace.steps), trace.final_block, tag))
    return out


class ExemplarStore:
    """JSON-backed list of exemplars, deduplicated on (question, tag)."""

    def __init__(self, records: Sequence[ExemplarRecord] = ()) -> None:
        self.records: list[ExemplarRecord] = []
        for r in records:
            self.add(r)

    def add(self, record: ExemplarRecord) -> bool:
        if any(r.question == record.question and r.tag == record.tag for r in self.records):
            return False
        self.records.append(record)
        return True

    def by_tag(self, tag: str) -> list[ExemplarRecord]:
        if tag not in TASK_TAGS:
            raise DomainError(f"unknown task tag {tag!r}")
        return [r for r in self.records if r.tag == tag]

    def __len__(self) -> int:
        return len(self.records)

    def to_json(self) -> str:
        return json.dumps([r.to_dict() for r in self.records], indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ExemplarStore":
        return cls([ExemplarRecord.from_dict(d) for d in json.loads(text)])

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ExemplarStore":
        p = Path(path)
        return cls.from_json(p.read_text(encoding="utf-8")) if p.exists() else cls()


def harvest_feedback(
    store: ExemplarStore,
    question: str,
    trace: ReasoningTrace,
    q_total: float,
    tag: str,
    threshold: float = 0.8,
) -> bool:
    """Keep a run as a future exemplar when it scored at least ``threshold``."""
    if q_total < threshold or not trace.steps:
        return False
    return store.add(ExemplarRecord(question, tuple(trace.steps), trace.final_block, tag))
