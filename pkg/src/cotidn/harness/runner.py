"""One decision-layer episode: users, intent, module, prompt, LLM, command, utility."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from functools import lru_cache

from ..activation import ActivationPolicy, select_module, state_from_scenario
from ..cot.autocot import ExemplarStore
from ..cot.backends import HttpChatBackend, MockCotBackend, MockNonCotBackend
from ..cot.extraction import extract_strategy
from ..cot.modules import CASE_STUDY_STAGES, default_modules
from ..cot.prompts import compose_prompt, direct_prompt
from ..cot.types import ControlCommand, CotModuleSpec, ReasoningTrace
from ..errors import ConfigError, MalformedReply, ParseError, UnrecognizedIntent, ValidationError
from ..evaluation import FitnessBreakdown, UtilityReport, composite_utility, q_llm, q_wireless, score_fitness
from ..intent import (
    HashingEmbedder,
    HttpEmbedder,
    ParsedIntent,
    cluster_intents,
    embed_intent,
    embed_intents,
    load_corpus,
    parse_intent,
)
from ..optimizer import DeploymentDecision, OptimizerConfig, apply_decision, centroid_baseline
from ..physics import NetworkScenario, evaluate_scenario, make_scenario
from .config import ExperimentConfig


@dataclass(frozen=True)
class RunRecord:
    config_hash: str
    seed: int
    range_m: float
    pipeline: str
    backend_id: str
    module_id: int | None
    utility: UtilityReport
    fitness: FitnessBreakdown
    metrics: dict
    command: ControlCommand
    step_count: int
    error: str | None = None
    wall_ms: float = field(default=0.0, compare=False)
    trace: ReasoningTrace | None = field(default=None, compare=False, repr=False)

    @property
    def fallback(self) -> bool:
        return self.error is not None

    def to_dict(self) -> dict:
        return {
            "config_hash": self.config_hash,
            "seed": self.seed,
            "range_m": self.range_m,
            "pipeline": self.pipeline,
            "backend_id": self.backend_id,
            "module_id": self.module_id,
            "utility": self.utility.to_dict(),
            "fitness": asdict(self.fitness),
            "metrics": self.metrics,
            "command": self.command.to_dict(),
            "step_count": self.step_count,
            "error": self.error,
            "fallback": self.fallback,
            "wall_ms": self.wall_ms,
        }


def build_scenario(config: ExperimentConfig, seed: int, range_m: float) -> NetworkScenario:
    t = config.scenario
    return make_scenario(
        seed,
        t.user_count,
        n_uavs=t.n_uavs,
        range_m=range_m,
        area=t.area_m,
        altitude_m=t.altitude_m,
        max_tx_power_dbm=t.max_tx_power_dbm,
        channel=t.channel,
    )


@lru_cache(maxsize=8)
def _fit_intents(kind: str, model: str, timeout_s: float, retries: int, k: int, seed: int):
    embedder = HttpEmbedder(model=model, timeout_s=timeout_s, retries=retries) if kind == "http" else HashingEmbedder()
    return cluster_intents(embed_intents(load_corpus(), embedder), k, seed), embedder


def classify_intent(config: ExperimentConfig, text: str | None = None) -> ParsedIntent:
    """Parse ``text`` (default: the configured intent) and tag it with its corpus cluster."""
    text = config.intent if text is None else text
    h = config.http
    clusters, embedder = _fit_intents(
        config.embedder, h.embed_model, h.timeout_s, h.retries, config.intent_clusters, config.config_seed
    )
    cluster = clusters.nearest(embed_intent(text, embedder).vector)
    try:
        return parse_intent(text, cluster)
    except UnrecognizedIntent as exc:
        raise ConfigError(str(exc)) from exc


@lru_cache(maxsize=8)
def _mock_cot(optimizer: OptimizerConfig) -> MockCotBackend:
    return MockCotBackend(optimizer)


def make_backend(config: ExperimentConfig, pipeline: str):
    if config.backend == "http":
        h = config.http
        return HttpChatBackend(model=h.model, temperature=h.temperature, timeout_s=h.timeout_s, retries=h.retries)
    return _mock_cot(config.optimizer) if pipeline == "cot" else MockNonCotBackend()


def load_modules(config: ExperimentConfig) -> tuple[CotModuleSpec, ...]:
    if config.exemplar_path:
        return default_modules(ExemplarStore.load(config.exemplar_path).records)
    return default_modules()


def run_single(
    config: ExperimentConfig,
    seed: int,
    range_m: float,
    pipeline: str = "cot",
    *,
    policy: ActivationPolicy | None = None,
    module: CotModuleSpec | None = None,
    backend=None,
    intent_text: str | None = None,
    modules: tuple[CotModuleSpec, ...] | None = None,
) -> RunRecord:
    """Run one episode end to end.

    The CoT pipeline asks ``policy`` for a module unless ``module`` is forced.
    Extraction failures (and replies without a strategy block) fall back to the
    centroid baseline and are recorded in ``error``.  Transport errors propagate.
    """
    start = time.perf_counter()
    scenario = build_scenario(config, seed, range_m)
    intent = classify_intent(config, intent_text)
    backend = backend or make_backend(config, pipeline)

    if pipeline == "cot":
        if module is None:
            if policy is None:
                from .training import ensure_policy

                policy = ensure_policy(config)
            modules = modules or load_modules(config)
            module = modules[select_module(state_from_scenario(scenario, intent.category), policy)]
        prompt = compose_prompt(module, intent, scenario)
        template = module.step_template
    elif pipeline == "non_cot":
        module = None
        prompt = direct_prompt(intent, scenario)
        template = CASE_STUDY_STAGES
    else:
        raise ConfigError(f"unknown pipeline {pipeline!r}")

    error = None
    baseline = centroid_baseline(scenario).to_command()
    try:
        trace = backend.invoke(prompt)
    except MalformedReply as exc:
        error = f"MalformedReply: {exc}"
        trace = ReasoningTrace((), baseline.to_block(), getattr(backend, "backend_id", "unknown"))
    if error is None:
        try:
            command = extract_strategy(trace, scenario)
        except (ParseError, ValidationError) as exc:
            error = f"{type(exc).__name__}: {exc}"
    if error is not None:
        command = baseline

    decision = DeploymentDecision.from_command(command, scenario.altitude_m)
    metrics = evaluate_scenario(apply_decision(scenario, decision))
    fitness = score_fitness(trace, scenario, command, metrics, template)
    q_c, q_r = q_wireless(metrics, scenario)
    report = composite_utility(config.weights, q_llm(fitness), q_c, q_r)
    return RunRecord(
        config_hash=config.config_hash(),
        seed=seed,
        range_m=float(range_m),
        pipeline=pipeline,
        backend_id=trace.backend_id,
        module_id=None if module is None else module.id,
        utility=report,
        fitness=fitness,
        metrics=metrics.summary(),
        command=command,
        step_count=len(trace.steps),
        error=error,
        wall_ms=(time.perf_counter() - start) * 1e3,
        trace=trace,
    )
