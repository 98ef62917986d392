"""LLM backends: an OpenAI-compatible HTTP client and two offline mocks.

``MockCotBackend`` reads the scenario and the requested reasoning stages back
out of the prompt and actually performs each stage with the physics engine and
the deployment search, so its numbers are real.  ``MockNonCotBackend`` skips
reasoning and answers with the area centre at full power.
"""

from __future__ import annotations

import logging
import os
import re
import time
from typing import Protocol

import httpx

from ..errors import BackendTimeout, MalformedReply, TransportError
from ..evaluation import q_wireless
from ..optimizer import (
    DeploymentDecision,
    OptimizerConfig,
    apply_decision,
    centroid_baseline,
    coverage_first_placement,
    search_deployment,
)
from ..physics import NetworkScenario, Position3D, evaluate_scenario, make_scenario
from .prompts import intent_from_prompt, scenario_from_prompt, stages_from_prompt
from .types import FENCE_TAG, PromptBundle, ReasoningTrace

log = logging.getLogger(__name__)

_FENCED = re.compile(r"```([A-Za-z0-9_-]*)[ \t]*\r?\n(.*?)```", re.DOTALL)
_NUMBERED = re.compile(r"^\s*(?:step\s*)?(\d+)[.):]\s+(.*)$", re.IGNORECASE)


class Backend(Protocol):
    backend_id: str

    def invoke(self, prompt: PromptBundle) -> ReasoningTrace: ...


def invoke_backend(backend: Backend, prompt: PromptBundle) -> ReasoningTrace:
    return backend.invoke(prompt)


def split_reply(text: str) -> tuple[tuple[str, ...], str]:
    """Split free text into reasoning steps and the final strategy block.

    Steps start at numbered lines ("1.", "2)", "Step 3:"), with following lines
    folded in.  Without numbering, blank-line paragraphs become steps; a reply
    that splits neither way is one step.
    """
    blocks = [m for m in _FENCED.finditer(text) if m.group(1) == FENCE_TAG]
    if not blocks:
        raise MalformedReply("reply has no ```strategy block")
    final = blocks[-1]
    final_block = final.group(0)
    body = _FENCED.sub("", text[: final.start()]).strip()

    steps: list[str] = []
    current: list[str] | None = None
    for line in body.splitlines():
        m = _NUMBERED.match(line)
        if m:
            if current:
                steps.append(" ".join(current).strip())
            current = [m.group(2).strip()]
        elif current is not None and line.strip():
            current.append(line.strip())
    if current:
        steps.append(" ".join(current).strip())
    if not steps and body:
        steps = [" ".join(p.split()) for p in re.split(r"\n\s*\n", body) if p.strip()]
    return tuple(s for s in steps if s), final_block


class HttpChatBackend:
    """Client for ``POST {base_url}/v1/chat/completions``."""

    def __init__(
        self,
        base_url: str | None = None,
        api_key: str | None = None,
        model: str = "gpt-4o",
        *,
        temperature: float = 0.0,
        timeout_s: float = 60.0,
        retries: int = 2,
        transport: httpx.BaseTransport | None = None,
    ) -> None:
        self.base_url = (base_url or os.environ.get("LLM_API_BASE", "")).rstrip("/")
        if not self.base_url:
            raise TransportError("no chat endpoint configured (LLM_API_BASE)")
        self.api_key = api_key if api_key is not None else os.environ.get("LLM_API_KEY", "")
        self.model = model
        self.temperature = temperature
        self.timeout_s = timeout_s
        self.retries = retries
        self.transport = transport
        self.backend_id = f"http:{model}"

    def _request(self, prompt: PromptBundle) -> tuple[dict, float]:
        body = {"model": self.model, "messages": prompt.messages(), "temperature": self.temperature}
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        last: TransportError | None = None
        for attempt in range(1, self.retries + 2):
            start = time.perf_counter()
            try:
                with httpx.Client(transport=self.transport, timeout=self.timeout_s) as client:
                    resp = client.post(f"{self.base_url}/v1/chat/completions", json=body, headers=headers)
            except httpx.TimeoutException as exc:
                last = BackendTimeout(f"chat request timed out after {self.timeout_s} s: {exc}", attempts=attempt)
                continue
            except httpx.HTTPError as exc:
                last = TransportError(f"chat request failed: {exc}", attempts=attempt)
                continue
            elapsed_ms = (time.perf_counter() - start) * 1e3
            if resp.status_code // 100 != 2:
                last = TransportError(
                    f"chat endpoint returned {resp.status_code}", status=resp.status_code, attempts=attempt
                )
                log.warning("attempt %d: %s", attempt, last)
                continue
            try:
                return resp.json(), elapsed_ms
            except ValueError as exc:
                raise TransportError("chat endpoint returned non-JSON", resp.status_code, attempt) from exc
        assert last is not None
        raise last

    def invoke(self, prompt: PromptBundle) -> ReasoningTrace:
        doc, elapsed_ms = self._request(prompt)
        try:
            content = doc["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise MalformedReply(f"unexpected completion shape: {exc!r}") from exc
        steps, final_block = split_reply(content or "")
        usage = doc.get("usage")
        token_usage = {k: int(v) for k, v in usage.items() if isinstance(v, int)} if isinstance(usage, dict) else None
        return ReasoningTrace(steps, final_block, self.backend_id, token_usage, elapsed_ms)


def _reference_scenario() -> NetworkScenario:
    return make_scenario(0, 10)


def _mbps(v: float) -> str:
    return f"{v / 1e6:.4f} Mbps"


class MockCotBackend:
    """Offline backend that carries out each requested stage for real."""

    backend_id = "mock-cot"

    def __init__(self, optimizer: OptimizerConfig | None = None) -> None:
        self.optimizer = optimizer or OptimizerConfig()
        # the decision depends only on (scenario, stages); sweeps and training repeat them a lot
        self._memo: dict[tuple, tuple[DeploymentDecision, str]] = {}

    def _decide(self, scenario: NetworkScenario, stages: tuple[str, ...]) -> tuple[DeploymentDecision, str]:
        key = (scenario, stages)
        if key not in self._memo:
            self._memo[key] = self._solve(scenario, stages)
        return self._memo[key]

    def _solve(self, scenario: NetworkScenario, stages: tuple[str, ...]) -> tuple[DeploymentDecision, str]:
        if "solving" in stages:
            res = search_deployment(scenario, self.optimizer)
            return res.decision, (
                f"Solving: heuristic search over a {self.optimizer.coarse_grid_step_m:g} m grid with "
                f"{res.evaluations} evaluations, refined by pattern search"
            )
        if "placement" in stages:
            return coverage_first_placement(scenario, self.optimizer, anchors=False), (
                f"Placement: position search on a {self.optimizer.coarse_grid_step_m:g} m grid maximizing "
                "the number of covered users at full power"
            )
        if "power allocation" in stages:
            w, h = scenario.area_m
            centre = Position3D(w / 2.0, h / 2.0, scenario.altitude_m)
            k = len(scenario.uavs)
            return DeploymentDecision((centre,) * k, (scenario.max_tx_power_dbm,) * k), (
                "Power allocation: with a single co-channel cell the rate grows with transmit power "
                "level, so every UAV uses the cap"
            )
        return centroid_baseline(scenario), "Answer: a proposal to hover over the users' centroid"

    def invoke(self, prompt: PromptBundle) -> ReasoningTrace:
        scenario = scenario_from_prompt(prompt) or _reference_scenario()
        stages = stages_from_prompt(prompt)
        decision, solve_line = self._decide(scenario, stages)
        executed = apply_decision(scenario, decision)
        metrics = evaluate_scenario(executed)
        q_c, q_r = q_wireless(metrics, scenario)
        ch = scenario.channel
        ranges = sorted({a.comm_range_m for a in scenario.uavs})

        placed = "; ".join(
            f"UAV {j} at ({p.x!r}, {p.y!r}) with transmit power {pw!r} dBm"
            for j, (p, pw) in enumerate(zip(decision.uav_positions, decision.tx_powers_dbm))
        )
        lines = {
            "intent translation": (
                f"Intent translation: the request '{intent_from_prompt(prompt)}' becomes the quantifiable "
                "goals coverage maximization and sum-rate improvement"
            ),
            "parameter extraction": (
                f"Parameter extraction: {len(scenario.users)} user coordinates; carrier "
                f"{ch.carrier_freq_hz / 1e9:g} GHz, bandwidth {ch.bandwidth_hz / 1e6:g} MHz, "
                f"noise floor {ch.noise_dbm:.4f} dBm, altitude {scenario.altitude_m:g} m, "
                f"range {ranges[-1]:g} m, power cap {scenario.max_tx_power_dbm:g} dBm"
            ),
            "problem formulation": (
                "Problem formulation: maximize Q_c + Q_R where received power follows free-space path loss, "
                "SINR includes co-channel interference, and each covered user gets the Shannon rate of "
                "an equal bandwidth share"
            ),
            "utility computation": (
                f"Utility computation: coverage {metrics.coverage_ratio:.4f}, sum rate "
                f"{_mbps(metrics.sum_rate_bps)}, Q_c + Q_R = {q_c + q_r:.4f}"
            ),
            "understanding": "Understanding: the request asks for a UAV position and power",
        }
        steps = []
        for stage in stages:
            if stage in ("solving", "placement", "power allocation", "answer"):
                steps.append(f"{solve_line}; {placed}")
            elif stage in lines:
                steps.append(lines[stage])
        return ReasoningTrace(tuple(steps), decision.to_command().to_block(), self.backend_id)


class MockNonCotBackend:
    """Answers immediately: area centre, full power, no reasoning steps."""

    backend_id = "mock-non-cot"

    def invoke(self, prompt: PromptBundle) -> ReasoningTrace:
        scenario = scenario_from_prompt(prompt) or _reference_scenario()
        w, h = scenario.area_m
        k = len(scenario.uavs)
        centre = Position3D(w / 2.0, h / 2.0, scenario.altitude_m)
        decision = DeploymentDecision((centre,) * k, (scenario.max_tx_power_dbm,) * k)
        return ReasoningTrace((), decision.to_command().to_block(), self.backend_id)


class StaticReplyBackend:
    """Returns a fixed free-text reply; for testing the parsing path offline."""

    def __init__(self, reply: str, backend_id: str = "static") -> None:
        self.reply = reply
        self.backend_id = backend_id

    def invoke(self, prompt: PromptBundle) -> ReasoningTrace:
        steps, final_block = split_reply(self.reply)
        return ReasoningTrace(steps, final_block, self.backend_id)
