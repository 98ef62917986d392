import json

import httpx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cotidn.cot.autocot import ExemplarStore, build_auto_cot_exemplars, harvest_feedback
from cotidn.cot.backends import (
    HttpChatBackend,
    MockCotBackend,
    MockNonCotBackend,
    StaticReplyBackend,
    invoke_backend,
    split_reply,
)
from cotidn.cot.extraction import control_command_schema, extract_strategy
from cotidn.cot.modules import CASE_STUDY_STAGES, default_modules, module_by_tag
from cotidn.cot.prompts import ZERO_SHOT_TRIGGER, compose_prompt, scenario_from_prompt
from cotidn.cot.types import ControlCommand, ExemplarRecord, ReasoningTrace
from cotidn.errors import BackendTimeout, DomainError, MalformedReply, ParseError, TransportError, ValidationError
from cotidn.intent import CASE_STUDY_INTENT, HashingEmbedder, load_corpus, parse_intent
from cotidn.optimizer import DeploymentDecision
from cotidn.physics import NetworkScenario, Position3D, UavNode, UserTerminal, make_scenario

INTENT = parse_intent(CASE_STUDY_INTENT)
JOINT = module_by_tag(default_modules(), "joint")
SC = make_scenario(42, 10, range_m=400.0)


def block(doc) -> str:
    return f"```strategy\n{json.dumps(doc)}\n```"


def trace_of(doc_text: str) -> ReasoningTrace:
    return ReasoningTrace((), f"```strategy\n{doc_text}\n```", "test")


class TestComposePrompt:
    def test_stages_in_order(self):
        text = compose_prompt(JOINT, INTENT, SC).render()
        positions = [text.index(f"Stage: {s}") for s in CASE_STUDY_STAGES]
        assert positions == sorted(positions)

    def test_zero_shot_trigger(self):
        assert not JOINT.exemplars
        assert ZERO_SHOT_TRIGGER in compose_prompt(JOINT, INTENT, SC).render()

    def test_summary_fidelity(self):
        text = compose_prompt(JOINT, INTENT, SC).render()
        for needle in ("20 dBm", "10 users", "1000 m x 1000 m", "2.4 GHz", "20 MHz", "range 400 m"):
            assert needle in text

    def test_ends_with_schema(self):
        p = compose_prompt(JOINT, INTENT, SC)
        assert p.render().endswith(p.output_schema_instruction)
        assert "```strategy" in p.output_schema_instruction

    def test_scenario_round_trips_through_prompt(self):
        assert scenario_from_prompt(compose_prompt(JOINT, INTENT, SC)) == SC

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.tuples(st.text(min_size=1), st.lists(st.text(min_size=1), min_size=1, max_size=4)), max_size=4))
    def test_exemplars_verbatim(self, pairs):
        exemplars = [ExemplarRecord(q, tuple(chain), block({"a": 1}), "joint") for q, chain in pairs]
        module = default_modules(exemplars)[3]
        text = compose_prompt(module, INTENT, SC).render()
        for ex in exemplars:
            assert ex.question in text
            for step in ex.reasoning_chain:
                assert step in text


class TestMockBackends:
    def test_cot_places_uav_over_single_user(self):
        sc = NetworkScenario(
            users=(UserTerminal(0, Position3D(123.0, 456.0)),),
            uavs=(UavNode(0, Position3D(500.0, 500.0, 100.0), 20.0, 300.0),),
        )
        cmd = extract_strategy(invoke_backend(MockCotBackend(), compose_prompt(JOINT, INTENT, sc)), sc)
        (x, y), = cmd.uav_positions
        assert (x, y) == pytest.approx((123.0, 456.0), abs=1.0)
        assert cmd.tx_powers_dbm == (20.0,)

    def test_cot_trace_has_five_stages(self):
        trace = MockCotBackend().invoke(compose_prompt(JOINT, INTENT, SC))
        assert len(trace.steps) == 5
        for step, stage in zip(trace.steps, CASE_STUDY_STAGES):
            assert step.lower().startswith(stage)

    def test_non_cot_is_naive(self):
        trace = MockNonCotBackend().invoke(compose_prompt(JOINT, INTENT, SC))
        assert trace.steps == ()
        assert extract_strategy(trace, SC) == ControlCommand(((500.0, 500.0),), (20.0,))

    def test_bit_deterministic(self):
        p = compose_prompt(JOINT, INTENT, SC)
        assert MockCotBackend().invoke(p) == MockCotBackend().invoke(p)

    @settings(max_examples=50)
    @given(
        st.lists(
            st.tuples(st.floats(0, 1000), st.floats(0, 1000), st.floats(0, 20)), min_size=1, max_size=3
        )
    )
    def test_block_round_trip(self, slots):
        sc = make_scenario(0, 3, n_uavs=len(slots))
        decision = DeploymentDecision(
            tuple(Position3D(x, y, 100.0) for x, y, _ in slots), tuple(p for *_, p in slots)
        )
        cmd = extract_strategy(ReasoningTrace((), decision.to_command().to_block(), "t"), sc)
        back = DeploymentDecision.from_command(cmd, 100.0)
        for a, b in zip(back.uav_positions, decision.uav_positions):
            assert abs(a.x - b.x) <= 1e-9 and abs(a.y - b.y) <= 1e-9
        assert np.allclose(back.tx_powers_dbm, decision.tx_powers_dbm, rtol=0, atol=1e-9)


def chat_reply(content, usage=None):
    doc = {"choices": [{"message": {"role": "assistant", "content": content}}]}
    if usage:
        doc["usage"] = usage
    return doc


class TestHttpBackend:
    def test_wire_shape(self):
        seen = {}

        def handler(request):
            seen["url"] = str(request.url)
            seen["auth"] = request.headers.get("authorization")
            seen["body"] = json.loads(request.content)
            reply = "1. Intent translation: goals\n2. Solving: done\n" + block(
                {"uav_positions": [[1, 2]], "tx_powers_dbm": [3]}
            )
            return httpx.Response(200, json=chat_reply(reply, {"prompt_tokens": 10, "completion_tokens": 5}))

        be = HttpChatBackend("http://llm.test/", "k3y", transport=httpx.MockTransport(handler))
        trace = be.invoke(compose_prompt(JOINT, INTENT, SC))
        assert seen["url"] == "http://llm.test/v1/chat/completions"
        assert seen["auth"] == "Bearer k3y"
        assert seen["body"]["temperature"] == 0.0
        assert [m["role"] for m in seen["body"]["messages"]] == ["system", "user"]
        assert trace.steps == ("Intent translation: goals", "Solving: done")
        assert trace.token_usage == {"prompt_tokens": 10, "completion_tokens": 5}
        assert extract_strategy(trace, SC).uav_positions == ((1.0, 2.0),)

    def test_server_error(self):
        calls = []

        def handler(request):
            calls.append(1)
            return httpx.Response(500, text="boom")

        be = HttpChatBackend("http://llm.test", transport=httpx.MockTransport(handler), retries=2)
        with pytest.raises(TransportError) as err:
            be.invoke(compose_prompt(JOINT, INTENT, SC))
        assert err.value.status == 500
        assert len(calls) == 3

    def test_timeout(self):
        def handler(request):
            raise httpx.ReadTimeout("slow", request=request)

        be = HttpChatBackend("http://llm.test", transport=httpx.MockTransport(handler), retries=0, timeout_s=0.1)
        with pytest.raises(BackendTimeout):
            be.invoke(compose_prompt(JOINT, INTENT, SC))

    def test_reply_without_block(self):
        be = HttpChatBackend(
            "http://llm.test", transport=httpx.MockTransport(lambda r: httpx.Response(200, json=chat_reply("hi")))
        )
        with pytest.raises(MalformedReply):
            be.invoke(compose_prompt(JOINT, INTENT, SC))

    def test_missing_endpoint(self, monkeypatch):
        monkeypatch.delenv("LLM_API_BASE", raising=False)
        with pytest.raises(TransportError):
            HttpChatBackend()


class TestSplitReply:
    FINAL = block({"uav_positions": [[1, 2]], "tx_powers_dbm": [3]})

    def test_numbered(self):
        steps, final = split_reply("Intro\n1. first\ncontinued\n2) second\nStep 3: third\n" + self.FINAL)
        assert steps == ("first continued", "second", "third")
        assert final == self.FINAL

    def test_paragraphs(self):
        steps, _ = split_reply("alpha one\n\nbeta\ntwo\n\n" + self.FINAL)
        assert steps == ("alpha one", "beta two")

    def test_single(self):
        assert split_reply("just one thought " + self.FINAL)[0] == ("just one thought",)

    def test_last_block_wins(self):
        other = block({"uav_positions": [[9, 9]], "tx_powers_dbm": [1]})
        _, final = split_reply(f"1. a\n{other}\n2. b\n{self.FINAL}")
        assert final == self.FINAL

    def test_static_backend(self):
        trace = StaticReplyBackend("1. a\n" + self.FINAL).invoke(compose_prompt(JOINT, INTENT, SC))
        assert trace.steps == ("a",)


class TestExtractStrategy:
    def test_valid(self):
        cmd = extract_strategy(trace_of('{"uav_positions":[[500,500]],"tx_powers_dbm":[20]}'), SC)
        assert cmd == ControlCommand(((500.0, 500.0),), (20.0,))

    def test_overpowered(self):
        with pytest.raises(ValidationError) as err:
            extract_strategy(trace_of('{"uav_positions":[[500,500]],"tx_powers_dbm":[25]}'), SC)
        assert err.value.field == "tx_powers_dbm"

    def test_out_of_area(self):
        with pytest.raises(ValidationError) as err:
            extract_strategy(trace_of('{"uav_positions":[[500,1000.5]],"tx_powers_dbm":[20]}'), SC)
        assert err.value.field == "uav_positions"

    def test_gibberish(self):
        with pytest.raises(ParseError):
            extract_strategy(trace_of("the UAV should go somewhere nice"), SC)

    def test_nan_rejected(self):
        with pytest.raises(ParseError):
            extract_strategy(trace_of('{"uav_positions":[[NaN,1]],"tx_powers_dbm":[20]}'), SC)

    @pytest.mark.parametrize(
        "doc, field",
        [
            ({"uav_positions": [[1, 1]]}, "tx_powers_dbm"),
            ({"uav_positions": [[1, 1], [2, 2]], "tx_powers_dbm": [1]}, "uav_positions"),
            ({"uav_positions": [[1, 1]], "tx_powers_dbm": [1], "extra": 1}, "extra"),
            ({"uav_positions": [[1, 1]], "tx_powers_dbm": [1], "assignments": {"0": 1}}, "assignments"),
            ({"uav_positions": [["a", 1]], "tx_powers_dbm": [1]}, "uav_positions"),
            ([1, 2], "(root)"),
        ],
    )
    def test_field_named(self, doc, field):
        with pytest.raises(ValidationError) as err:
            extract_strategy(trace_of(json.dumps(doc)), SC)
        assert err.value.field == field

    def test_assignments(self):
        doc = {"uav_positions": [[1, 1]], "tx_powers_dbm": [1], "assignments": {"3": 0}}
        assert extract_strategy(trace_of(json.dumps(doc)), SC).assignments == {3: 0}

    def test_schema_bounds_follow_scenario(self):
        schema = control_command_schema(make_scenario(0, 2, area=(300.0, 200.0), max_tx_power_dbm=15.0))
        pos = schema["properties"]["uav_positions"]["items"]["prefixItems"]
        assert (pos[0]["maximum"], pos[1]["maximum"]) == (300.0, 200.0)
        assert schema["properties"]["tx_powers_dbm"]["items"]["maximum"] == 15.0

    @settings(max_examples=300)
    @given(
        st.lists(
            st.tuples(st.floats(-200, 1200), st.floats(-200, 1200), st.floats(-10, 40)), min_size=0, max_size=3
        )
    )
    def test_never_accepts_violations(self, slots):
        doc = {"uav_positions": [[x, y] for x, y, _ in slots], "tx_powers_dbm": [p for *_, p in slots]}
        try:
            cmd = extract_strategy(trace_of(json.dumps(doc)), SC)
        except (ValidationError, ParseError):
            return
        (x, y), = cmd.uav_positions
        assert 0 <= x <= 1000 and 0 <= y <= 1000 and 0 <= cmd.tx_powers_dbm[0] <= 20


class TestAutoCot:
    def test_singleton(self):
        out = build_auto_cot_exemplars(["Maximize coverage for users."], 1, MockCotBackend(), scenario=SC)
        assert [e.question for e in out] == ["Maximize coverage for users."]

    def test_mock_chain_is_five_steps(self):
        (ex,) = build_auto_cot_exemplars([CASE_STUDY_INTENT], 1, MockCotBackend(), scenario=SC)
        assert len(ex.reasoning_chain) == 5
        assert ex.answer == MockCotBackend().invoke(compose_prompt(JOINT, INTENT, SC)).final_block

    def test_three_of_nine(self):
        questions = load_corpus()[:9]
        runs = [build_auto_cot_exemplars(questions, 3, MockCotBackend(), scenario=SC) for _ in range(2)]
        assert runs[0] == runs[1]
        assert len(runs[0]) == 3
        picked = [e.question for e in runs[0]]
        assert len(set(picked)) == 3

        # independent check: each pick is a medoid-like point of a distinct cluster
        emb = HashingEmbedder()
        vecs = np.array(emb.embed_many([q.text for q in questions]))
        idx = [next(i for i, q in enumerate(questions) if q.text == p) for p in picked]
        chosen = vecs[idx]
        labels = np.argmin(((vecs[:, None, :] - chosen[None, :, :]) ** 2).sum(axis=2), axis=1)
        assert sorted(set(labels.tolist())) == [0, 1, 2]

    def test_too_few_questions(self):
        with pytest.raises(DomainError):
            build_auto_cot_exemplars(["a"], 2, MockCotBackend())

    def test_stepless_backend_skipped(self):
        assert build_auto_cot_exemplars(["Maximize coverage."], 1, MockNonCotBackend(), scenario=SC) == []

    def test_backend_failure_propagates(self):
        be = HttpChatBackend("http://llm.test", transport=httpx.MockTransport(lambda r: httpx.Response(503)))
        with pytest.raises(TransportError):
            build_auto_cot_exemplars(["Maximize coverage."], 1, be, scenario=SC)


class TestExemplarStore:
    def test_round_trip(self, tmp_path):
        store = ExemplarStore([ExemplarRecord("q", ("s1", "s2"), "a", "joint")])
        store.save(tmp_path / "ex.json")
        assert ExemplarStore.load(tmp_path / "ex.json").records == store.records

    def test_missing_file_is_empty(self, tmp_path):
        assert len(ExemplarStore.load(tmp_path / "none.json")) == 0

    def test_harvest(self):
        store = ExemplarStore()
        trace = ReasoningTrace(("s",), block({}), "t")
        assert not harvest_feedback(store, "q", trace, 0.5, "joint")
        assert harvest_feedback(store, "q", trace, 0.9, "joint")
        assert not harvest_feedback(store, "q", trace, 0.95, "joint")
        assert store.by_tag("joint")[0].question == "q"
