import json
import math
from pathlib import Path

import httpx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cotidn.errors import DomainError, TransportError, UnrecognizedIntent
from cotidn.intent import (
    CASE_STUDY_INTENT,
    HashingEmbedder,
    HttpEmbedder,
    IntentEmbedding,
    IntentText,
    cluster_intents,
    embed_intent,
    embed_intents,
    fnv1a64,
    kmeans,
    load_corpus,
    parse_intent,
)

GOLDEN = json.loads((Path(__file__).parent / "fixtures" / "golden_embeddings.json").read_text())


class TestEmbedding:
    def test_fnv_published_vectors(self):
        assert fnv1a64(b"") == 0xCBF29CE484222325
        assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C
        assert fnv1a64(b"foobar") == 0x85944171F73967E8

    @pytest.mark.parametrize("text", sorted(GOLDEN))
    def test_golden_vectors(self, text):
        e = embed_intent(text)
        nonzero = {str(i): v for i, v in enumerate(e.vector) if v}
        assert nonzero.keys() == GOLDEN[text].keys()
        for k, v in GOLDEN[text].items():
            assert nonzero[k] == pytest.approx(v, abs=1e-15)

    def test_deterministic(self):
        assert embed_intent("maximize coverage") == embed_intent("maximize coverage")

    def test_distinct_intents_not_parallel(self):
        a = np.array(embed_intent("maximize coverage").vector)
        b = np.array(embed_intent("minimize energy").vector)
        assert float(a @ b) < 1.0

    @given(st.text(min_size=1).filter(lambda s: any(c.isascii() and c.isalnum() for c in s)))
    def test_unit_norm(self, text):
        e = embed_intent(text)
        assert e.dim == 256
        assert math.sqrt(sum(v * v for v in e.vector)) == pytest.approx(1.0, abs=1e-9)

    def test_empty_token_stream(self):
        with pytest.raises(DomainError):
            embed_intent("!!! ???")
        with pytest.raises(DomainError):
            IntentText("   ")

    def test_custom_dim(self):
        e = embed_intents(["coverage"], HashingEmbedder(dim=16))[0]
        assert e.dim == 16


def _embedding_server(calls, fail_first=0, status=500):
    def handler(request: httpx.Request) -> httpx.Response:
        calls.append(request)
        if len(calls) <= fail_first:
            return httpx.Response(status, json={"error": "boom"})
        body = json.loads(request.content)
        data = [
            {"index": i, "embedding": [float(len(t)), 1.0, 0.0]} for i, t in enumerate(body["input"])
        ]
        return httpx.Response(200, json={"data": data})

    return httpx.MockTransport(handler)


class TestHttpEmbedder:
    def test_wire_shape_and_normalization(self):
        calls = []
        emb = HttpEmbedder("http://embed.test", "k3y", model="m", transport=_embedding_server(calls))
        out = embed_intents(["ab", "abcd"], emb)
        req = calls[0]
        assert req.url == "http://embed.test/v1/embeddings"
        assert req.headers["authorization"] == "Bearer k3y"
        assert json.loads(req.content) == {"model": "m", "input": ["ab", "abcd"]}
        assert out[0].vector == pytest.approx((2 / math.sqrt(5), 1 / math.sqrt(5), 0.0))
        assert out[1].dim == 3

    def test_retry_then_success(self):
        calls = []
        emb = HttpEmbedder("http://embed.test", transport=_embedding_server(calls, fail_first=2), retries=2)
        assert len(emb.embed_many(["x"])) == 1
        assert len(calls) == 3

    def test_failure_carries_retry_metadata(self):
        calls = []
        emb = HttpEmbedder("http://embed.test", transport=_embedding_server(calls, fail_first=99, status=503),
                           retries=2)
        with pytest.raises(TransportError) as err:
            emb.embed_many(["x"])
        assert err.value.status == 503 and err.value.attempts == 3

    def test_env_configuration(self, monkeypatch):
        monkeypatch.setenv("EMBED_API_BASE", "http://env.test/")
        monkeypatch.setenv("EMBED_API_KEY", "secret")
        emb = HttpEmbedder()
        assert emb.base_url == "http://env.test" and emb.api_key == "secret"

    def test_bounded_batches(self):
        calls = []
        emb = HttpEmbedder("http://embed.test", transport=_embedding_server(calls), batch_size=2, max_in_flight=2)
        out = emb.embed_many([f"t{i}" * (i + 1) for i in range(5)])
        assert len(calls) == 3 and len(out) == 5


class TestClustering:
    def test_well_separated(self):
        res = kmeans([(0, 0), (0, 1), (10, 10), (10, 11)], 2, seed=0)
        a = res.assignments
        assert a[0] == a[1] and a[2] == a[3] and a[0] != a[2]
        cents = sorted(res.centroids)
        assert cents == [(0.0, 0.5), (10.0, 10.5)]

    def test_k_equals_n_zero_sse(self):
        pts = np.random.default_rng(1).normal(size=(7, 3))
        assert kmeans(pts, 7, seed=3).sse == pytest.approx(0.0, abs=1e-18)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32), st.integers(2, 30), st.integers(1, 5))
    def test_invariants(self, seed, n, k):
        k = min(k, n)
        pts = np.random.default_rng(seed).normal(size=(n, 4))
        res = kmeans(pts, k, seed=seed, max_iters=50)
        hist = res.sse_history
        assert all(b <= a + 1e-9 for a, b in zip(hist, hist[1:]))
        assert all(0 <= a < k for a in res.assignments)
        labels = np.array(res.assignments)
        cents = np.array(res.centroids)
        for j in range(k):
            if (labels == j).any():
                assert np.allclose(cents[j], pts[labels == j].mean(axis=0))
        assert res.sse == pytest.approx(float(((pts - cents[labels]) ** 2).sum()))

    def test_k_out_of_range(self):
        with pytest.raises(DomainError):
            kmeans([(0, 0)], 2)
        with pytest.raises(DomainError):
            kmeans([(0, 0)], 0)

    def test_deterministic_and_permutation_consistent(self):
        embs = embed_intents(load_corpus())
        base = cluster_intents(embs, 4, seed=5)
        assert base == cluster_intents(embs, 4, seed=5)
        perm = list(reversed(range(len(embs))))
        shuffled = cluster_intents([embs[i] for i in perm], 4, seed=5)
        unpermuted = [0] * len(embs)
        for pos, i in enumerate(perm):
            unpermuted[i] = shuffled.assignments[pos]
        assert tuple(unpermuted) == base.assignments
        assert shuffled.centroids == base.centroids

    def test_nearest(self):
        res = kmeans([(0, 0), (0, 1), (10, 10), (10, 11)], 2, seed=0)
        assert res.nearest((9.0, 9.0)) == res.assignments[2]

    def test_accepts_embedding_records(self):
        embs = [IntentEmbedding((1.0, 0.0), 2, 1), IntentEmbedding((0.0, 1.0), 2, 0)]
        assert cluster_intents(embs, 2, seed=1).k == 2


class TestParsing:
    def test_case_study(self):
        p = parse_intent(CASE_STUDY_INTENT, cluster=2)
        assert p.objectives == {"coverage", "sum_rate"}
        assert p.category == 2 and p.raw.text == CASE_STUDY_INTENT

    def test_energy(self):
        assert parse_intent("reduce energy use").objectives == {"energy"}

    def test_no_keywords(self):
        with pytest.raises(UnrecognizedIntent):
            parse_intent("hello world")

    @pytest.mark.parametrize(
        "text,key,value",
        [
            ("Ensure at least 90% coverage", "min_coverage", 0.9),
            ("keep coverage above 75% with low energy", "min_coverage", 0.75),
            ("boost throughput with transmit power below 18 dBm", "max_power_dbm", 18.0),
            ("sum rate of at least 1.5 Gbps", "min_sum_rate_bps", 1.5e9),
            ("latency under 10 ms please", "max_latency_ms", 10.0),
        ],
    )
    def test_constraints(self, text, key, value):
        assert parse_intent(text).constraints[key] == pytest.approx(value)

    def test_corpus_total(self):
        for intent in load_corpus():
            try:
                p = parse_intent(intent)
            except UnrecognizedIntent:
                continue
            assert p.objectives
            assert all(math.isfinite(v) for v in p.constraints.values())

    @given(st.text())
    def test_never_panics(self, text):
        try:
            parse_intent(text)
        except (UnrecognizedIntent, DomainError):
            pass
