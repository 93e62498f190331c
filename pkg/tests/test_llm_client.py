"""Tests for the chat-completions client, its cache and the remote comparator."""

import asyncio
import json

import httpx
import pytest

from survrank.errors import EndpointError, ParseError, TransportError
from survrank.services.inference import AnchorSet, score_cohort
from survrank.services.llm_client import (
    ChatCompletionsClient,
    ComparisonResult,
    EndpointConfig,
    RemoteComparator,
    ResponseCache,
    extract_choice,
    parse_choice,
    parse_label,
    query_comparison,
)
from survrank.services.textualize import build_pair_prompt, load_template
from tests.conftest import StubEndpoint, coded_cohort


def endpoint(tmp_path=None, **overrides):
    settings = dict(base_url="http://stub.local", model_id="stub-model", backoff_base=0.0)
    if tmp_path is not None:
        settings["cache_path"] = tmp_path / "cache.jsonl"
    settings.update(overrides)
    return EndpointConfig(**settings)


def client_for(stub, config=None):
    return ChatCompletionsClient(config or endpoint(), transport=stub.transport)


def sample_prompt(policy="fix_first"):
    cohort = coded_cohort(4)
    return build_pair_prompt(load_template("icu"), cohort.by_id("p01"), cohort.by_id("p03"), policy=policy)


def test_url_and_headers():
    config = endpoint(api_key="sk-test")
    assert config.url == "http://stub.local/v1/chat/completions"
    assert EndpointConfig(base_url="http://h/v1/", model_id="m").url == "http://h/v1/chat/completions"
    assert config.headers()["Authorization"] == "Bearer sk-test"
    assert "Authorization" not in endpoint().headers()


def test_request_body():
    body = client_for(StubEndpoint()).build_request("hello")
    assert body["messages"] == [{"role": "user", "content": "hello"}]
    assert body["temperature"] == pytest.approx(1e-5)
    assert body["logprobs"] is True


@pytest.mark.parametrize(
    "content,label",
    [
        ("b", "b"),
        (" (a).", "a"),
        ("The answer is b", "b"),
        ("Answer: a", "a"),
        ("I think b.", "b"),
        ("a or b", None),
        ("neither", None),
    ],
)
def test_parse_label(content, label):
    assert parse_label(content) == label


def test_extract_choice_probability_from_logprob():
    data = {
        "choices": [
            {
                "message": {"content": "a"},
                "logprobs": {"content": [{"token": "a", "logprob": -0.105}]},
            }
        ]
    }
    label, probability, raw = extract_choice(data)
    assert label == "a"
    assert probability == pytest.approx(0.900, abs=1e-3)
    assert raw == "a"


def test_extract_choice_without_logprobs():
    assert extract_choice({"choices": [{"message": {"content": "b"}}]})[:2] == ("b", 1.0)


def test_extract_choice_malformed():
    label, _, raw = extract_choice({"unexpected": True})
    assert label is None
    assert "unexpected" in raw


def test_parse_choice_maps_label_to_subject():
    prompt = sample_prompt()  # fix_first: anchor p03 is "a", subject p01 is "b"
    assert parse_choice(ComparisonResult("b", 0.9, "b"), prompt).p_first_earlier == pytest.approx(0.9)
    assert parse_choice(ComparisonResult("a", 0.9, "a"), prompt).p_first_earlier == pytest.approx(0.1)
    with pytest.raises(ParseError):
        parse_choice(ComparisonResult(None, 1.0, "hmm"), prompt)


def test_query_comparison_answers_smaller_code(stub_endpoint):
    prompt = sample_prompt()
    result = query_comparison(endpoint(), prompt, client=client_for(stub_endpoint))

    assert result.choice == "b"
    assert result.cached is False
    assert parse_choice(result, prompt).p_first_earlier == pytest.approx(0.99, abs=1e-3)
    assert stub_endpoint.calls == 1


def test_cache_hit_makes_no_network_call(tmp_path):
    prompt = sample_prompt()
    config = endpoint(tmp_path)
    cache = ResponseCache(config.cache_path)
    cache.put(
        ResponseCache.key(config.model_id, prompt.text),
        {"model": config.model_id},
        {"choices": [{"message": {"content": "a"}}]},
    )

    stub = StubEndpoint()
    result = ChatCompletionsClient(config, transport=stub.transport).query(prompt)

    assert result.cached is True
    assert result.choice == "a"
    assert stub.calls == 0


def test_cache_persists_across_clients(tmp_path):
    prompt = sample_prompt()
    config = endpoint(tmp_path)

    first = StubEndpoint()
    client_for(first, config).query(prompt)
    second = StubEndpoint()
    warm = client_for(second, config)
    result = warm.query(prompt)

    assert first.calls == 1
    assert second.calls == 0
    assert warm.network_calls == 0
    assert result.cached is True
    lines = config.cache_path.read_text().splitlines()
    assert len(lines) == 1
    assert set(json.loads(lines[0])) == {"key", "request", "response", "timestamp"}


def test_cache_key_depends_on_model():
    assert ResponseCache.key("m1", "prompt") != ResponseCache.key("m2", "prompt")
    assert ResponseCache.key("m1", "prompt") == ResponseCache.key("m1", "prompt")


def test_cache_skips_corrupt_lines(tmp_path):
    path = tmp_path / "cache.jsonl"
    good = json.dumps({"key": "k", "request": {}, "response": {"choices": []}, "timestamp": "t"})
    path.write_text(good + "\n{not json\n")
    assert len(ResponseCache(path)) == 1


def test_transport_failure_tries_three_times():
    stub = StubEndpoint(fail=True)
    client = client_for(stub)
    with pytest.raises(TransportError):
        client.query(sample_prompt())
    assert stub.calls == 3
    assert client.network_calls == 3


def test_server_error_is_retried():
    stub = StubEndpoint(statuses=[503, 200])
    result = client_for(stub).query(sample_prompt())
    assert result.choice == "b"
    assert stub.calls == 2


def test_rate_limit_exhausts_attempts():
    stub = StubEndpoint(statuses=[429, 429, 429])
    with pytest.raises(EndpointError) as info:
        client_for(stub).query(sample_prompt())
    assert info.value.status == 429
    assert stub.calls == 3


def test_client_error_is_not_retried():
    stub = StubEndpoint(statuses=[400])
    with pytest.raises(EndpointError) as info:
        client_for(stub).query(sample_prompt())
    assert info.value.status == 400
    assert stub.calls == 1


def test_in_flight_limit_and_order():
    state = {"active": 0, "peak": 0}
    stub = StubEndpoint()

    async def handler(request):
        state["active"] += 1
        state["peak"] = max(state["peak"], state["active"])
        await asyncio.sleep(0.01)
        state["active"] -= 1
        return stub(request)

    cohort = coded_cohort(12)
    template = load_template("icu")
    prompts = [
        build_pair_prompt(template, cohort.by_id(f"p{i:02d}"), cohort.by_id("p11"), policy="fix_first").text
        for i in range(11)
    ]
    client = ChatCompletionsClient(endpoint(max_in_flight=2), transport=httpx.MockTransport(handler))

    results = client.query_many(prompts)

    assert state["peak"] <= 2
    assert [r.choice for r in results] == ["b"] * 11


def _anchored(n_subjects=6, n_anchors=6):
    cohort = coded_cohort(2 * max(n_subjects, n_anchors))
    anchors = AnchorSet(anchors=tuple(cohort.records[1::2][:n_anchors]))
    test = cohort.subset(r.id for r in cohort.records[0::2][:n_subjects])
    return test, anchors


def test_remote_ranking_under_both_policies():
    test, anchors = _anchored()
    template = load_template("icu")

    tables = {}
    for policy in ("shuffle", "fix_first"):
        comparator = RemoteComparator(client=client_for(StubEndpoint()), template=template)
        tables[policy] = score_cohort(test, anchors, comparator, policy=policy, seed=5)

    shuffled = tables["shuffle"].to_frame()
    fixed = tables["fix_first"].to_frame()
    assert shuffled.equals(fixed)
    # lower code, earlier event: risk falls as code rises
    assert shuffled["risk"].tolist() == sorted(shuffled["risk"], reverse=True)
    assert shuffled["risk"].iloc[0] == 1.0


def test_ambiguous_answers_are_indeterminate():
    test, anchors = _anchored(2, 3)
    comparator = RemoteComparator(client=client_for(StubEndpoint(answer="a or b")), template=load_template("icu"))

    table = score_cohort(test, anchors, comparator)

    assert len(table) == 0
    assert set(table.failures) == set(test.ids)
    assert comparator.indeterminate == 6


def test_symmetrize_asks_both_orders():
    test, anchors = _anchored(2, 3)
    stub = StubEndpoint()
    comparator = RemoteComparator(client=client_for(stub), template=load_template("icu"), symmetrize=True)
    pairs = [(s, a) for s in test for a in anchors]

    scores = comparator.score_pairs(pairs, policy="shuffle", seeds=list(range(len(pairs))))

    assert len(comparator.audit) == 2 * len(pairs)
    for (subject, anchor), score in zip(pairs, scores):
        expected = 0.99 if subject.features["code"] < anchor.features["code"] else 0.01
        assert score == pytest.approx(expected, abs=1e-3)


def test_warm_cache_rerun_is_identical(tmp_path):
    test, anchors = _anchored()
    config = endpoint(tmp_path)
    template = load_template("icu")

    cold = RemoteComparator(client=client_for(StubEndpoint(), config), template=template)
    first = score_cohort(test, anchors, cold, seed=2).to_frame()
    warm_stub = StubEndpoint()
    warm = RemoteComparator(client=client_for(warm_stub, config), template=template)
    second = score_cohort(test, anchors, warm, seed=2).to_frame()

    assert warm_stub.calls == 0
    assert first.to_csv(index=False) == second.to_csv(index=False)
    assert all(entry["cached"] for entry in warm.audit)
