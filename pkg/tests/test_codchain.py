import json

import pytest

from codense import entities
from codense.codchain import (
    ChainGenerationError,
    CoDChain,
    CoDStep,
    LengthMismatch,
    ParseError,
    PromptSpec,
    SchemaError,
    MISSING_ENTITY_CRITERIA,
    build_cod_prompt,
    build_vanilla_prompt,
    parse_cod_response,
    run_cod,
    validate_chain,
)
from codense.llm import (
    HttpLlmClient,
    LlmConfigError,
    LlmRequest,
    MockLlmClient,
    prompt_fingerprint,
)

ARTICLE = "Storms battered the coast for two days before moving inland."


def _valid_raw(n=5):
    steps = [
        {"Missing_Entities": [f"entity {k}"], "Denser_Summary": f"summary {k} text"}
        for k in range(n)
    ]
    return json.dumps(steps)


def test_prompt_contains_article_exactly_once():
    prompt = build_cod_prompt(ARTICLE)
    assert prompt.count(ARTICLE) == 1


def test_prompt_states_step_count_and_array_length():
    prompt = build_cod_prompt(ARTICLE, PromptSpec(n_steps=5))
    assert "Repeat the following 2 steps 5 times." in prompt
    assert "list (length 5)" in prompt


def test_prompt_contains_all_missing_entity_criteria():
    prompt = build_cod_prompt(ARTICLE)
    for criterion in MISSING_ENTITY_CRITERIA:
        assert criterion in prompt
    assert "not in the previous summary" in prompt


def test_prompt_fingerprint_deterministic():
    a = prompt_fingerprint(build_cod_prompt(ARTICLE))
    b = prompt_fingerprint(build_cod_prompt(ARTICLE))
    assert a == b


def test_prompt_rejects_empty_article():
    with pytest.raises(ValueError):
        build_cod_prompt("   ")


def test_vanilla_prompt():
    prompt = build_vanilla_prompt(ARTICLE)
    assert "Do not exceed 70 words." in prompt
    assert ARTICLE in prompt


def test_vanilla_budget_override():
    assert "Do not exceed 50 words." in build_vanilla_prompt(ARTICLE, 50)


def test_vanilla_rejects_empty_article():
    with pytest.raises(ValueError):
        build_vanilla_prompt("")


def test_parse_valid_array():
    chain = parse_cod_response(_valid_raw())
    assert len(chain.steps) == 5
    assert chain.steps[0].missing_entities == ("entity 0",)


def test_parse_fixture_with_prose_and_fence(fixtures_dir):
    raw = (fixtures_dir / "cod_response.txt").read_text()
    chain = parse_cod_response(raw)
    assert len(chain.steps) == 5
    for step in chain.steps:
        assert step.summary


def test_parse_semicolon_delimited_entities():
    steps = [{"Missing_Entities": "a; b ;c", "Denser_Summary": "s"}]
    chain = parse_cod_response(json.dumps(steps), PromptSpec(n_steps=1))
    assert chain.steps[0].missing_entities == ("a", "b", "c")


def test_parse_length_mismatch():
    with pytest.raises(LengthMismatch) as err:
        parse_cod_response(_valid_raw(4))
    assert err.value.found == 4
    assert err.value.expected == 5


def test_parse_missing_key():
    steps = json.loads(_valid_raw())
    del steps[2]["Denser_Summary"]
    with pytest.raises(SchemaError) as err:
        parse_cod_response(json.dumps(steps))
    assert err.value.index == 2
    assert err.value.key == "Denser_Summary"


def test_parse_garbage_preserves_raw():
    with pytest.raises(ParseError) as err:
        parse_cod_response("total nonsense")
    assert err.value.raw == "total nonsense"


def test_parse_roundtrip_identity():
    chain = parse_cod_response(_valid_raw())
    serialized = json.dumps(
        [
            {"Missing_Entities": list(s.missing_entities), "Denser_Summary": s.summary}
            for s in chain.steps
        ]
    )
    assert parse_cod_response(serialized).steps == chain.steps


def test_validate_no_warnings_within_band():
    chain = CoDChain(
        "a",
        tuple(
            CoDStep(("e",), " ".join(["word"] * n))
            for n in (70, 67, 67, 69, 72)
        ),
    )
    assert validate_chain(chain) == []


def test_validate_flags_doubled_step():
    chain = CoDChain(
        "a",
        (
            CoDStep(("e",), " ".join(["word"] * 30)),
            CoDStep(("e",), " ".join(["word"] * 30)),
            CoDStep(("e",), " ".join(["word"] * 60)),
        ),
    )
    warnings = validate_chain(chain)
    assert any("step 3" in w for w in warnings)


def test_validate_flags_empty_entities():
    chain = CoDChain("a", (CoDStep((), "short summary"),))
    warnings = validate_chain(chain)
    assert any("missing-entity" in w for w in warnings)


def test_validate_single_step_ok():
    chain = CoDChain("a", (CoDStep(("e",), "one step only"),))
    assert validate_chain(chain) == []


def test_run_cod_mock_passthrough():
    client = MockLlmClient(script=[_valid_raw()])
    chain = run_cod(ARTICLE, client=client, article_id="a1")
    assert len(chain.steps) == 5
    assert chain.attempt_count == 1
    assert chain.article_id == "a1"


def test_run_cod_retries_then_succeeds():
    client = MockLlmClient(script=["garbage", _valid_raw()])
    chain = run_cod(ARTICLE, client=client)
    assert chain.attempt_count == 2
    # retry prompt carries the JSON reminder
    assert "Answer in valid JSON only." in client.calls[1].prompt


def test_run_cod_exhausts_retries():
    client = MockLlmClient(script=["bad", "bad", "bad"])
    with pytest.raises(ChainGenerationError) as err:
        run_cod(ARTICLE, client=client)
    assert err.value.last_raw == "bad"
    assert len(err.value.attempts) == 3


def test_run_cod_steps_substring_of_raw():
    raw = _valid_raw()
    client = MockLlmClient(script=[raw])
    chain = run_cod(ARTICLE, client=client)
    for step in chain.steps:
        assert step.summary in raw


def test_densifying_fixture_zero_warnings_increasing_density(fixtures_dir):
    mock = json.loads((fixtures_dir / "densify_mock.json").read_text())
    per_step: dict[int, list] = {}
    for raw in mock.values():
        chain = parse_cod_response(raw)
        assert validate_chain(chain) == []
        for i, step in enumerate(chain.steps, start=1):
            es = entities.extract_entities(step.summary)
            per_step.setdefault(i, []).append(
                entities.entity_density(step.summary, es)
            )
    densities = [entities.corpus_density(per_step[i]) for i in sorted(per_step)]
    assert all(b > a for a, b in zip(densities, densities[1:]))


def test_mock_keyed_fixture_hit():
    prompt = build_cod_prompt(ARTICLE)
    client = MockLlmClient(fixtures={prompt_fingerprint(prompt): "fixture body"})
    assert client.complete(LlmRequest(prompt=prompt)).text == "fixture body"


def test_http_client_requires_credential(monkeypatch):
    monkeypatch.delenv("LLM_API_KEY", raising=False)
    with pytest.raises(LlmConfigError):
        HttpLlmClient("https://example.invalid/v1", "m")


def test_http_client_backoff_on_429():
    import httpx

    statuses = iter([429, 200])

    def handler(request):
        status = next(statuses)
        if status == 429:
            return httpx.Response(429, json={"error": "rate limited"})
        return httpx.Response(
            200,
            json={
                "choices": [{"message": {"content": "ok"}}],
                "usage": {"prompt_tokens": 3, "completion_tokens": 1},
            },
        )

    sleeps = []
    client = HttpLlmClient(
        "https://example.invalid/v1",
        "m",
        api_key="k",
        http=httpx.Client(transport=httpx.MockTransport(handler)),
        sleep=sleeps.append,
    )
    response = client.complete(LlmRequest(prompt="p"))
    assert response.text == "ok"
    assert sleeps == [1.0]


def test_http_client_exhausts_retries():
    import httpx

    from codense.llm import LlmTransportError

    def handler(request):
        return httpx.Response(503)

    sleeps = []
    client = HttpLlmClient(
        "https://example.invalid/v1",
        "m",
        api_key="k",
        http=httpx.Client(transport=httpx.MockTransport(handler)),
        sleep=sleeps.append,
    )
    with pytest.raises(LlmTransportError):
        client.complete(LlmRequest(prompt="p"))
    assert sleeps == [1.0, 2.0, 4.0, 8.0]
