from __future__ import annotations

import json
import re

import httpx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from textorigin.errors import BackendUnavailable, MalformedExplanation
from textorigin.rationale import (
    PROMPT_HEADER, ExplainRequest, Rationale, build_prompt, explain_llm,
    explain_template, format_value,
)
from textorigin.schema import FEATURE_NAMES


def request(positive=None, negative=None, label="ai", prob=0.87):
    return ExplainRequest(
        raw_text="sample text",
        label=label,
        probability_ai=prob,
        features_positive=positive or {},
        features_negative=negative or {},
    )


TYPICAL = request(
    positive={"type_token_ratio": {"importance_score": 0.8, "raw_value": 0.72},
              "curvature": {"importance_score": 0.3, "raw_value": -1.25}},
    negative={"stopword_ratio": {"importance_score": -0.4, "raw_value": 0.31}},
)


class TestPrompt:
    def test_contains_instruction_block(self):
        prompt = build_prompt(TYPICAL)
        assert prompt.startswith(PROMPT_HEADER)
        assert "Explain in 1-2 sentences per feature" in prompt
        assert "concise, non-technical" in prompt

    def test_empty_evidence_still_well_formed(self):
        prompt = build_prompt(request())
        assert PROMPT_HEADER in prompt
        json.loads(prompt[len(PROMPT_HEADER):])

    def test_serialization_round_trips(self):
        prompt = build_prompt(TYPICAL)
        payload = json.loads(prompt[len(PROMPT_HEADER):])
        assert payload == TYPICAL.to_payload()

    def test_rejects_wrong_sign(self):
        with pytest.raises(ValueError):
            request(positive={"curvature": {"importance_score": -1.0, "raw_value": 0.0}})

    def test_rejects_unknown_feature(self):
        with pytest.raises(ValueError):
            request(positive={"nope": {"importance_score": 1.0, "raw_value": 0.0}})


class _Transport(httpx.MockTransport):
    def __init__(self, payload=None, status=200, content=None):
        def handler(request):
            if content is not None:
                return httpx.Response(status, content=content)
            return httpx.Response(status, json=payload)
        super().__init__(handler)


def _patch_post(monkeypatch, transport):
    def fake_post(url, **kwargs):
        with httpx.Client(transport=transport) as client:
            return client.post(url, **{k: v for k, v in kwargs.items()
                                       if k in ("json", "headers")})
    monkeypatch.setattr(httpx, "post", fake_post)


def completion(content: dict | str) -> dict:
    text = content if isinstance(content, str) else json.dumps(content)
    return {"choices": [{"message": {"content": text}}]}


class TestLlm:
    def test_recorded_valid_response(self, monkeypatch):
        recorded = completion({
            "top_ai_evidence": {"type_token_ratio": "Vocabulary is unusually varied.",
                                "curvature": "Wording tracks model expectations."},
            "top_human_evidence": {"stopword_ratio": "Stopword use looks ordinary."},
            "summary": "Mostly machine-like signals.",
        })
        _patch_post(monkeypatch, _Transport(payload=recorded))
        rationale = explain_llm(TYPICAL, "http://explainer.test/v1", "any-model")
        assert rationale.source == "llm"
        assert rationale.summary == "Mostly machine-like signals."
        assert set(rationale.top_ai_evidence) == {"type_token_ratio", "curvature"}

    def test_missing_summary_is_malformed(self, monkeypatch):
        recorded = completion({"top_ai_evidence": {}, "top_human_evidence": {}})
        _patch_post(monkeypatch, _Transport(payload=recorded))
        with pytest.raises(MalformedExplanation):
            explain_llm(TYPICAL, "http://explainer.test/v1", "any-model")

    def test_invented_feature_dropped(self, monkeypatch):
        recorded = completion({
            "top_ai_evidence": {"foo": "made up", "curvature": "legit"},
            "top_human_evidence": {},
            "summary": "ok",
        })
        _patch_post(monkeypatch, _Transport(payload=recorded))
        rationale = explain_llm(TYPICAL, "http://explainer.test/v1", "any-model")
        assert "foo" not in rationale.top_ai_evidence
        assert "curvature" in rationale.top_ai_evidence

    def test_non_json_content_is_malformed(self, monkeypatch):
        _patch_post(monkeypatch, _Transport(payload=completion("certainly! here's why")))
        with pytest.raises(MalformedExplanation):
            explain_llm(TYPICAL, "http://explainer.test/v1", "any-model")

    def test_unreachable_endpoint(self):
        with pytest.raises(BackendUnavailable):
            explain_llm(TYPICAL, "http://127.0.0.1:9", "any-model", timeout_ms=300)


NUMBER = re.compile(r"(?<![\w.])-?\d+(?:\.\d+)?(?:e-?\d+)?(?![\w-])")


class TestTemplate:
    def test_positive_evidence_sentence(self):
        req = request(positive={"type_token_ratio": {"importance_score": 0.8,
                                                     "raw_value": 0.72}})
        rationale = explain_template(req)
        sentence = rationale.top_ai_evidence["type_token_ratio"]
        assert "0.72" in sentence
        assert "high lexical diversity" in sentence
        assert "supports the ai decision" in sentence
        assert rationale.source == "template"

    def test_empty_evidence_gives_base_rate_summary(self):
        rationale = explain_template(request())
        assert rationale.top_ai_evidence == {}
        assert rationale.top_human_evidence == {}
        assert "base rate" in rationale.summary

    def test_deterministic(self):
        assert explain_template(TYPICAL) == explain_template(TYPICAL)

    def test_groundedness(self):
        rationale = explain_template(TYPICAL)
        allowed = {format_value(e["raw_value"])
                   for side in (TYPICAL.features_positive, TYPICAL.features_negative)
                   for e in side.values()}
        allowed.add(format_value(TYPICAL.probability_ai))
        texts = list(rationale.top_ai_evidence.values())
        texts += list(rationale.top_human_evidence.values())
        texts.append(rationale.summary)
        for text in texts:
            for number in NUMBER.findall(text):
                assert number in allowed, f"ungrounded number {number} in {text!r}"

    def test_features_named_must_exist_in_request(self):
        rationale = explain_template(TYPICAL)
        assert set(rationale.top_ai_evidence) <= set(TYPICAL.features_positive)
        assert set(rationale.top_human_evidence) <= set(TYPICAL.features_negative)


@st.composite
def explain_requests(draw):
    names = draw(st.lists(st.sampled_from(FEATURE_NAMES), unique=True,
                          min_size=0, max_size=6))
    positive, negative = {}, {}
    for i, name in enumerate(names):
        value = draw(st.floats(min_value=-1e6, max_value=1e6,
                               allow_nan=False, allow_infinity=False))
        score = draw(st.floats(min_value=1e-6, max_value=1e3,
                               allow_nan=False, allow_infinity=False))
        if i % 2 == 0:
            positive[name] = {"importance_score": score, "raw_value": value}
        else:
            negative[name] = {"importance_score": -score, "raw_value": value}
    return request(positive=positive, negative=negative,
                   label=draw(st.sampled_from(["ai", "human"])),
                   prob=draw(st.floats(min_value=0, max_value=1)))


@settings(max_examples=200, deadline=None)
@given(explain_requests())
def test_template_total_for_any_valid_request(req):
    rationale = explain_template(req)
    assert isinstance(rationale, Rationale)
    assert rationale.summary
    assert set(rationale.top_ai_evidence) == set(req.features_positive)
    assert set(rationale.top_human_evidence) == set(req.features_negative)
