"""User-facing explanations built from feature attributions.

Two routes produce a ``Rationale``: a remote chat-completion LLM given a
fixed instruction block and the structured evidence, or a deterministic
template that never fails. Template sentences are generated from a rule
table keyed by feature name and value band (band edges documented on the
table below); every number they mention comes verbatim from the request.
"""
from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field

from .errors import BackendProtocol, BackendUnavailable, MalformedExplanation
from .schema import FEATURE_LABELS, FEATURE_NAMES

log = logging.getLogger(__name__)

ENV_ENDPOINT = "EXPLAINER_ENDPOINT"
ENV_MODEL = "EXPLAINER_MODEL"
ENV_API_KEY = "EXPLAINER_API_KEY"
ENV_TIMEOUT_MS = "EXPLAINER_TIMEOUT_MS"

# Instruction block sent to the explainer model, ahead of the serialized
# request. Fixed text; do not reword casually, downstream prompts depend on it.
PROMPT_HEADER = """\
You are an explainer of the AI detector output. Given the provided context, \
explain why the model produced its decision. The detector aggregates multiple \
interpretable features using a meta-classifier. You will receive feature \
values and their importance scores.

Task:
1. Explain in 1-2 sentences per feature how the values support the final prediction.
2. Keep explanations concise, non-technical, and strictly grounded in the supplied values."""


@dataclass
class ExplainRequest:
    raw_text: str
    label: str                               # "ai" | "human"
    probability_ai: float
    features_positive: dict[str, dict[str, float]] = field(default_factory=dict)
    features_negative: dict[str, dict[str, float]] = field(default_factory=dict)

    def __post_init__(self):
        if self.label not in ("ai", "human"):
            raise ValueError(f"label must be 'ai' or 'human', got {self.label!r}")
        if not 0.0 <= self.probability_ai <= 1.0:
            raise ValueError("probability_ai must lie in [0, 1]")
        for side, expected_sign in ((self.features_positive, 1), (self.features_negative, -1)):
            for name, entry in side.items():
                if name not in FEATURE_NAMES:
                    raise ValueError(f"unknown feature {name!r} in evidence")
                score = entry["importance_score"]
                if math.copysign(1.0, score) != expected_sign or score == 0.0:
                    raise ValueError(f"importance score for {name} has the wrong sign")

    def to_payload(self) -> dict:
        return {
            "raw_text": self.raw_text,
            "label": self.label,
            "probability_ai": self.probability_ai,
            "features_positive": self.features_positive,
            "features_negative": self.features_negative,
        }


@dataclass
class Rationale:
    top_ai_evidence: dict[str, str]
    top_human_evidence: dict[str, str]
    summary: str
    source: str     # "llm" | "template"

    def to_payload(self) -> dict:
        return {
            "top_ai_evidence": self.top_ai_evidence,
            "top_human_evidence": self.top_human_evidence,
            "summary": self.summary,
            "source": self.source,
        }


def build_prompt(req: ExplainRequest) -> str:
    """Instruction block followed by the serialized request."""
    return PROMPT_HEADER + "\n\n" + json.dumps(req.to_payload(), indent=2, sort_keys=True)


# --------------------------------------------------------------------------
# LLM route
# --------------------------------------------------------------------------

def explain_llm(req: ExplainRequest, endpoint: str, model_name: str,
                timeout_ms: int = 30_000, api_key: str | None = None) -> Rationale:
    """Query a chat-completion endpoint and validate the structured reply.

    Temperature is fixed at 0 and the response length capped, for
    reproducibility. Evidence keys the model invents are dropped (logged);
    a missing or unparseable schema raises MalformedExplanation so the
    caller can fall back to the template.
    """
    import httpx

    headers = {}
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    body = {
        "model": model_name,
        "messages": [{"role": "user", "content": build_prompt(req)}],
        "temperature": 0,
        "max_tokens": 1024,
    }
    try:
        resp = httpx.post(endpoint, json=body, headers=headers, timeout=timeout_ms / 1000.0)
        resp.raise_for_status()
    except httpx.TimeoutException as exc:
        raise BackendUnavailable(f"explainer timed out: {exc}") from exc
    except httpx.HTTPError as exc:
        raise BackendUnavailable(f"explainer unreachable: {exc}") from exc

    try:
        content = resp.json()["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise BackendProtocol(f"unexpected completion envelope: {exc}") from exc
    return _parse_structured(content, req)


def _parse_structured(content: str, req: ExplainRequest) -> Rationale:
    text = content.strip()
    if text.startswith("```"):
        text = text.strip("`")
        if text.startswith("json"):
            text = text[4:]
    try:
        parsed = json.loads(text)
    except ValueError as exc:
        raise MalformedExplanation(f"explainer response is not JSON: {exc}") from exc
    if not isinstance(parsed, dict):
        raise MalformedExplanation("explainer response is not a JSON object")
    summary = parsed.get("summary")
    if not isinstance(summary, str) or not summary.strip():
        raise MalformedExplanation("explainer response lacks a summary")

    def filter_side(key: str, allowed: dict) -> dict[str, str]:
        side = parsed.get(key, {})
        if not isinstance(side, dict):
            raise MalformedExplanation(f"{key} is not an object")
        out = {}
        for name, sentence in side.items():
            if name not in allowed:
                log.warning("explainer invented feature %r; dropping", name)
                continue
            if isinstance(sentence, str):
                out[name] = sentence
        return out

    return Rationale(
        top_ai_evidence=filter_side("top_ai_evidence", req.features_positive),
        top_human_evidence=filter_side("top_human_evidence", req.features_negative),
        summary=summary.strip(),
        source="llm",
    )


# --------------------------------------------------------------------------
# Template route
# --------------------------------------------------------------------------

# Value bands per feature: (upper bound, descriptor). The first band whose
# bound exceeds the value wins; the final band has bound +inf. These edges
# describe the value itself; the push direction always comes from the
# attribution's sign.
_VALUE_BANDS: dict[str, list[tuple[float, str]]] = {
    "curvature": [(-1.0, "well below the model-typical range"),
                  (1.0, "near the model-typical range"),
                  (math.inf, "well above the model-typical range")],
    "bert_ai_score": [(0.3, "a low neural detector probability"),
                      (0.7, "a middling neural detector probability"),
                      (math.inf, "a high neural detector probability")],
    "flesch_reading_ease": [(0.4, "hard-to-read prose"),
                            (0.75, "moderately readable prose"),
                            (math.inf, "very easy-to-read prose")],
    "sentence_count": [(3, "very few sentences"),
                       (15, "a moderate number of sentences"),
                       (math.inf, "many sentences")],
    "avg_sentence_length": [(10, "short sentences"),
                            (25, "medium-length sentences"),
                            (math.inf, "long sentences")],
    "token_count": [(50, "a short text"),
                    (300, "a medium-length text"),
                    (math.inf, "a long text")],
    "avg_word_length": [(4.0, "short words"),
                        (5.5, "medium-length words"),
                        (math.inf, "long words")],
    "type_token_ratio": [(0.4, "low lexical diversity"),
                         (0.6, "moderate lexical diversity"),
                         (math.inf, "unusually high lexical diversity")],
    "hapax_legomena_ratio": [(0.35, "few once-used words"),
                             (0.6, "a typical share of once-used words"),
                             (math.inf, "a very high share of once-used words")],
    "stopword_ratio": [(0.25, "few stopwords"),
                       (0.5, "a typical share of stopwords"),
                       (math.inf, "a high share of stopwords")],
    "cliche_ratio": [(0.005, "no noticeable cliches"),
                     (0.02, "some cliched phrasing"),
                     (math.inf, "heavily cliched phrasing")],
    "max_freq_2gram": [(0.05, "little phrase repetition"),
                       (0.15, "some phrase repetition"),
                       (math.inf, "heavy phrase repetition")],
    "max_freq_3gram": [(0.03, "little phrase repetition"),
                       (0.1, "some phrase repetition"),
                       (math.inf, "heavy phrase repetition")],
    "max_freq_4gram": [(0.02, "little phrase repetition"),
                       (0.08, "some phrase repetition"),
                       (math.inf, "heavy phrase repetition")],
    "punctuation_count": [(0.1, "light punctuation"),
                          (0.2, "typical punctuation"),
                          (math.inf, "heavy punctuation")],
    "comma_count": [(0.05, "few commas"),
                    (0.13, "a typical share of commas"),
                    (math.inf, "many commas")],
    "semicolon_and_colon_count": [(0.005, "no semicolons or colons"),
                                  (0.03, "occasional semicolons or colons"),
                                  (math.inf, "frequent semicolons or colons")],
}


def format_value(value: float) -> str:
    """Single formatting rule for every number shown in template output."""
    if not math.isfinite(value):
        return str(value)
    if value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return f"{value:.4g}"


def _band_descriptor(feature: str, value: float) -> str:
    for bound, descriptor in _VALUE_BANDS[feature]:
        if value < bound:
            return descriptor
    return _VALUE_BANDS[feature][-1][1]


def _sentence(feature: str, entry: dict[str, float], label: str, toward: str) -> str:
    value = entry["raw_value"]
    direction = "supports" if toward == label else "pushes against"
    return (f"{FEATURE_LABELS[feature]} = {format_value(value)} shows "
            f"{_band_descriptor(feature, value)}, which {direction} "
            f"the {label} decision.")


def explain_template(req: ExplainRequest) -> Rationale:
    """Deterministic fallback explanation; never fails for a valid request."""
    ai_evidence = {
        name: _sentence(name, entry, req.label, toward="ai")
        for name, entry in req.features_positive.items()
    }
    human_evidence = {
        name: _sentence(name, entry, req.label, toward="human")
        for name, entry in req.features_negative.items()
    }
    prob = format_value(req.probability_ai)
    if not ai_evidence and not human_evidence:
        summary = (f"The text was labeled {req.label} with probability_ai {prob}; "
                   "no single feature stood out, so the decision is driven by the base rate.")
    else:
        strongest = max(
            list(req.features_positive.items()) + list(req.features_negative.items()),
            key=lambda kv: abs(kv[1]["importance_score"]),
        )[0]
        summary = (f"The text was labeled {req.label} with probability_ai {prob}. "
                   f"The strongest signal was the {FEATURE_LABELS[strongest]}.")
    return Rationale(
        top_ai_evidence=ai_evidence,
        top_human_evidence=human_evidence,
        summary=summary,
        source="template",
    )


def explainer_from_env() -> dict | None:
    endpoint = os.environ.get(ENV_ENDPOINT)
    if not endpoint:
        return None
    return {
        "endpoint": endpoint,
        "model_name": os.environ.get(ENV_MODEL, "default"),
        "api_key": os.environ.get(ENV_API_KEY),
        "timeout_ms": int(os.environ.get(ENV_TIMEOUT_MS, "30000")),
    }
