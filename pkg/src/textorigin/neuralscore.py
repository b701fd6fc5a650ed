"""Clients for the neural detector probability (``bert_ai_score``).

The encoder itself runs elsewhere; this module only acquires its AI-class
probability through a remote endpoint, a precomputed dataset column, or an
explicit stub. Every value entering a feature vector is guaranteed to lie
in [0, 1].
"""
from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass
from typing import Mapping

from .errors import BackendProtocol, BackendUnavailable, MissingColumn
from .textstats import Document

log = logging.getLogger(__name__)

ENV_ENDPOINT = "NEURAL_ENDPOINT"
ENV_TIMEOUT_MS = "NEURAL_TIMEOUT_MS"


@dataclass(frozen=True)
class NeuralScore:
    value: float
    source: str         # "remote" | "precomputed" | "stub"
    model_id: str


def score_remote(endpoint: str, text: Document, timeout_ms: int = 10_000,
                 model_id: str = "remote") -> NeuralScore:
    """POST {text} to the endpoint; response carries {probability_ai}.

    Values outside [0, 1] are clamped and logged; NaN or non-numeric
    responses raise BackendProtocol so the caller can impute instead.
    """
    import httpx

    try:
        resp = httpx.post(endpoint, json={"text": text.normalized},
                          timeout=timeout_ms / 1000.0)
        resp.raise_for_status()
    except httpx.TimeoutException as exc:
        raise BackendUnavailable(f"neural backend timed out: {exc}") from exc
    except httpx.HTTPError as exc:
        raise BackendUnavailable(f"neural backend unreachable: {exc}") from exc

    try:
        raw = resp.json()["probability_ai"]
        value = float(raw)
    except (ValueError, KeyError, TypeError) as exc:
        raise BackendProtocol(f"malformed neural response: {exc}") from exc
    if not math.isfinite(value):
        raise BackendProtocol(f"neural backend returned non-finite probability {raw!r}")
    if not 0.0 <= value <= 1.0:
        log.warning("neural backend returned out-of-range probability %r; clamping", raw)
        value = min(max(value, 0.0), 1.0)
    return NeuralScore(value=value, source="remote", model_id=model_id)


def score_precomputed(record: Mapping) -> NeuralScore:
    """Read the bert_ai_score column of a dataset record verbatim."""
    if "bert_ai_score" not in record or record["bert_ai_score"] is None:
        raise MissingColumn("record has no bert_ai_score column")
    value = float(record["bert_ai_score"])
    if not math.isfinite(value) or not 0.0 <= value <= 1.0:
        raise BackendProtocol(f"precomputed bert_ai_score {value!r} outside [0, 1]")
    return NeuralScore(value=value, source="precomputed", model_id="precomputed")


def score_stub(value: float, model_id: str = "stub") -> NeuralScore:
    """Explicit stub for tests and synthetic corpora."""
    if not math.isfinite(value) or not 0.0 <= value <= 1.0:
        raise ValueError(f"stub value {value!r} outside [0, 1]")
    return NeuralScore(value=value, source="stub", model_id=model_id)


def endpoint_from_env() -> tuple[str | None, int]:
    endpoint = os.environ.get(ENV_ENDPOINT) or None
    timeout = int(os.environ.get(ENV_TIMEOUT_MS, "10000"))
    return endpoint, timeout
