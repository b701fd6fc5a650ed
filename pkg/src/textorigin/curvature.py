"""Probability-curvature scoring from conditional token distributions.

The score standardizes a text's observed conditional log-likelihood by the
analytic mean and standard deviation of log-likelihood under token-wise
sampling from the same per-position conditionals. All log quantities are
natural log (nats), standardized per sequence.

Model-typical text lands near or below zero; atypical (human-like) text
scores positive.
"""
from __future__ import annotations

import hashlib
import math
import threading
from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from .errors import BackendProtocol, BackendUnavailable, DegenerateVariance
from .textstats import Document

_NORMALIZATION_TOL = 1e-6
_VARIANCE_FLOOR = 1e-9


@dataclass(frozen=True)
class ConditionalDistributionSequence:
    """Per-position conditional log-probability distributions.

    ``logprobs`` has shape (positions, vocab_size); every row normalizes to
    one (logsumexp == 0 within 1e-6). ``observed`` holds the token id the
    text actually realized at each position.
    """

    observed: np.ndarray        # (positions,) int
    logprobs: np.ndarray        # (positions, vocab_size) float64

    def __post_init__(self):
        if self.logprobs.ndim != 2 or self.logprobs.shape[0] < 1:
            raise ValueError("logprobs must be (positions >= 1, vocab) shaped")
        if self.logprobs.shape[1] < 2:
            raise ValueError("vocab_size must be >= 2")
        if self.observed.shape != (self.logprobs.shape[0],):
            raise ValueError("observed must have one token id per position")
        if self.observed.min() < 0 or self.observed.max() >= self.vocab_size:
            raise ValueError("observed token id out of vocabulary range")
        lse = _logsumexp_rows(self.logprobs)
        if np.abs(lse).max() > _NORMALIZATION_TOL:
            raise ValueError("per-position distributions must normalize to 1")

    @property
    def vocab_size(self) -> int:
        return self.logprobs.shape[1]

    @property
    def positions(self) -> int:
        return self.logprobs.shape[0]


@dataclass(frozen=True)
class CurvatureResult:
    score: float
    observed_loglik: float
    expected_loglik: float
    std_loglik: float
    positions_used: int


@runtime_checkable
class LogitSource(Protocol):
    """A backend that turns a document into conditional distributions.

    Implementations must be deterministic for a fixed document and
    configuration, and safe for concurrent calls.
    """

    backend_id: str

    def distributions(self, doc: Document) -> ConditionalDistributionSequence: ...


def _logsumexp_rows(logps: np.ndarray) -> np.ndarray:
    m = logps.max(axis=1, keepdims=True)
    return (m + np.log(np.exp(logps - m).sum(axis=1, keepdims=True))).ravel()


def _moments(seq: ConditionalDistributionSequence) -> tuple[float, float]:
    """Analytic per-sequence mean and variance of the sampled log-likelihood."""
    logps = seq.logprobs
    probs = np.exp(logps)
    # 0 * log(0) -> 0: zero-probability tokens contribute nothing.
    with np.errstate(invalid="ignore"):
        plogp = np.where(probs > 0.0, probs * logps, 0.0)
        plogp2 = np.where(probs > 0.0, probs * logps * logps, 0.0)
    means = plogp.sum(axis=1)
    variances = plogp2.sum(axis=1) - means * means
    return float(means.sum()), float(np.maximum(variances, 0.0).sum())


def cpc_score(seq: ConditionalDistributionSequence) -> CurvatureResult:
    """Analytic curvature score for a distribution sequence.

    observed_loglik sums the observed tokens' log-probabilities; the
    expectation and variance are exact sums of per-position moments under
    independent token-wise sampling.

    Raises DegenerateVariance when the standard deviation is below 1e-9
    (e.g., one-hot distributions at every position); callers substitute the
    model file's training-median curvature and flag the feature as imputed.
    """
    observed = float(seq.logprobs[np.arange(seq.positions), seq.observed].sum())
    expected, variance = _moments(seq)
    std = math.sqrt(variance)
    if std < _VARIANCE_FLOOR:
        raise DegenerateVariance(f"log-likelihood std {std:.3e} below {_VARIANCE_FLOOR:.0e}")
    return CurvatureResult(
        score=(observed - expected) / std,
        observed_loglik=observed,
        expected_loglik=expected,
        std_loglik=std,
        positions_used=seq.positions,
    )


def cpc_monte_carlo(seq: ConditionalDistributionSequence, samples: int,
                    seed: int) -> CurvatureResult:
    """Monte-Carlo estimate of the curvature score.

    Draws ``samples`` full token sequences from the per-position
    conditionals and estimates the log-likelihood mean and standard
    deviation empirically. Converges to cpc_score as samples grows; kept as
    an independent check on the analytic path.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    probs = np.exp(seq.logprobs)
    probs /= probs.sum(axis=1, keepdims=True)

    totals = np.zeros(samples, dtype=np.float64)
    for j in range(seq.positions):
        cdf = np.cumsum(probs[j])
        draws = np.searchsorted(cdf, rng.random(samples), side="right")
        draws = np.minimum(draws, seq.vocab_size - 1)
        totals += seq.logprobs[j, draws]

    observed = float(seq.logprobs[np.arange(seq.positions), seq.observed].sum())
    mean = float(totals.mean())
    std = float(totals.std())
    if std < _VARIANCE_FLOOR:
        raise DegenerateVariance("all sampled sequences have identical log-likelihood")
    return CurvatureResult(
        score=(observed - mean) / std,
        observed_loglik=observed,
        expected_loglik=mean,
        std_loglik=std,
        positions_used=seq.positions,
    )


# --------------------------------------------------------------------------
# Remote backend
# --------------------------------------------------------------------------

class HttpLogitSource:
    """Client for an inference server exposing per-token top-K logprobs.

    Request body: ``{"model": ..., "text": ..., "top_k": ...}``. Response:
    ``{"positions": [{"observed": token, "top": [[token, logprob], ...]}]}``.

    The vocabulary is collapsed to K+1 buckets: the top-K tokens plus a
    single OTHER bucket holding the remaining probability mass. An observed
    token outside the top-K maps to OTHER.

    The server must be deterministic; a response-hash check raises
    BackendProtocol if the same text ever produces a different response.
    """

    def __init__(self, endpoint: str, model_name: str, timeout_ms: int = 10_000,
                 top_k: int = 100, transport=None):
        import httpx

        self.endpoint = endpoint.rstrip("/")
        self.model_name = model_name
        self.timeout = timeout_ms / 1000.0
        self.top_k = top_k
        self.backend_id = f"http:{self.endpoint}#{model_name}"
        self._client = httpx.Client(timeout=self.timeout, transport=transport)
        self._seen_hashes: dict[str, str] = {}
        self._lock = threading.Lock()

    def close(self) -> None:
        self._client.close()

    def distributions(self, doc: Document) -> ConditionalDistributionSequence:
        import httpx

        payload = {"model": self.model_name, "text": doc.normalized, "top_k": self.top_k}
        try:
            resp = self._client.post(self.endpoint, json=payload)
            resp.raise_for_status()
        except httpx.TimeoutException as exc:
            raise BackendUnavailable(f"logit backend timed out: {exc}") from exc
        except httpx.HTTPError as exc:
            raise BackendUnavailable(f"logit backend unreachable: {exc}") from exc

        self._check_determinism(doc.normalized, resp.content)
        try:
            body = resp.json()
            positions = body["positions"]
        except (ValueError, KeyError) as exc:
            raise BackendProtocol(f"malformed logit response: {exc}") from exc
        return self._to_sequence(positions)

    def _check_determinism(self, text: str, raw: bytes) -> None:
        text_key = hashlib.sha256(text.encode("utf-8")).hexdigest()
        resp_hash = hashlib.sha256(raw).hexdigest()
        with self._lock:
            prior = self._seen_hashes.get(text_key)
            if prior is not None and prior != resp_hash:
                raise BackendProtocol(
                    "logit backend returned different responses for identical text")
            if len(self._seen_hashes) < 4096:
                self._seen_hashes[text_key] = resp_hash

    def _to_sequence(self, positions: list) -> ConditionalDistributionSequence:
        if not positions:
            raise BackendProtocol("logit response carries no positions")
        k = self.top_k
        logprobs = np.full((len(positions), k + 1), -np.inf, dtype=np.float64)
        observed = np.zeros(len(positions), dtype=np.int64)
        for j, pos in enumerate(positions):
            try:
                top = pos["top"]
                obs_token = pos["observed"]
            except (KeyError, TypeError) as exc:
                raise BackendProtocol(f"malformed position entry: {exc}") from exc
            if not top or len(top) > k:
                raise BackendProtocol("top-K list empty or longer than requested K")
            obs_idx = None
            mass = 0.0
            for b, (token, lp) in enumerate(top):
                lp = float(lp)
                if lp > 0.0 or not math.isfinite(lp):
                    raise BackendProtocol(f"invalid logprob {lp!r}")
                logprobs[j, b] = lp
                mass += math.exp(lp)
                if token == obs_token:
                    obs_idx = b
            # Leftover mass goes to the single OTHER bucket (index k).
            residual = max(1.0 - mass, 1e-300)
            logprobs[j, len(top):k] = -np.inf
            logprobs[j, k] = math.log(residual)
            observed[j] = obs_idx if obs_idx is not None else k
        # Exact renormalization absorbs the truncation rounding.
        logprobs -= _logsumexp_rows(logprobs)[:, None]
        # -inf slots (unused buckets) stay -inf after the shift; replace to
        # keep downstream arithmetic clean.
        logprobs = np.where(np.isfinite(logprobs), logprobs, -745.0)
        logprobs -= _logsumexp_rows(logprobs)[:, None]
        return ConditionalDistributionSequence(observed=observed, logprobs=logprobs)
