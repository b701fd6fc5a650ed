"""The extract -> decide -> explain -> present pipeline, as a service.

``AnalyzerService.analyze`` runs the full pipeline for one text: feature
extraction, curvature and neural score acquisition (degrading to
training-median imputation when a backend is down), optional feature
masking, the boosted-tree decision, exact attribution, top-3 evidence, and
a rationale. ``create_app`` wraps the service in an HTTP API and serves
the web UI bundle when one is built.

All service state is immutable after startup; requests never mutate it.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from pydantic import BaseModel, Field

from . import boostedtree, neuralscore, rationale
from .attribution import EvidenceItem, top_evidence, tree_shap
from .curvature import LogitSource, cpc_score
from .errors import (
    BackendProtocol, BackendUnavailable, DegenerateVariance, EmptyDocument,
    TextOriginError, TextTooLong, UnknownFeature,
)
from .ngram_lm import NgramLanguageModel
from .schema import (
    FEATURE_DESCRIPTIONS, FEATURE_LABELS, FEATURE_NAMES, FeatureVector,
)
from .textstats import Document, Lexicons, extract_stylometrics, load_lexicons, tokenize

log = logging.getLogger(__name__)

DEFAULT_MAX_CHARS = 50_000


@dataclass(frozen=True)
class AnalyzeRequest:
    text: str
    disabled_features: frozenset[str] = frozenset()
    explain: bool = True

    def __post_init__(self):
        unknown = set(self.disabled_features) - set(FEATURE_NAMES)
        if unknown:
            raise UnknownFeature(f"cannot disable unknown features: {sorted(unknown)}")


@dataclass
class FeatureReport:
    raw_value: float
    phi: float
    normalized_phi: float
    imputed: bool
    disabled: bool

    def to_payload(self) -> dict:
        return {
            "raw_value": self.raw_value, "phi": self.phi,
            "normalized_phi": self.normalized_phi,
            "imputed": self.imputed, "disabled": self.disabled,
        }


@dataclass
class EvidenceBundle:
    label: str
    probability_ai: float
    margin: float
    base_value: float
    features: dict[str, FeatureReport]
    top_ai_evidence: list[EvidenceItem]
    top_human_evidence: list[EvidenceItem]
    rationale: rationale.Rationale | None
    imputed_features: list[str]
    provenance: dict

    def to_payload(self) -> dict:
        return {
            "label": self.label,
            "probability_ai": self.probability_ai,
            "margin": self.margin,
            "base_value": self.base_value,
            "features": {n: r.to_payload() for n, r in self.features.items()},
            "top_ai_evidence": [vars(e) for e in self.top_ai_evidence],
            "top_human_evidence": [vars(e) for e in self.top_human_evidence],
            "rationale": self.rationale.to_payload() if self.rationale else None,
            "imputed_features": self.imputed_features,
            "provenance": self.provenance,
        }


@dataclass
class AnalyzerService:
    model: boostedtree.TreeEnsemble
    lexicons: Lexicons
    # One source or an ordered fallback chain (e.g. remote first, built-in
    # n-gram second); sources are tried in order before imputing.
    logit_source: object = None
    neural_endpoint: str | None = None
    neural_timeout_ms: int = 10_000
    explainer: dict | None = None       # endpoint/model_name/api_key/timeout_ms
    max_text_chars: int = DEFAULT_MAX_CHARS
    decision_threshold: float = 0.5
    model_hash: str = ""

    def __post_init__(self):
        if not self.model_hash:
            self.model_hash = self.model.content_hash()
        if self.logit_source is None:
            self.logit_sources: tuple[LogitSource, ...] = ()
        elif isinstance(self.logit_source, (list, tuple)):
            self.logit_sources = tuple(self.logit_source)
        else:
            self.logit_sources = (self.logit_source,)
        trained_with = self.model.provenance.get("lexicon_hash")
        if trained_with and trained_with != self.lexicons.content_hash:
            log.warning("lexicon hash %s differs from the model's training "
                        "lexicons %s; scores may shift",
                        self.lexicons.content_hash[:12], trained_with[:12])

    # -- pipeline ------------------------------------------------------------

    def analyze(self, req: AnalyzeRequest) -> EvidenceBundle:
        started = time.perf_counter()
        if len(req.text) > self.max_text_chars:
            raise TextTooLong(
                f"text of {len(req.text)} chars exceeds limit {self.max_text_chars}")
        doc = Document.from_raw(req.text)
        if not doc.normalized:
            raise EmptyDocument("text is empty after normalization")
        tv = tokenize(doc)

        fv = extract_stylometrics(tv, self.lexicons)
        imputed: list[str] = []
        fv.curvature, curvature_backend = self._curvature(
            doc, req.disabled_features, imputed)
        fv.bert_ai_score = self._neural(doc, req.disabled_features, imputed)

        scored = self._apply_mask(fv, req.disabled_features)
        margin = boostedtree.predict_margin(self.model, scored)
        probability = float(boostedtree.sigmoid(margin))
        label = "ai" if probability >= self.decision_threshold else "human"

        attr = tree_shap(self.model, scored)
        positive, negative = top_evidence(attr, k=3)

        expl = None
        if req.explain:
            expl = self._rationale(doc, label, probability, positive, negative)

        total_abs = float(np.abs(attr.phi).sum())
        features = {}
        for i, name in enumerate(self.model.feature_names):
            features[name] = FeatureReport(
                raw_value=float(attr.feature_values[i]),
                phi=float(attr.phi[i]),
                normalized_phi=float(attr.phi[i] / total_abs) if total_abs > 0 else 0.0,
                imputed=name in imputed,
                disabled=name in req.disabled_features,
            )

        return EvidenceBundle(
            label=label,
            probability_ai=probability,
            margin=float(margin),
            base_value=float(attr.base_value),
            features=features,
            top_ai_evidence=positive,
            top_human_evidence=negative,
            rationale=expl,
            imputed_features=imputed,
            provenance={
                "model_hash": self.model_hash,
                "backend_ids": self.backend_ids(),
                "curvature_backend": curvature_backend,
                "timing_ms": (time.perf_counter() - started) * 1000.0,
            },
        )

    # -- backends with graceful degradation -----------------------------------

    def _curvature(self, doc: Document, disabled: frozenset[str],
                   imputed: list[str]) -> tuple[float, str]:
        """Try each configured source in order; impute only when all fail.

        Returns the score and the id of the backend that produced it (or
        "disabled"/"imputed").
        """
        if "curvature" in disabled:
            return self.model.median_of("curvature"), "disabled"
        for source in self.logit_sources:
            try:
                return cpc_score(source.distributions(doc)).score, source.backend_id
            except (BackendUnavailable, BackendProtocol, DegenerateVariance) as exc:
                log.warning("curvature backend %s degraded: %s",
                            source.backend_id, exc)
        imputed.append("curvature")
        return self.model.median_of("curvature"), "imputed"

    def _neural(self, doc: Document, disabled: frozenset[str],
                imputed: list[str]) -> float:
        if "bert_ai_score" in disabled:
            return self.model.median_of("bert_ai_score")
        if self.neural_endpoint is None:
            imputed.append("bert_ai_score")
            return self.model.median_of("bert_ai_score")
        try:
            return neuralscore.score_remote(
                self.neural_endpoint, doc, timeout_ms=self.neural_timeout_ms).value
        except (BackendUnavailable, BackendProtocol) as exc:
            log.warning("neural backend degraded: %s", exc)
            imputed.append("bert_ai_score")
            return self.model.median_of("bert_ai_score")

    def _apply_mask(self, fv: FeatureVector, disabled: frozenset[str]) -> FeatureVector:
        """A disabled feature is scored at its training median."""
        values = fv.as_dict()
        for name in disabled:
            values[name] = self.model.median_of(name)
        return FeatureVector.from_mapping(values)

    def _rationale(self, doc: Document, label: str, probability: float,
                   positive: list[EvidenceItem], negative: list[EvidenceItem]
                   ) -> rationale.Rationale:
        req = rationale.ExplainRequest(
            raw_text=doc.normalized[:2000],
            label=label,
            probability_ai=probability,
            features_positive={
                e.feature: {"importance_score": e.phi, "raw_value": e.value}
                for e in positive
            },
            features_negative={
                e.feature: {"importance_score": e.phi, "raw_value": e.value}
                for e in negative
            },
        )
        if self.explainer:
            try:
                return rationale.explain_llm(req, **self.explainer)
            except TextOriginError as exc:
                log.warning("LLM explainer degraded to template: %s", exc)
        return rationale.explain_template(req)

    def backend_ids(self) -> list[str]:
        ids = [source.backend_id for source in self.logit_sources]
        if self.neural_endpoint:
            ids.append(f"neural:{self.neural_endpoint}")
        if self.explainer:
            ids.append(f"explainer:{self.explainer.get('model_name', 'default')}")
        return ids


# --------------------------------------------------------------------------
# Service construction
# --------------------------------------------------------------------------

def build_logit_source(spec: str | None) -> LogitSource | None:
    """Parse a --logit-backend value: ``ngram:PATH`` or ``http:URL``."""
    if not spec:
        return None
    if spec.startswith("ngram:"):
        return NgramLanguageModel.load(spec[len("ngram:"):])
    if spec.startswith("http:") or spec.startswith("https:"):
        from .curvature import HttpLogitSource
        return HttpLogitSource(endpoint=spec, model_name="default")
    raise ValueError(f"unsupported logit backend spec {spec!r}")


def build_service(model_path: str | Path,
                  logit_backend: str | Sequence[str] | None = None,
                  stopwords_path: str | None = None,
                  cliches_path: str | None = None,
                  decision_threshold: float = 0.5,
                  max_text_chars: int = DEFAULT_MAX_CHARS) -> AnalyzerService:
    """Assemble a service from files and environment configuration.

    ``logit_backend`` may name several backends; later entries are
    fallbacks for earlier ones (e.g. an HTTP server first, a local n-gram
    file second).
    """
    model = boostedtree.load(model_path)
    neural_endpoint, neural_timeout = neuralscore.endpoint_from_env()
    specs = ([logit_backend] if isinstance(logit_backend, str)
             else list(logit_backend or []))
    sources = [build_logit_source(spec) for spec in specs if spec]
    return AnalyzerService(
        model=model,
        lexicons=load_lexicons(stopwords_path, cliches_path),
        logit_source=sources,
        neural_endpoint=neural_endpoint,
        neural_timeout_ms=neural_timeout,
        explainer=rationale.explainer_from_env(),
        decision_threshold=decision_threshold,
        max_text_chars=max_text_chars,
    )


# --------------------------------------------------------------------------
# HTTP surface
# --------------------------------------------------------------------------

_STATUS_BY_ERROR = {
    "empty_document": 422,
    "text_too_long": 413,
    "unknown_feature": 400,
}


class AnalyzeBody(BaseModel):
    text: str
    disabled_features: list[str] = Field(default_factory=list)
    explain: bool = True


def create_app(service: AnalyzerService, webui_dir: str | Path | None = None):
    from fastapi import FastAPI, Request
    from fastapi.exceptions import RequestValidationError
    from fastapi.responses import JSONResponse

    app = FastAPI(title="textorigin", docs_url=None, redoc_url=None)

    @app.exception_handler(TextOriginError)
    async def _domain_error(_request: Request, exc: TextOriginError):
        status = _STATUS_BY_ERROR.get(exc.code, 500)
        return JSONResponse(status_code=status,
                            content={"code": exc.code, "message": str(exc)})

    @app.exception_handler(RequestValidationError)
    async def _bad_body(_request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400,
                            content={"code": "bad_request", "message": str(exc.errors())})

    @app.post("/analyze")
    async def analyze(body: AnalyzeBody):
        req = AnalyzeRequest(
            text=body.text,
            disabled_features=frozenset(body.disabled_features),
            explain=body.explain,
        )
        return service.analyze(req).to_payload()

    @app.get("/features")
    async def features():
        return {
            "features": [
                {
                    "name": name,
                    "label": FEATURE_LABELS[name],
                    "description": FEATURE_DESCRIPTIONS[name],
                }
                for name in FEATURE_NAMES
            ]
        }

    @app.get("/model")
    async def model_info():
        return {
            "model_hash": service.model_hash,
            "feature_names": service.model.feature_names,
            "feature_medians": service.model.feature_medians,
            "base_score": service.model.base_score,
            "provenance": service.model.provenance,
        }

    @app.get("/healthz")
    async def healthz():
        return {
            "status": "ok",
            "model_hash": service.model_hash,
            "backends": service.backend_ids(),
        }

    index = Path(webui_dir) / "index.html" if webui_dir else None
    if index and index.is_file():
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=str(webui_dir), html=True), name="webui")
    else:
        @app.get("/")
        async def root():
            return {"service": "textorigin", "endpoints": ["/analyze", "/features",
                                                           "/model", "/healthz"]}

    return app


def serve(service: AnalyzerService, host: str = "127.0.0.1", port: int = 8000,
          webui_dir: str | Path | None = None) -> None:
    import uvicorn

    uvicorn.run(create_app(service, webui_dir=webui_dir), host=host, port=port)
