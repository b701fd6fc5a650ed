"""Canonical feature schema.

The 17 feature names below are a wire contract: model files, attribution
output, the HTTP API, and the CLI all use these exact snake_case
identifiers, in this exact order.
"""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

FEATURE_NAMES: tuple[str, ...] = (
    "curvature",
    "bert_ai_score",
    "flesch_reading_ease",
    "sentence_count",
    "avg_sentence_length",
    "token_count",
    "avg_word_length",
    "type_token_ratio",
    "hapax_legomena_ratio",
    "stopword_ratio",
    "cliche_ratio",
    "max_freq_2gram",
    "max_freq_3gram",
    "max_freq_4gram",
    "punctuation_count",
    "comma_count",
    "semicolon_and_colon_count",
)

FEATURE_INDEX: dict[str, int] = {name: i for i, name in enumerate(FEATURE_NAMES)}

# Display labels for UIs and reports, keyed by canonical name.
FEATURE_LABELS: dict[str, str] = {
    "curvature": "conditional probability curvature",
    "bert_ai_score": "neural detector probability",
    "flesch_reading_ease": "Flesch reading ease",
    "sentence_count": "sentence count",
    "avg_sentence_length": "average sentence length",
    "token_count": "word token count",
    "avg_word_length": "average word length",
    "type_token_ratio": "type-token ratio",
    "hapax_legomena_ratio": "hapax legomena ratio",
    "stopword_ratio": "stopword ratio",
    "cliche_ratio": "cliche ratio",
    "max_freq_2gram": "max repeated bigram frequency",
    "max_freq_3gram": "max repeated trigram frequency",
    "max_freq_4gram": "max repeated four-gram frequency",
    "punctuation_count": "punctuation fraction",
    "comma_count": "comma fraction",
    "semicolon_and_colon_count": "semicolon/colon fraction",
}

FEATURE_DESCRIPTIONS: dict[str, str] = {
    "curvature": "Standardized gap between the text's observed log-likelihood and its "
                 "expectation under token-wise resampling from the same model conditionals.",
    "bert_ai_score": "AI-class probability from a pluggable neural detector, in [0, 1].",
    "flesch_reading_ease": "Flesch reading-ease score clamped to [0, 100] and scaled to [0, 1].",
    "sentence_count": "Number of sentences.",
    "avg_sentence_length": "Word tokens per sentence.",
    "token_count": "Number of word tokens.",
    "avg_word_length": "Mean word length in characters.",
    "type_token_ratio": "Distinct word types divided by word tokens (lexical diversity).",
    "hapax_legomena_ratio": "Fraction of word tokens whose type occurs exactly once.",
    "stopword_ratio": "Fraction of word tokens that are stopwords.",
    "cliche_ratio": "Fraction of word tokens covered by matched cliche phrases.",
    "max_freq_2gram": "Highest 2-gram count divided by the number of 2-grams.",
    "max_freq_3gram": "Highest 3-gram count divided by the number of 3-grams.",
    "max_freq_4gram": "Highest 4-gram count divided by the number of 4-grams.",
    "punctuation_count": "Punctuation tokens as a fraction of all tokens.",
    "comma_count": "Commas as a fraction of all tokens.",
    "semicolon_and_colon_count": "Semicolons and colons as a fraction of all tokens.",
}

# Feature families used by ablation experiments. "stylometric" is every
# signal computable from the text alone, i.e. all but the two model scores.
FEATURE_FAMILIES: dict[str, tuple[str, ...]] = {
    "curvature": ("curvature",),
    "neural": ("bert_ai_score",),
    "stylometric": tuple(n for n in FEATURE_NAMES if n not in ("curvature", "bert_ai_score")),
    "all": FEATURE_NAMES,
}


@dataclass
class FeatureVector:
    """The 17 named signals consumed by the meta-classifier.

    ``curvature`` and ``bert_ai_score`` come from model backends and may be
    unset (None) until the pipeline fills or imputes them; the 14 text
    statistics are always populated by extraction.
    """

    curvature: float | None = None
    bert_ai_score: float | None = None
    flesch_reading_ease: float = 0.0
    sentence_count: int = 0
    avg_sentence_length: float = 0.0
    token_count: int = 0
    avg_word_length: float = 0.0
    type_token_ratio: float = 0.0
    hapax_legomena_ratio: float = 0.0
    stopword_ratio: float = 0.0
    cliche_ratio: float = 0.0
    max_freq_2gram: float = 0.0
    max_freq_3gram: float = 0.0
    max_freq_4gram: float = 0.0
    punctuation_count: float = 0.0
    comma_count: float = 0.0
    semicolon_and_colon_count: float = 0.0

    def as_dict(self) -> dict[str, float | None]:
        return {name: getattr(self, name) for name in FEATURE_NAMES}

    def to_array(self) -> np.ndarray:
        """Dense vector in canonical order; unset fields become NaN."""
        vals = [getattr(self, name) for name in FEATURE_NAMES]
        return np.array([np.nan if v is None else float(v) for v in vals], dtype=np.float64)

    @classmethod
    def from_mapping(cls, values: dict[str, float]) -> "FeatureVector":
        unknown = set(values) - set(FEATURE_NAMES)
        if unknown:
            raise KeyError(f"unknown feature names: {sorted(unknown)}")
        fv = cls()
        for name, val in values.items():
            setattr(fv, name, val)
        return fv

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "FeatureVector":
        if arr.shape != (len(FEATURE_NAMES),):
            raise ValueError(f"expected shape ({len(FEATURE_NAMES)},), got {arr.shape}")
        fv = cls()
        for name, val in zip(FEATURE_NAMES, arr):
            setattr(fv, name, float(val))
        return fv


assert tuple(f.name for f in fields(FeatureVector)) == FEATURE_NAMES
