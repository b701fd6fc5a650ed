"""Synthetic detection corpus for tests, demos, and desk-scale experiments.

"ai" documents are sampled from the built-in n-gram language model (fitted
on a narrow background corpus); "human" documents come from template
sentences over a much wider vocabulary. Surface style (sentence length,
commas, semicolons) and the stubbed neural score are drawn from
class-dependent distributions with deliberate overlap, independently of
the wording, so each feature family carries partial signal of its own and
the combined model beats any single family.
"""
from __future__ import annotations

import numpy as np
import pandas as pd

from .curvature import cpc_score
from .errors import DegenerateVariance
from .ngram_lm import NgramLanguageModel
from .schema import FEATURE_NAMES
from .textstats import Document, Lexicons, extract_stylometrics, load_lexicons, tokenize

# Narrow pools: what the language model is fitted on.
_CORE = {
    "noun": ["system", "model", "result", "value", "method", "process", "report",
             "market", "city", "garden", "river", "engine", "signal", "table",
             "record", "student", "teacher", "morning", "question", "answer"],
    "verb": ["shows", "gives", "takes", "makes", "finds", "keeps", "holds",
             "moves", "brings", "follows", "supports", "improves", "explains"],
    "adj": ["new", "good", "large", "small", "clear", "simple", "strong",
            "useful", "common", "steady", "basic", "final"],
}

# Wide pools: extra words only human-side templates reach for.
_RARE = {
    "noun": ["harbinger", "quagmire", "zephyr", "labyrinth", "veranda", "sonnet",
             "almanac", "gossamer", "ledger", "catacomb", "marmalade", "paradox",
             "monsoon", "obelisk", "chandler", "brocade", "thicket", "crucible",
             "vestibule", "parable", "tundra", "mosaic"],
    "verb": ["meanders", "quenches", "unravels", "bewilders", "galvanizes",
             "placates", "scuttles", "burnishes", "heckles", "muffles",
             "pilfers", "serenades", "squanders"],
    "adj": ["iridescent", "threadbare", "cantankerous", "luminous", "brackish",
            "mercurial", "ramshackle", "sardonic", "velvety", "wistful",
            "gnarled", "opalescent"],
}

_TOPICS = {
    "news": ["council", "budget", "election", "policy", "mayor", "debate"],
    "travel": ["journey", "harbor", "trail", "luggage", "passport", "coastline"],
    "science": ["experiment", "particle", "sample", "theory", "laboratory", "dataset"],
    "food": ["recipe", "kitchen", "flavor", "spice", "skillet", "harvest"],
}

_FUNCTION = ["the", "a", "this", "that", "our", "its", "each", "some", "any", "no"]
_CONNECT = ["and", "but", "so", "while", "because", "although", "before", "after"]


def _template_tokens(rng: np.random.Generator, length: int, topic: str,
                     rare_rate: float) -> list[str]:
    """A word-token stream from template phrases; rare_rate controls how
    often a slot reaches into the wide pools."""
    rare_nouns = _RARE["noun"]
    tokens: list[str] = []
    while len(tokens) < length:
        noun1 = _pick(rng, _CORE["noun"], rare_nouns, rare_rate)
        noun2 = _pick(rng, _CORE["noun"] + _TOPICS[topic], rare_nouns, rare_rate)
        verb = _pick(rng, _CORE["verb"], _RARE["verb"], rare_rate)
        adj = _pick(rng, _CORE["adj"], _RARE["adj"], rare_rate)
        phrase = [rng.choice(_FUNCTION), adj, noun1, verb,
                  rng.choice(_FUNCTION), noun2]
        if rng.random() < 0.5:
            phrase.append(rng.choice(_CONNECT))
        tokens.extend(str(w) for w in phrase)
    return tokens[:length]


def _pick(rng: np.random.Generator, common: list[str], rare: list[str],
          rare_rate: float) -> str:
    pool = rare if rng.random() < rare_rate else common
    return str(rng.choice(pool))


def _background_corpus(rng: np.random.Generator, n_sentences: int = 1200) -> list[str]:
    topics = sorted(_TOPICS)
    out = []
    for i in range(n_sentences):
        toks = _template_tokens(rng, int(rng.integers(6, 14)), topics[i % len(topics)],
                                rare_rate=0.0)
        out.append(" ".join(toks) + ".")
    return out


def fit_reference_lm(seed: int = 7, order: int = 3,
                     alpha: float = 0.2) -> NgramLanguageModel:
    """The language model used both to generate "ai" texts and to score
    curvature; sampling and scoring model are the same."""
    rng = np.random.default_rng(seed)
    return NgramLanguageModel.fit(_background_corpus(rng), order=order,
                                  smoothing_alpha=alpha)


def _punctuate(tokens: list[str], rng: np.random.Generator, sent_mean: float,
               sent_jitter: float, comma_rate: float, semi_rate: float) -> str:
    """Assemble word tokens into sentences; structure is independent of the
    wording so surface style carries its own signal."""
    pieces: list[str] = []
    next_break = max(3, int(rng.normal(sent_mean, sent_jitter)))
    since_break = 0
    for i, tok in enumerate(tokens):
        word = tok.capitalize() if since_break == 0 else tok
        pieces.append(" " if since_break else "")
        pieces.append(word)
        since_break += 1
        last = i == len(tokens) - 1
        if since_break >= next_break or last:
            pieces.append(".")
            pieces.append(" " if not last else "")
            since_break = 0
            next_break = max(3, int(rng.normal(sent_mean, sent_jitter)))
        elif rng.random() < comma_rate:
            pieces.append(";" if rng.random() < semi_rate else ",")
    return "".join(pieces)


def make_synthetic_corpus(n_docs: int = 4000, seed: int = 7,
                          lm: NgramLanguageModel | None = None,
                          lexicons: Lexicons | None = None,
                          confusion: float = 0.25) -> tuple[pd.DataFrame, NgramLanguageModel]:
    """Build a labeled corpus with all 17 feature columns precomputed.

    ``confusion`` is the per-channel probability that a document mimics the
    other class in that channel (wording, surface style); it keeps every
    single-family model imperfect.
    """
    rng = np.random.default_rng(seed)
    lm = lm or fit_reference_lm(seed=seed)
    lexicons = lexicons or load_lexicons()
    topics = sorted(_TOPICS)

    rows = []
    for i in range(n_docs):
        label = "ai" if i % 2 == 0 else "human"
        topic = topics[(i // 2) % len(topics)]
        length = int(rng.integers(45, 95))

        if label == "ai":
            generator = "lm-alpha" if (i // 2) % 2 == 0 else "lm-beta"
            base_temp = 0.8 if generator == "lm-alpha" else 1.0
            temp = 1.3 if rng.random() < confusion else base_temp
            tokens = lm.generate(length, seed=int(rng.integers(2**31)),
                                 temperature=temp)
            style = "human" if rng.random() < confusion else "ai"
            bert = float(rng.beta(5.0, 2.0))
        else:
            generator = "human"
            rare_rate = 0.04 if rng.random() < confusion else 0.3
            tokens = _template_tokens(rng, length, topic, rare_rate)
            style = "ai" if rng.random() < confusion else "human"
            bert = float(rng.beta(2.0, 5.0))

        if style == "ai":
            text = _punctuate(tokens, rng, sent_mean=19.0, sent_jitter=2.0,
                              comma_rate=0.16, semi_rate=0.3)
        else:
            text = _punctuate(tokens, rng, sent_mean=11.0, sent_jitter=5.0,
                              comma_rate=0.07, semi_rate=0.1)

        rows.append({
            "id": f"doc-{i:05d}", "text": text, "label": label,
            "generator": generator, "domain_topic": topic,
            "bert_ai_score": bert,
        })

    df = pd.DataFrame(rows)
    return attach_features(df, lm, lexicons), lm


def attach_features(df: pd.DataFrame, lm: NgramLanguageModel,
                    lexicons: Lexicons | None = None,
                    median_curvature: float = 0.0) -> pd.DataFrame:
    """Compute the 14 text features plus curvature for every row.

    An existing bert_ai_score column is kept verbatim (precomputed values
    take precedence); curvature falls back to ``median_curvature`` when the
    distributions are degenerate.
    """
    lexicons = lexicons or load_lexicons()
    feature_rows = []
    for text in df["text"]:
        doc = Document.from_raw(str(text))
        fv = extract_stylometrics(tokenize(doc), lexicons)
        try:
            fv.curvature = cpc_score(lm.distributions(doc)).score
        except DegenerateVariance:
            fv.curvature = median_curvature
        feature_rows.append(fv.as_dict())
    features = pd.DataFrame(feature_rows, index=df.index)
    if "bert_ai_score" in df.columns:
        features["bert_ai_score"] = df["bert_ai_score"]
    out = df.drop(columns=[c for c in FEATURE_NAMES if c in df.columns])
    return pd.concat([out, features], axis=1)
