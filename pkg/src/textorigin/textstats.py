"""Tokenization and the 14 text-statistic features.

Everything here is computable from the text alone: readability, lexical
diversity, repetition, and punctuation behavior. The two model-backed
signals (curvature, neural score) are filled in elsewhere.

All functions are pure; ``Lexicons`` is immutable after load and safe to
share across threads.
"""
from __future__ import annotations

import hashlib
import unicodedata
from collections import Counter
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import EmptyDocument
from .schema import FeatureVector

# Curly quotes and typographic dashes are mapped to ASCII before tokenizing
# so that apostrophe-joined words and sentence terminators behave uniformly.
_CHAR_MAP = str.maketrans({
    "‘": "'", "’": "'", "‚": "'", "‛": "'",
    "“": '"', "”": '"', "„": '"', "‟": '"',
    "–": "-", "—": "-", "―": "-", "−": "-",
    "…": "...",
})

_TERMINATORS = {".", "!", "?"}

# Multi-letter abbreviations whose trailing period does not end a sentence.
# Single-letter dotted acronyms (e.g., i.e., a.m.) are caught structurally:
# a one-letter word preceded by a period never terminates.
_ABBREVIATIONS = frozenset({
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "mt", "etc", "vs",
    "cf", "al", "inc", "ltd", "co", "corp", "dept", "fig", "no", "vol",
    "approx", "est", "min", "max", "avg", "ca", "pp", "ed", "eds", "rev",
})

_VOWELS = frozenset("aeiouy")


def normalize_text(raw: str) -> str:
    """NFC normalization, ASCII quote/dash mapping, collapsed whitespace.

    Idempotent: normalize_text(normalize_text(s)) == normalize_text(s).
    """
    text = unicodedata.normalize("NFC", raw).translate(_CHAR_MAP)
    return " ".join(text.split())


@dataclass(frozen=True)
class Document:
    raw: str
    normalized: str

    @classmethod
    def from_raw(cls, raw: str) -> "Document":
        return cls(raw=raw, normalized=normalize_text(raw))


@dataclass(frozen=True)
class TokenView:
    """Word and punctuation tokens in document order.

    ``sentences`` holds (start, end) index ranges over ``word_tokens``;
    ranges are non-empty, disjoint, and ordered.
    """

    word_tokens: tuple[str, ...]
    punct_tokens: tuple[str, ...]
    all_tokens: tuple[str, ...]
    sentences: tuple[tuple[int, int], ...]


def _is_word_char(ch: str) -> bool:
    return ch.isalnum() or ch == "'"


def _is_punct_char(ch: str) -> bool:
    return unicodedata.category(ch).startswith("P")


def tokenize(doc: Document) -> TokenView:
    """Split a document into word tokens, punctuation tokens, and sentences.

    Word tokens are maximal runs of letters/digits/apostrophes, lowercased
    (runs of bare apostrophes count as punctuation instead). Sentences end
    at ``. ! ?`` followed by whitespace or end of text, with abbreviation
    guards on the period.

    Raises EmptyDocument when the text contains no word tokens.
    """
    text = doc.normalized
    words: list[str] = []
    puncts: list[str] = []
    all_tokens: list[str] = []
    # Per all_tokens position: word index, or None for punctuation.
    word_slot: list[int | None] = []
    sentences: list[tuple[int, int]] = []
    sent_start = 0

    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if _is_word_char(ch):
            j = i
            while j < n and _is_word_char(text[j]):
                j += 1
            run = text[i:j]
            if any(c.isalnum() for c in run):
                words.append(run.lower())
                all_tokens.append(run.lower())
                word_slot.append(len(words) - 1)
            else:
                # A run of bare apostrophes carries no word content.
                for c in run:
                    puncts.append(c)
                    all_tokens.append(c)
                    word_slot.append(None)
            i = j
            continue
        if _is_punct_char(ch):
            puncts.append(ch)
            all_tokens.append(ch)
            word_slot.append(None)
            if ch in _TERMINATORS and (i + 1 >= n or text[i + 1].isspace()):
                if len(words) > sent_start and not _guarded(ch, all_tokens, word_slot, words):
                    sentences.append((sent_start, len(words)))
                    sent_start = len(words)
        i += 1

    if not words:
        raise EmptyDocument("no word tokens in document")
    if len(words) > sent_start:
        sentences.append((sent_start, len(words)))

    return TokenView(
        word_tokens=tuple(words),
        punct_tokens=tuple(puncts),
        all_tokens=tuple(all_tokens),
        sentences=tuple(sentences),
    )


def _guarded(terminator: str, all_tokens: list[str], word_slot: list[int | None],
             words: list[str]) -> bool:
    """True when a candidate period belongs to an abbreviation."""
    if terminator != ".":
        return False
    # Token layout right now: ... [prev?] [word] [.]  (the period was appended last)
    if len(all_tokens) < 2 or word_slot[-2] is None:
        return False
    prev_word = words[word_slot[-2]]
    if prev_word in _ABBREVIATIONS:
        return True
    # Dotted acronym: single letter preceded by another period (e.g / i.e / a.m).
    if len(prev_word) == 1 and len(all_tokens) >= 3 and all_tokens[-3] == ".":
        return True
    return False


# --------------------------------------------------------------------------
# Lexicons
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Lexicons:
    """Stopword and cliche lists, immutable after load.

    ``content_hash`` is recorded in model metadata so a model is always
    scored with the lexicons it was trained with.
    """

    stopwords: frozenset[str]
    cliches: frozenset[tuple[str, ...]]
    content_hash: str

    @property
    def max_cliche_len(self) -> int:
        return max((len(c) for c in self.cliches), default=0)


def _parse_lines(text: str) -> list[str]:
    entries = []
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            entries.append(line.lower())
    return entries


def load_lexicons(stopwords_path: str | Path | None = None,
                  cliches_path: str | Path | None = None) -> Lexicons:
    """Load lexicons from UTF-8 files (one entry per line, ``#`` comments).

    Defaults to the lists shipped with the package.
    """
    if stopwords_path is None:
        stop_text = resources.files("textorigin").joinpath("data/stopwords.txt").read_text("utf-8")
    else:
        stop_text = Path(stopwords_path).read_text("utf-8")
    if cliches_path is None:
        cliche_text = resources.files("textorigin").joinpath("data/cliches.txt").read_text("utf-8")
    else:
        cliche_text = Path(cliches_path).read_text("utf-8")

    stopwords = frozenset(_parse_lines(stop_text))
    cliches = frozenset(tuple(entry.split()) for entry in _parse_lines(cliche_text))
    if not stopwords or not cliches:
        raise ValueError("lexicon files must be non-empty")

    digest = hashlib.sha256()
    for word in sorted(stopwords):
        digest.update(word.encode("utf-8") + b"\n")
    digest.update(b"\x00")
    for phrase in sorted(cliches):
        digest.update(" ".join(phrase).encode("utf-8") + b"\n")
    return Lexicons(stopwords=stopwords, cliches=cliches, content_hash=digest.hexdigest())


# --------------------------------------------------------------------------
# Features
# --------------------------------------------------------------------------

def _syllables(word: str) -> int:
    """Vowel-group syllable estimate with silent-e and minimum-1 rules."""
    letters = "".join(c for c in word if c.isalpha())
    if not letters:
        return 1
    count = 0
    prev_vowel = False
    for c in letters:
        is_vowel = c in _VOWELS
        if is_vowel and not prev_vowel:
            count += 1
        prev_vowel = is_vowel
    if count > 1 and letters.endswith("e") and not letters.endswith("le"):
        count -= 1
    return max(count, 1)


def flesch_reading_ease(tv: TokenView) -> float:
    """Flesch reading-ease clamped to [0, 100] and scaled to [0, 1]."""
    words = len(tv.word_tokens)
    sentences = len(tv.sentences)
    if words == 0 or sentences == 0:
        raise EmptyDocument("Flesch requires at least one word and sentence")
    syllables = sum(_syllables(w) for w in tv.word_tokens)
    raw = 206.835 - 1.015 * (words / sentences) - 84.6 * (syllables / words)
    return min(max(raw, 0.0), 100.0) / 100.0


def _max_ngram_freq(tv: TokenView, n: int) -> float:
    """Highest n-gram count over the number of n-grams, within sentences."""
    counts: Counter[tuple[str, ...]] = Counter()
    total = 0
    for start, end in tv.sentences:
        for i in range(start, end - n + 1):
            counts[tv.word_tokens[i:i + n]] += 1
            total += 1
    if total == 0:
        return 0.0
    return max(counts.values()) / total


def _cliche_covered(tv: TokenView, lex: Lexicons) -> int:
    """Word tokens covered by greedy longest-match, non-overlapping."""
    covered = 0
    max_len = lex.max_cliche_len
    for start, end in tv.sentences:
        i = start
        while i < end:
            for length in range(min(max_len, end - i), 0, -1):
                if tv.word_tokens[i:i + length] in lex.cliches:
                    covered += length
                    i += length
                    break
            else:
                i += 1
    return covered


def extract_stylometrics(tv: TokenView, lex: Lexicons) -> FeatureVector:
    """Compute the 14 text features; curvature and bert_ai_score stay unset."""
    words = tv.word_tokens
    n_words = len(words)
    n_all = len(tv.all_tokens)
    type_counts = Counter(words)

    hapax_tokens = sum(1 for c in type_counts.values() if c == 1)
    stop_tokens = sum(1 for w in words if w in lex.stopwords)

    commas = sum(1 for p in tv.punct_tokens if p == ",")
    semicolons = sum(1 for p in tv.punct_tokens if p in (";", ":"))

    return FeatureVector(
        flesch_reading_ease=flesch_reading_ease(tv),
        sentence_count=len(tv.sentences),
        avg_sentence_length=n_words / len(tv.sentences),
        token_count=n_words,
        avg_word_length=sum(len(w) for w in words) / n_words,
        type_token_ratio=len(type_counts) / n_words,
        hapax_legomena_ratio=hapax_tokens / n_words,
        stopword_ratio=stop_tokens / n_words,
        cliche_ratio=_cliche_covered(tv, lex) / n_words,
        max_freq_2gram=_max_ngram_freq(tv, 2),
        max_freq_3gram=_max_ngram_freq(tv, 3),
        max_freq_4gram=_max_ngram_freq(tv, 4),
        punctuation_count=len(tv.punct_tokens) / n_all,
        comma_count=commas / n_all,
        semicolon_and_colon_count=semicolons / n_all,
    )


def extract_from_text(text: str, lex: Lexicons) -> FeatureVector:
    """Convenience: normalize, tokenize, and extract in one call."""
    return extract_stylometrics(tokenize(Document.from_raw(text)), lex)
