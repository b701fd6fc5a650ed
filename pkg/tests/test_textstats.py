from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from textorigin.errors import EmptyDocument
from textorigin.schema import FEATURE_NAMES
from textorigin.textstats import (
    Document, Lexicons, extract_stylometrics, flesch_reading_ease, load_lexicons,
    normalize_text, tokenize,
)

FIXTURES = Path(__file__).parent / "fixtures"

RATIO_FEATURES = (
    "flesch_reading_ease", "type_token_ratio", "hapax_legomena_ratio",
    "stopword_ratio", "cliche_ratio", "max_freq_2gram", "max_freq_3gram",
    "max_freq_4gram", "punctuation_count", "comma_count",
    "semicolon_and_colon_count",
)


def tv_of(text: str):
    return tokenize(Document.from_raw(text))


class TestTokenize:
    def test_words_and_punct(self):
        tv = tv_of("Hi, there.")
        assert tv.word_tokens == ("hi", "there")
        assert tv.punct_tokens == (",", ".")
        assert len(tv.all_tokens) == len(tv.word_tokens) + len(tv.punct_tokens)
        assert tv.sentences == ((0, 2),)

    def test_terminator_counting(self):
        assert len(tv_of("A. B? C!").sentences) == 3

    def test_abbreviation_guard(self):
        tv = tv_of("e.g. cats run.")
        assert len(tv.sentences) == 1

    def test_twenty_sentence_fixture(self):
        lines = [l for l in (FIXTURES / "sentences.txt").read_text().splitlines() if l]
        assert len(lines) == 20
        tv = tv_of(" ".join(lines))
        assert len(tv.sentences) == 20
        # Every hand-segmented sentence must match the produced ranges.
        for line, (start, end) in zip(lines, tv.sentences):
            assert tv.word_tokens[start:end] == tv_of(line).word_tokens

    def test_one_sentence_without_terminator(self):
        assert tv_of("no full stop here").sentences == ((0, 4),)

    def test_empty_document(self):
        with pytest.raises(EmptyDocument):
            tv_of("?!... ---")
        with pytest.raises(EmptyDocument):
            tv_of("   ")

    def test_curly_quotes_mapped(self):
        tv = tv_of("“don’t”")
        assert tv.word_tokens == ("don't",)
        assert tv.punct_tokens == ('"', '"')

    def test_sentence_ranges_disjoint_ordered(self):
        tv = tv_of("One two. Three! Four five six? Seven.")
        prev_end = 0
        for start, end in tv.sentences:
            assert start == prev_end and end > start
            prev_end = end
        assert prev_end == len(tv.word_tokens)


class TestNormalize:
    def test_idempotent(self):
        raw = "  A b—c  ’d\n\ne "
        once = normalize_text(raw)
        assert normalize_text(once) == once

    def test_collapses_whitespace(self):
        assert normalize_text("a \t b\n\nc") == "a b c"


class TestExtract:
    def test_counting_example(self, lexicons):
        # word=[the, cat, the, dog], stopwords include "the"
        fv = extract_stylometrics(tv_of("The cat the dog"), lexicons)
        assert fv.type_token_ratio == pytest.approx(0.75)
        assert fv.hapax_legomena_ratio == pytest.approx(0.5)
        assert fv.stopword_ratio == pytest.approx(0.5)
        assert fv.token_count == 4

    def test_bigram_example(self, lexicons):
        # [a, b, a, b, a]: bigram (a, b) appears twice among 4 bigrams
        fv = extract_stylometrics(tv_of("a b a b a"), lexicons)
        assert fv.max_freq_2gram == pytest.approx(0.5)

    def test_punctuation_fractions(self, lexicons):
        fv = extract_stylometrics(tv_of("Hi, there."), lexicons)
        assert fv.punctuation_count == pytest.approx(0.5)
        assert fv.comma_count == pytest.approx(0.25)
        assert fv.semicolon_and_colon_count == 0.0

    def test_ngram_shorter_than_n(self, lexicons):
        fv = extract_stylometrics(tv_of("only three words"), lexicons)
        assert fv.max_freq_4gram == 0.0
        assert fv.max_freq_3gram > 0.0

    def test_cliche_coverage(self, lexicons):
        # "at the end of the day" covers 6 of 8 word tokens
        fv = extract_stylometrics(tv_of("at the end of the day we rest"), lexicons)
        assert fv.cliche_ratio == pytest.approx(6 / 8)

    def test_curvature_and_bert_unset(self, lexicons):
        fv = extract_stylometrics(tv_of("plain text here."), lexicons)
        assert fv.curvature is None and fv.bert_ai_score is None
        arr = fv.to_array()
        assert np.isnan(arr[FEATURE_NAMES.index("curvature")])


class TestFlesch:
    def test_clamp_dominates(self):
        # 6 one-syllable words, one sentence: raw 116.145 clamps to 100
        assert flesch_reading_ease(tv_of("The cat sat on the mat.")) == 1.0
        assert flesch_reading_ease(tv_of("a")) == 1.0

    def test_fixture_paragraph_matches_hand_count(self):
        # 21 words, 3 sentences, 29 hand-counted syllables:
        # 206.835 - 1.015 * 7 - 84.6 * 29/21 = 82.9014
        text = ("The garden was full of roses. Every child ran along the river "
                "path. Dinner came late, and the house fell silent.")
        assert flesch_reading_ease(tv_of(text)) == pytest.approx(0.829014, abs=0.03)


# --------------------------------------------------------------------------
# Properties
# --------------------------------------------------------------------------

random_text = st.text(
    alphabet=st.characters(codec="utf-8", exclude_categories=("Cs",)),
    min_size=0, max_size=200,
)


@settings(max_examples=300, deadline=None)
@given(random_text)
def test_ratio_bounds_property(text):
    lex = _LEX
    try:
        tv = tv_of(text)
    except EmptyDocument:
        return
    fv = extract_stylometrics(tv, lex)
    for name in RATIO_FEATURES:
        value = getattr(fv, name)
        assert 0.0 <= value <= 1.0, f"{name}={value} for {text!r}"
    assert fv.hapax_legomena_ratio <= fv.type_token_ratio + 1e-15


@settings(max_examples=200, deadline=None)
@given(random_text)
def test_duplication_properties(text):
    lex = _LEX
    try:
        tv = tv_of(text)
    except EmptyDocument:
        return
    fv = extract_stylometrics(tv, lex)
    doubled = extract_stylometrics(tv_of(f"{text}! {text}"), lex)
    # Types unchanged, tokens doubled: TTR exactly halves.
    assert doubled.type_token_ratio == fv.type_token_ratio / 2.0
    assert doubled.max_freq_2gram >= fv.max_freq_2gram - 1e-15


@settings(max_examples=150, deadline=None)
@given(random_text)
def test_determinism_property(text):
    lex = _LEX
    try:
        first = extract_stylometrics(tv_of(text), lex)
    except EmptyDocument:
        return
    second = extract_stylometrics(tv_of(text), lex)
    assert first == second


def test_lexicons_loaded_and_hashed():
    lex = load_lexicons()
    assert isinstance(lex, Lexicons)
    assert len(lex.stopwords) >= 100
    assert len(lex.cliches) >= 50
    assert lex.content_hash == load_lexicons().content_hash


_LEX = load_lexicons()
