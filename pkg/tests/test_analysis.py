import pytest
from hypothesis import given
from hypothesis import strategies as st

from capsearch.analysis import (
    AnalyzerConfig,
    DEFAULT_ANALYZER,
    PLAIN_ANALYZER,
    load_stopwords,
    tokenize,
)

NO_STEM_STOP = AnalyzerConfig(stemming=False, stopwords="none")
STOP_ONLY = AnalyzerConfig(stemming=False, stopwords="english")

words = st.text(alphabet=st.characters(min_codepoint=97, max_codepoint=122), min_size=1, max_size=10)
texts = st.lists(words, max_size=12).map(" ".join)


def test_empty_input():
    assert tokenize("", DEFAULT_ANALYZER) == []


def test_lowercase_split_no_stem_no_stop():
    got = tokenize("A large white bowl of many green apples.", NO_STEM_STOP)
    assert got == ["a", "large", "white", "bowl", "of", "many", "green", "apples"]


def test_keyword_query_with_stopwords():
    assert tokenize("car, bus, traffic light", STOP_ONLY) == ["car", "bus", "traffic", "light"]


def test_default_analyzer_stems():
    assert tokenize("many green apples", DEFAULT_ANALYZER) == ["mani", "green", "appl"]


def test_stopwords_removed_before_stemming():
    # "the"/"of" are in the bundled list; content words survive
    assert tokenize("the color of the sky", DEFAULT_ANALYZER) == ["color", "sky"]


def test_terms_nonempty_and_lowercase():
    for term in tokenize("Mixed-CASE text, with 42 numbers!", NO_STEM_STOP):
        assert term
        assert term == term.lower()
        assert not any(c.isspace() for c in term)


def test_numbers_kept():
    assert tokenize("route 66", DEFAULT_ANALYZER) == ["rout", "66"]


def test_non_ascii_letters_kept():
    assert tokenize("Café au lait", NO_STEM_STOP) == ["café", "au", "lait"]


def test_underscore_splits():
    assert tokenize("snake_case", NO_STEM_STOP) == ["snake", "case"]


def test_stopword_resource_loads():
    stops = load_stopwords("english")
    assert "the" in stops and "with" in stops
    assert len(stops) == 33
    assert load_stopwords("none") == frozenset()


def test_unknown_config_values_rejected():
    with pytest.raises(ValueError):
        AnalyzerConfig(stopwords="klingon")
    with pytest.raises(ValueError):
        AnalyzerConfig(token_split="whitespace")


def test_config_roundtrip():
    cfg = AnalyzerConfig(lowercase=False, stemming=False, stopwords="none")
    assert AnalyzerConfig.from_dict(cfg.to_dict()) == cfg


@given(texts)
def test_idempotent_without_stemming(text):
    once = tokenize(text, STOP_ONLY)
    assert tokenize(" ".join(once), STOP_ONLY) == once


@given(texts, texts)
def test_concatenation(a, b):
    assert tokenize(a + " " + b, DEFAULT_ANALYZER) == tokenize(a, DEFAULT_ANALYZER) + tokenize(b, DEFAULT_ANALYZER)


@given(texts)
def test_case_insensitive_when_lowercasing(text):
    assert tokenize(text.upper(), DEFAULT_ANALYZER) == tokenize(text, DEFAULT_ANALYZER)


@given(texts)
def test_no_stopwords_in_output_without_stemming(text):
    stops = load_stopwords("english")
    assert not stops.intersection(tokenize(text, STOP_ONLY))


@given(texts)
def test_plain_analyzer_matches_simple_split(text):
    assert tokenize(text, PLAIN_ANALYZER) == text.lower().split()
