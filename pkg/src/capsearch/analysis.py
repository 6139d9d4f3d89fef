"""Deterministic text analysis: raw caption/query text to term sequences.

The same analyzer configuration is applied at index time and at query time;
an index file carries its config so the two can never drift apart.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources

from capsearch import porter

# Maximal runs of unicode letters/digits (underscore excluded).
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)
_ASCII_ALPHA_RE = re.compile(r"[a-z]+\Z")

STOPWORD_LISTS = ("english", "none")


def load_stopwords(name: str) -> frozenset[str]:
    """Load a named stopword list bundled with the package."""
    if name == "none":
        return frozenset()
    if name not in STOPWORD_LISTS:
        raise ValueError(f"unknown stopword list: {name!r}")
    text = resources.files("capsearch.resources").joinpath(f"stopwords_{name}.txt").read_text("utf-8")
    return frozenset(line.strip() for line in text.splitlines() if line.strip())


@dataclass(frozen=True)
class AnalyzerConfig:
    """Configuration of the analysis chain: lowercase -> split -> stop -> stem."""

    lowercase: bool = True
    token_split: str = "non-alphanumeric"
    stemming: bool = True
    stopwords: str = "english"

    def __post_init__(self) -> None:
        if self.token_split != "non-alphanumeric":
            raise ValueError(f"unknown token_split rule: {self.token_split!r}")
        if self.stopwords not in STOPWORD_LISTS:
            raise ValueError(f"unknown stopword list: {self.stopwords!r}")

    def to_dict(self) -> dict:
        return {
            "lowercase": self.lowercase,
            "token_split": self.token_split,
            "stemming": self.stemming,
            "stopwords": self.stopwords,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AnalyzerConfig":
        return cls(
            lowercase=bool(d["lowercase"]),
            token_split=str(d["token_split"]),
            stemming=bool(d["stemming"]),
            stopwords=str(d["stopwords"]),
        )


#: Analyzer used throughout the pipeline unless overridden.
DEFAULT_ANALYZER = AnalyzerConfig()

#: Config for plain keyword matching (no stemming, no stopword removal).
PLAIN_ANALYZER = AnalyzerConfig(stemming=False, stopwords="none")

#: Config for human-facing word statistics: stopwords out, words unstemmed.
DISPLAY_ANALYZER = AnalyzerConfig(stemming=False, stopwords="english")

_stopword_cache: dict[str, frozenset[str]] = {}


def _stopwords_for(config: AnalyzerConfig) -> frozenset[str]:
    name = config.stopwords
    if name not in _stopword_cache:
        _stopword_cache[name] = load_stopwords(name)
    return _stopword_cache[name]


def _stem_token(token: str) -> str:
    # The stemmer is defined over ascii a-z; other tokens pass through.
    if _ASCII_ALPHA_RE.match(token):
        return porter.stem(token)
    return token


def tokenize(text: str, config: AnalyzerConfig = DEFAULT_ANALYZER) -> list[str]:
    """Convert raw text into an ordered term sequence under ``config``.

    Empty input yields an empty sequence; this never raises.
    """
    if config.lowercase:
        text = text.lower()
    tokens = _TOKEN_RE.findall(text)
    stop = _stopwords_for(config)
    if stop:
        tokens = [t for t in tokens if t not in stop]
    if config.stemming:
        tokens = [_stem_token(t) for t in tokens]
    return tokens
