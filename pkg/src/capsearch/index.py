"""BM25-scored inverted index over caption documents.

Scoring uses the Lucene BM25 variant: idf(t) = ln(1 + (N - df + 0.5)/(df + 0.5))
and no (k1+1) factor in the numerator. Document lengths are exact token counts
(no quantized length norms). An index is immutable once built.
"""

from __future__ import annotations

import hashlib
import json
import math
from bisect import bisect_left
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from capsearch.analysis import AnalyzerConfig, tokenize

INDEX_MAGIC = "capsearch-index"
INDEX_VERSION = 1


class IndexFileError(Exception):
    """Base class for index persistence failures."""


class IndexFormatError(IndexFileError):
    """File is not an index file, or is truncated/corrupt."""


class IndexVersionError(IndexFileError):
    """Index file written by an incompatible format version."""


class IndexChecksumError(IndexFileError):
    """Index payload does not match its recorded checksum."""


class DuplicateDocumentError(ValueError):
    """Two documents share the same id."""


class UnknownDocumentError(KeyError):
    """Requested document id is not in the index."""


@dataclass(frozen=True)
class Bm25Params:
    k1: float = 0.9
    b: float = 0.4

    def __post_init__(self) -> None:
        if self.k1 < 0:
            raise ValueError(f"k1 must be >= 0, got {self.k1}")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError(f"b must be in [0, 1], got {self.b}")


DEFAULT_BM25 = Bm25Params()


@dataclass
class RankedResult:
    """Search hits sorted by descending score, ties by ascending doc id."""

    entries: list[tuple[str, float]]
    query_terms: list[str]

    def ids(self) -> list[str]:
        return [doc_id for doc_id, _ in self.entries]


def _unique(terms: Iterable[str]) -> list[str]:
    seen: set[str] = set()
    out: list[str] = []
    for t in terms:
        if t not in seen:
            seen.add(t)
            out.append(t)
    return out


class InvertedIndex:
    """Term dictionary, postings, and corpus statistics for BM25 search.

    Internal doc ids are dense ints assigned in ascending external-id order,
    so ascending internal order is also the deterministic tie-break order.
    """

    def __init__(
        self,
        analyzer: AnalyzerConfig,
        doc_ids: list[str],
        doc_len: list[int],
        postings: dict[str, list[tuple[int, int]]],
    ) -> None:
        self.analyzer = analyzer
        self.doc_ids = doc_ids
        self.doc_len = doc_len
        self.postings = postings
        self._internal = {doc_id: i for i, doc_id in enumerate(doc_ids)}
        self.n_docs = len(doc_ids)
        self.avgdl = sum(doc_len) / self.n_docs if self.n_docs else 0.0
        self._validate()

    def _validate(self) -> None:
        if len(self.doc_len) != self.n_docs:
            raise ValueError("doc_len length does not match doc count")
        if len(self._internal) != self.n_docs:
            raise DuplicateDocumentError("duplicate document ids in index")
        counted = [0] * self.n_docs
        for term, plist in self.postings.items():
            if not 1 <= len(plist) <= self.n_docs:
                raise ValueError(f"term {term!r} has invalid document frequency")
            prev = -1
            for doc, tf in plist:
                if doc <= prev:
                    raise ValueError(f"postings for {term!r} not strictly ascending")
                if tf < 1:
                    raise ValueError(f"non-positive tf for {term!r}")
                counted[doc] += tf
                prev = doc
        if counted != self.doc_len:
            raise ValueError("postings term counts do not match document lengths")

    # -- statistics ---------------------------------------------------------

    def df(self, term: str) -> int:
        plist = self.postings.get(term)
        return len(plist) if plist else 0

    @property
    def n_terms(self) -> int:
        return len(self.postings)

    def term_freq(self, term: str, internal_id: int) -> int:
        plist = self.postings.get(term)
        if not plist:
            return 0
        pos = bisect_left(plist, (internal_id,))
        if pos < len(plist) and plist[pos][0] == internal_id:
            return plist[pos][1]
        return 0

    def internal_id(self, doc_id: str) -> int:
        try:
            return self._internal[doc_id]
        except KeyError:
            raise UnknownDocumentError(doc_id) from None

    def _idf(self, term: str) -> float:
        df = self.df(term)
        if df == 0:
            return 0.0
        return math.log(1.0 + (self.n_docs - df + 0.5) / (df + 0.5))


def build_index(docs: Iterable, analyzer: AnalyzerConfig) -> InvertedIndex:
    """Build an index from caption documents or plain ``(doc_id, text)`` pairs.

    Documents are ordered by ascending id regardless of input order, so the
    same corpus always produces the same index.
    """
    by_id: dict[str, str] = {}
    for doc in docs:
        if hasattr(doc, "image_id"):
            doc_id, text = doc.image_id, doc.concatenated
        else:
            doc_id, text = doc
        if doc_id in by_id:
            raise DuplicateDocumentError(f"duplicate document id: {doc_id!r}")
        by_id[str(doc_id)] = text
    if not by_id:
        raise ValueError("cannot build an index from zero documents")

    doc_ids = sorted(by_id)
    doc_len: list[int] = []
    postings: dict[str, list[tuple[int, int]]] = {}
    for internal, doc_id in enumerate(doc_ids):
        terms = tokenize(by_id[doc_id], analyzer)
        doc_len.append(len(terms))
        counts: dict[str, int] = {}
        for t in terms:
            counts[t] = counts.get(t, 0) + 1
        for t, tf in counts.items():
            postings.setdefault(t, []).append((internal, tf))
    return InvertedIndex(analyzer, doc_ids, doc_len, postings)


def bm25_score(
    index: InvertedIndex,
    query_terms: list[str],
    doc_id: str,
    params: Bm25Params = DEFAULT_BM25,
) -> float:
    """Score one document against an analyzed query (repeated terms count once)."""
    internal = index.internal_id(doc_id)
    dl = index.doc_len[internal]
    score = 0.0
    for term in _unique(query_terms):
        tf = index.term_freq(term, internal)
        if tf == 0:
            continue
        norm = params.k1 * (1.0 - params.b + params.b * dl / index.avgdl)
        score += index._idf(term) * tf / (tf + norm)
    return score


def search(
    index: InvertedIndex,
    query_text: str,
    k: int,
    params: Bm25Params = DEFAULT_BM25,
) -> RankedResult:
    """Top-k documents by BM25 score; zero-score documents are never returned."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    terms = tokenize(query_text, index.analyzer)
    scores: dict[int, float] = {}
    for term in _unique(terms):
        plist = index.postings.get(term)
        if not plist:
            continue
        idf = index._idf(term)
        for internal, tf in plist:
            dl = index.doc_len[internal]
            norm = params.k1 * (1.0 - params.b + params.b * dl / index.avgdl)
            scores[internal] = scores.get(internal, 0.0) + idf * tf / (tf + norm)
    ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))[:k]
    entries = [(index.doc_ids[internal], s) for internal, s in ranked]
    return RankedResult(entries=entries, query_terms=terms)


# -- persistence -------------------------------------------------------------


def _canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def save_index(index: InvertedIndex, path: str | Path) -> None:
    """Write a versioned, checksummed JSON container; output is deterministic."""
    payload = {
        "analyzer": index.analyzer.to_dict(),
        "n_docs": index.n_docs,
        "avgdl": index.avgdl,
        "doc_len": {str(i): n for i, n in enumerate(index.doc_len)},
        "doc_meta": {str(i): doc_id for i, doc_id in enumerate(index.doc_ids)},
        "postings": {
            term: [[doc, tf] for doc, tf in plist]
            for term, plist in index.postings.items()
        },
    }
    body = _canonical_json(payload)
    envelope = {
        "magic": INDEX_MAGIC,
        "version": INDEX_VERSION,
        "checksum": hashlib.sha256(body.encode("utf-8")).hexdigest(),
        "payload": payload,
    }
    Path(path).write_text(_canonical_json(envelope) + "\n", encoding="utf-8")


def load_index(path: str | Path) -> InvertedIndex:
    """Load an index file, verifying magic, version, and checksum."""
    raw = Path(path).read_text(encoding="utf-8")
    try:
        envelope = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise IndexFormatError(f"{path}: not a valid index file (truncated or corrupt): {exc}") from exc
    if not isinstance(envelope, dict) or envelope.get("magic") != INDEX_MAGIC:
        raise IndexFormatError(f"{path}: missing index file magic {INDEX_MAGIC!r}")
    version = envelope.get("version")
    if version != INDEX_VERSION:
        raise IndexVersionError(f"{path}: format version {version!r}, expected {INDEX_VERSION}")
    payload = envelope.get("payload")
    if not isinstance(payload, dict):
        raise IndexFormatError(f"{path}: payload missing or malformed")
    body = _canonical_json(payload)
    digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
    if digest != envelope.get("checksum"):
        raise IndexChecksumError(f"{path}: checksum mismatch, file is corrupt")

    try:
        analyzer = AnalyzerConfig.from_dict(payload["analyzer"])
        n_docs = int(payload["n_docs"])
        doc_len = [int(payload["doc_len"][str(i)]) for i in range(n_docs)]
        doc_ids = [str(payload["doc_meta"][str(i)]) for i in range(n_docs)]
        postings = {
            term: [(int(doc), int(tf)) for doc, tf in plist]
            for term, plist in payload["postings"].items()
        }
    except (KeyError, TypeError, ValueError) as exc:
        raise IndexFormatError(f"{path}: malformed payload: {exc}") from exc

    loaded = InvertedIndex(analyzer, doc_ids, doc_len, postings)
    if abs(loaded.avgdl - float(payload["avgdl"])) > 1e-9:
        raise IndexFormatError(f"{path}: stored avgdl inconsistent with document lengths")
    return loaded
