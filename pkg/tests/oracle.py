"""Independent reference implementations used to check the library.

Nothing here touches the package's index, geometry, or scenario machinery:
scores come from a direct loop over raw token lists, partition checks from
pairwise rectangle arithmetic, and scenario ground truth from first-principles
enumeration.
"""

import math
from itertools import combinations


def bm25_scores(docs: dict[str, str], query: str, k1: float = 0.9, b: float = 0.4) -> dict[str, float]:
    """Score every document against the query by direct evaluation.

    Documents and query are whitespace-separated term strings (already
    analyzed); repeated query terms count once. Zero scores are dropped.
    """
    tokens = {doc_id: text.split() for doc_id, text in docs.items()}
    n = len(docs)
    avgdl = sum(len(t) for t in tokens.values()) / n
    scores: dict[str, float] = {}
    for doc_id, terms in tokens.items():
        total = 0.0
        for q in dict.fromkeys(query.split()):
            tf = terms.count(q)
            if tf == 0:
                continue
            df = sum(1 for other in tokens.values() if q in other)
            idf = math.log(1.0 + (n - df + 0.5) / (df + 0.5))
            total += idf * tf / (tf + k1 * (1.0 - b + b * len(terms) / avgdl))
        if total > 0.0:
            scores[doc_id] = total
    return scores


def bm25_rank(docs: dict[str, str], query: str, k: int, k1: float = 0.9, b: float = 0.4):
    scores = bm25_scores(docs, query, k1, b)
    ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    return ranked[:k]


def interior_disjoint(a, b) -> bool:
    return (
        a.x + a.w <= b.x
        or b.x + b.w <= a.x
        or a.y + a.h <= b.y
        or b.y + b.h <= a.y
    )


def check_exact_partition(rects, width: int, height: int) -> None:
    """Rects must tile the width x height frame exactly: no gap, no overlap."""
    assert rects, "partition cannot be empty"
    for r in rects:
        assert 0 <= r.x and r.x + r.w <= width, f"{r} exceeds width {width}"
        assert 0 <= r.y and r.y + r.h <= height, f"{r} exceeds height {height}"
    area = sum(r.w * r.h for r in rects)
    assert area == width * height, f"area {area} != {width * height}"
    for a, b in combinations(rects, 2):
        assert interior_disjoint(a, b), f"{a} overlaps {b}"


def keyword_queries(records):
    """(query text, relevant ids) per vocabulary label, from first principles."""
    labels = sorted({label for r in records for label in r.labels})
    return [
        (label, {r.image_id for r in records if label in r.labels}) for label in labels
    ]


def multikeyword_queries(records):
    """(query text, relevant ids) per distinct label set; superset relevance."""
    out = {}
    for r in sorted(records, key=lambda r: r.image_id):
        if not r.labels:
            continue
        key = frozenset(r.labels)
        if key not in out:
            text = ", ".join(r.labels)
            relevant = {
                other.image_id
                for other in records
                if other.labels and set(other.labels) >= key
            }
            out[key] = (text, relevant)
    return sorted(out.values(), key=lambda item: item[0])


def caption_queries(records):
    return [
        (r.captions[0], {r.image_id}) for r in records if r.captions
    ]


def tp_at_k(ranking, relevant, k: int) -> int:
    return sum(1 for doc_id in ranking[:k] if doc_id in relevant)
