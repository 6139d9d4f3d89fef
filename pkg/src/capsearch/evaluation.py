"""Retrieval evaluation: query scenarios, P@k / R@k over a k sweep, PR-AUC.

Four scenarios are covered: single-keyword queries from the label vocabulary,
multi-keyword queries from per-image label sets (AND semantics), ground-truth
caption queries, and caption queries refined step by step with label keywords.
A dense cosine baseline over precomputed embeddings mirrors the sparse API.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

from capsearch.analysis import AnalyzerConfig, DISPLAY_ANALYZER, tokenize
from capsearch.captions import CaptionDocument
from capsearch.clipscore import Embedding, MissingEmbeddingError, cosine
from capsearch.datasets import Dataset
from capsearch.index import Bm25Params, DEFAULT_BM25, InvertedIndex, RankedResult
from capsearch.index import search as index_search


def compose_query(free_text: str, keywords: Sequence[str]) -> str:
    """Join free text and keyword feedback into one query string.

    This single composition rule is shared by the feedback scenario, the
    search service, and the browser UI.
    """
    parts = ([free_text] if free_text else []) + list(keywords)
    return ", ".join(parts)


def k_sweep(n: int) -> list[int]:
    """Powers of two from 1 up to n, with n itself as the final point."""
    if n < 1:
        raise ValueError(f"need at least one document, got {n}")
    ks = []
    k = 1
    while k <= n:
        ks.append(k)
        k *= 2
    if ks[-1] != n:
        ks.append(n)
    return ks


# -- metrics ------------------------------------------------------------------


def precision_at_k(tp_per_query: Sequence[int], k: int, n_q: int) -> float:
    """Sum of per-query true positives over n_q * k retrieved slots."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if n_q < 1:
        raise ValueError(f"n_q must be >= 1, got {n_q}")
    return sum(tp_per_query) / (n_q * k)


def recall_at_k(tp_per_query: Sequence[int], ground_truth_sizes: Sequence[int], k: int) -> float:
    """Sum of per-query true positives over the total ground-truth count."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if any(p <= 0 for p in ground_truth_sizes):
        raise ValueError("every query must have at least one ground-truth image")
    for tp, p in zip(tp_per_query, ground_truth_sizes):
        if tp > p:
            raise ValueError(f"true positives {tp} exceed ground truth {p}")
    return sum(tp_per_query) / sum(ground_truth_sizes)


def pr_auc(points: Sequence[tuple[float, float]]) -> float:
    """Trapezoidal area of precision over recall.

    Points are (recall, precision); they are sorted by recall and, when the
    curve does not start at recall 0, extended flat to (0, first precision).
    """
    if len(points) < 2:
        raise ValueError("need at least two PR points")
    pts = sorted(points, key=lambda p: p[0])
    if pts[0][0] > 0.0:
        pts.insert(0, (0.0, pts[0][1]))
    area = 0.0
    for (r0, p0), (r1, p1) in zip(pts, pts[1:]):
        area += (r1 - r0) * (p0 + p1) / 2.0
    return area


# -- retrievers ---------------------------------------------------------------


class Retriever(Protocol):
    retriever_id: str

    def search(self, query_text: str, k: int) -> RankedResult: ...


class SparseRetriever:
    """BM25 retriever over an inverted index."""

    def __init__(self, index: InvertedIndex, params: Bm25Params = DEFAULT_BM25) -> None:
        self.index = index
        self.params = params
        self.retriever_id = "sparse"

    def search(self, query_text: str, k: int) -> RankedResult:
        return index_search(self.index, query_text, k, self.params)


def dense_search(query_emb: Embedding, image_embs: Sequence[Embedding], k: int) -> RankedResult:
    """Top-k images by cosine similarity; ties break by ascending id."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    scored = [(emb.source, cosine(query_emb.vector, emb.vector)) for emb in image_embs]
    scored.sort(key=lambda item: (-item[1], item[0]))
    return RankedResult(entries=scored[:k], query_terms=[])


class DenseRetriever:
    """Cosine baseline over precomputed query-text and image embeddings."""

    def __init__(self, query_embeddings: dict[str, Embedding], image_embeddings: Sequence[Embedding]) -> None:
        self.query_embeddings = query_embeddings
        self.image_embeddings = list(image_embeddings)
        self.retriever_id = "dense"

    def search(self, query_text: str, k: int) -> RankedResult:
        try:
            query_emb = self.query_embeddings[query_text]
        except KeyError:
            raise MissingEmbeddingError(f"no precomputed embedding for query {query_text!r}") from None
        return dense_search(query_emb, self.image_embeddings, k)


# -- reports ------------------------------------------------------------------


@dataclass
class EvalReport:
    scenario: str
    retriever: str
    k_values: list[int]
    precision: list[float]
    recall: list[float]
    pr_auc: float
    n_queries: int
    per_query: dict[str, dict]
    per_category: dict[str, dict] | None = None
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "scenario": self.scenario,
            "retriever": self.retriever,
            "k": self.k_values,
            "precision": self.precision,
            "recall": self.recall,
            "pr_auc": self.pr_auc,
            "n_queries": self.n_queries,
            "per_query": self.per_query,
        }
        if self.per_category is not None:
            out["per_category"] = self.per_category
        out.update(self.extras)
        return out

    def write_pr_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "precision", "recall"])
            for k, p, r in zip(self.k_values, self.precision, self.recall):
                writer.writerow([k, f"{p:.10g}", f"{r:.10g}"])


def _evaluate_queries(
    scenario: str,
    retriever,
    queries: list[tuple[str, str, frozenset]],
    n_total: int,
    per_category: bool = False,
    record_target_rank: bool = False,
    extras: dict | None = None,
) -> EvalReport:
    """Shared sweep machinery: run each query once at k=N, prefix-count TPs."""
    ks = k_sweep(n_total)
    per_query: dict[str, dict] = {}
    tp_by_k: dict[int, list[int]] = {k: [] for k in ks}
    gt_sizes: list[int] = []
    categories: dict[str, dict] = {}

    for query_id, query_text, relevant in queries:
        ranking = retriever.search(query_text, n_total).ids()
        cumulative = []
        seen = 0
        for doc_id in ranking:
            seen += 1 if doc_id in relevant else 0
            cumulative.append(seen)
        tps = [cumulative[min(k, len(cumulative)) - 1] if cumulative else 0 for k in ks]
        per_query[query_id] = {"query": query_text, "relevant": len(relevant), "tp": tps}
        if record_target_rank:
            # single-target queries: 1-based rank, None when not retrieved
            (target,) = relevant
            rank = ranking.index(target) + 1 if target in ranking else None
            per_query[query_id]["rank"] = rank
        gt_sizes.append(len(relevant))
        for k, tp in zip(ks, tps):
            tp_by_k[k].append(tp)
        if per_category:
            categories[query_id] = {
                "k": ks,
                "precision": [tp / k for k, tp in zip(ks, tps)],
                "recall": [tp / len(relevant) for tp in tps],
            }

    n_q = len(queries)
    precision = [precision_at_k(tp_by_k[k], k, n_q) for k in ks]
    recall = [recall_at_k(tp_by_k[k], gt_sizes, k) for k in ks]
    points = list(zip(recall, precision))
    if len(points) == 1:
        # single-point sweep (one-image corpus): anchor the curve at recall 0
        points.insert(0, (0.0, points[0][1]))
    area = pr_auc(points)
    return EvalReport(
        scenario=scenario,
        retriever=retriever.retriever_id,
        k_values=ks,
        precision=precision,
        recall=recall,
        pr_auc=area,
        n_queries=n_q,
        per_query=per_query,
        per_category=categories if per_category else None,
        extras=extras or {},
    )


# -- scenarios ----------------------------------------------------------------


def run_keyword_scenario(dataset: Dataset, retriever) -> EvalReport:
    """One query per vocabulary label; relevant images carry that label."""
    if not dataset.label_vocabulary:
        raise ValueError("dataset has no labels")
    queries = []
    for label in sorted(dataset.label_vocabulary):
        relevant = frozenset(r.image_id for r in dataset.records if label in r.label_set)
        queries.append((label, label, relevant))
    return _evaluate_queries("keyword", retriever, queries, len(dataset.records), per_category=True)


def run_multikeyword_scenario(dataset: Dataset, retriever) -> EvalReport:
    """One query per distinct label set; relevant images are label supersets."""
    labeled = dataset.labeled
    if not labeled:
        raise ValueError("dataset has no labeled images")
    # first record (ascending image id) with a given set fixes the query text
    text_by_set: dict[frozenset, str] = {}
    for record in labeled:
        text_by_set.setdefault(record.label_set, ", ".join(record.labels))
    queries = []
    for label_set, text in sorted(text_by_set.items(), key=lambda item: item[1]):
        relevant = frozenset(r.image_id for r in labeled if r.label_set >= label_set)
        queries.append((text, text, relevant))
    return _evaluate_queries("multi_keyword", retriever, queries, len(dataset.records))


def run_caption_scenario(dataset: Dataset, retriever) -> EvalReport:
    """First ground-truth caption per image as a query; its image is the target."""
    queries = []
    skipped = 0
    for record in dataset.records:
        if record.captions:
            queries.append((record.image_id, record.captions[0], frozenset({record.image_id})))
        else:
            skipped += 1
    if not queries:
        raise ValueError("dataset has no captions")
    report = _evaluate_queries(
        "caption",
        retriever,
        queries,
        len(dataset.records),
        record_target_rank=True,
        extras={"skipped_no_caption": skipped},
    )
    # recall summary in the usual caption-retrieval cuts
    summary = {}
    for cut in (1, 5, 10):
        hits = sum(
            1
            for q in report.per_query.values()
            if q["rank"] is not None and q["rank"] <= cut
        )
        summary[f"r@{cut}"] = hits / report.n_queries
    report.extras["recall_summary"] = summary
    return report


@dataclass
class FeedbackStep:
    step: int
    query: str
    rank: int | None  # 1-based rank of the target image, None if not retrieved


@dataclass
class FeedbackTrace:
    steps_by_image: dict[str, list[FeedbackStep]]
    r1_per_step: list[float]

    def to_dict(self) -> dict:
        return {
            "r1_per_step": self.r1_per_step,
            "images": {
                image_id: [
                    {"step": s.step, "query": s.query, "rank": s.rank} for s in steps
                ]
                for image_id, steps in self.steps_by_image.items()
            },
        }


def run_feedback_scenario(
    dataset: Dataset, retriever, max_steps: int
) -> tuple[FeedbackTrace, EvalReport]:
    """Caption query refined by appending ground-truth labels one at a time.

    Step 0 is the bare caption; step s appends the first s labels in
    annotation order. Once an image runs out of labels its query freezes, so
    the per-step R@1 aggregate always covers the same image population.
    Returns the trace plus the PR report for the all-labels queries.
    """
    eligible = [r for r in dataset.records if r.captions and r.labels]
    if not eligible:
        raise ValueError("dataset has no records with both captions and labels")
    excluded = len(dataset.records) - len(eligible)
    n_total = len(dataset.records)

    steps_by_image: dict[str, list[FeedbackStep]] = {}
    rank_at_step: dict[str, list[int | None]] = {}
    for record in eligible:
        caption = record.captions[0]
        steps: list[FeedbackStep] = []
        ranks: list[int | None] = []
        for s in range(max_steps + 1):
            n_keywords = min(s, len(record.labels))
            query = compose_query(caption, record.labels[:n_keywords])
            if s > 0 and n_keywords < s:
                # labels exhausted: query is frozen, reuse the previous ranking
                ranks.append(ranks[-1])
                continue
            ranking = retriever.search(query, n_total).ids()
            rank = ranking.index(record.image_id) + 1 if record.image_id in ranking else None
            steps.append(FeedbackStep(step=s, query=query, rank=rank))
            ranks.append(rank)
        steps_by_image[record.image_id] = steps
        rank_at_step[record.image_id] = ranks

    r1_per_step = [
        sum(1 for ranks in rank_at_step.values() if ranks[s] == 1) / len(eligible)
        for s in range(max_steps + 1)
    ]
    trace = FeedbackTrace(steps_by_image=steps_by_image, r1_per_step=r1_per_step)

    all_label_queries = [
        (r.image_id, compose_query(r.captions[0], r.labels), frozenset({r.image_id}))
        for r in eligible
    ]
    report = _evaluate_queries(
        "feedback",
        retriever,
        all_label_queries,
        n_total,
        record_target_rank=True,
        extras={"max_steps": max_steps, "excluded": excluded, "r1_per_step": r1_per_step},
    )
    return trace, report


# -- term statistics ----------------------------------------------------------


def term_histogram(
    docs: Sequence[CaptionDocument],
    top_n: int = 15,
    config: AnalyzerConfig = DISPLAY_ANALYZER,
) -> list[tuple[str, int]]:
    """Most frequent analyzed terms across all caption documents.

    Descending by count, ties in lexicographic order. The default analyzer
    here drops stopwords but keeps words unstemmed, since the counts are for
    human reading.
    """
    counts: dict[str, int] = {}
    for doc in docs:
        for term in tokenize(doc.concatenated, config):
            counts[term] = counts.get(term, 0) + 1
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return ranked[:top_n]
