"""Command-line entry point orchestrating the retrieval pipeline end to end.

Endpoint settings resolve with precedence: flags > environment variables
(CAPSEARCH_ENDPOINT, CAPSEARCH_API_KEY, CAPSEARCH_MODEL) > config file
(plain KEY=VALUE lines).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from capsearch.analysis import AnalyzerConfig
from capsearch.captions import (
    CaptionClient,
    CaptionRequest,
    PROMPT_PRESETS,
    caption_dataset,
    load_captions,
    save_captions,
)
from capsearch.clipscore import ClipScoreConfig, JsonlEmbeddingStore, sweep_patterns
from capsearch.crops import PATTERNS, load_pattern_file
from capsearch.datasets import load_coco, load_jsonl
from capsearch.evaluation import (
    DenseRetriever,
    SparseRetriever,
    run_caption_scenario,
    run_feedback_scenario,
    run_keyword_scenario,
    run_multikeyword_scenario,
    term_histogram,
)
from capsearch.index import Bm25Params, build_index, load_index, save_index
from capsearch.index import search as index_search

log = logging.getLogger(__name__)

SCENARIOS = ("keyword", "multi_keyword", "caption", "feedback")


def _read_config_file(path: str | None) -> dict[str, str]:
    if not path:
        return {}
    values: dict[str, str] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}: expected KEY=VALUE, got {line!r}")
        key, _, value = line.partition("=")
        values[key.strip().lower()] = value.strip()
    return values


def _resolve(flag: str | None, env: str, file_values: dict[str, str], key: str) -> str | None:
    if flag:
        return flag
    if os.environ.get(env):
        return os.environ[env]
    return file_values.get(key)


def _require_file(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"{what} not found: {path}")
    return p


def _load_dataset(path: str):
    if path.endswith(".json"):
        return load_coco(path)
    return load_jsonl(path)


def _write_json(obj: dict, path: str) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _pattern_registry(patterns_file: str | None) -> dict:
    registry = dict(PATTERNS)
    if patterns_file:
        registry.update(load_pattern_file(_require_file(patterns_file, "patterns file")))
    return registry


def _lookup_pattern(registry: dict, name: str):
    try:
        return registry[name]
    except KeyError:
        raise ValueError(f"unknown crop pattern: {name!r} (known: {sorted(registry)})") from None


# -- subcommands --------------------------------------------------------------


def cmd_caption(args: argparse.Namespace) -> int:
    dataset = _load_dataset(str(_require_file(args.dataset, "dataset")))
    pattern = _lookup_pattern(_pattern_registry(args.patterns_file), args.pattern)
    file_values = _read_config_file(args.config)
    endpoint = _resolve(args.endpoint, "CAPSEARCH_ENDPOINT", file_values, "endpoint")
    model = _resolve(args.model, "CAPSEARCH_MODEL", file_values, "model")
    api_key = _resolve(args.api_key, "CAPSEARCH_API_KEY", file_values, "api_key")
    if not endpoint or not model:
        raise ValueError("captioning requires --endpoint and --model (or env/config)")
    template = CaptionRequest(
        endpoint=endpoint,
        model=model,
        prompt=PROMPT_PRESETS[args.prompt_preset],
        max_tokens=args.max_tokens,
        temperature=args.temperature,
        api_key=api_key,
    )
    client = CaptionClient(cache_dir=args.cache_dir)
    run = caption_dataset(
        dataset, pattern, template, client, images_root=args.images_root, jobs=args.jobs
    )
    save_captions(run.documents, args.out)
    print(f"captioned {len(run.documents)} images -> {args.out}")
    if run.failures:
        quarantine = f"{args.out}.failures.json"
        _write_json({"failures": [{"image_id": i, "error": e} for i, e in run.failures]}, quarantine)
        print(f"error: {len(run.failures)} images failed, see {quarantine}", file=sys.stderr)
        return 1
    return 0


def cmd_index(args: argparse.Namespace) -> int:
    docs = load_captions(_require_file(args.captions, "captions file"))
    analyzer = AnalyzerConfig(
        lowercase=not args.no_lowercase,
        stemming=not args.no_stem,
        stopwords=args.stopwords,
    )
    index = build_index(docs, analyzer)
    save_index(index, args.out)
    print(f"indexed {index.n_docs} documents, {index.n_terms} terms -> {args.out}")
    return 0


def cmd_search(args: argparse.Namespace) -> int:
    index = load_index(_require_file(args.index, "index file"))
    params = Bm25Params(k1=args.k1, b=args.b)
    result = index_search(index, args.query, args.k, params)
    print(f"query terms: {' '.join(result.query_terms) or '(empty)'}")
    for rank, (doc_id, score) in enumerate(result.entries, start=1):
        print(f"{rank:4d}  {score:10.4f}  {doc_id}")
    if not result.entries:
        print("(no hits)")
    return 0


def _make_retriever(args: argparse.Namespace):
    if args.retriever == "sparse":
        if not args.index:
            raise ValueError("--index is required for the sparse retriever")
        index = load_index(_require_file(args.index, "index file"))
        return SparseRetriever(index, Bm25Params(k1=args.k1, b=args.b))
    if not args.embeddings:
        raise ValueError("--embeddings is required for the dense retriever")
    store = JsonlEmbeddingStore.from_path(_require_file(args.embeddings, "embeddings file"))
    return DenseRetriever(store.text_embeddings(), store.image_embeddings(crop_j=0))


def cmd_eval(args: argparse.Namespace) -> int:
    dataset = _load_dataset(str(_require_file(args.dataset, "dataset")))
    retriever = _make_retriever(args)
    if args.scenario == "keyword":
        report = run_keyword_scenario(dataset, retriever)
    elif args.scenario == "multi_keyword":
        report = run_multikeyword_scenario(dataset, retriever)
    elif args.scenario == "caption":
        report = run_caption_scenario(dataset, retriever)
    else:
        trace, report = run_feedback_scenario(dataset, retriever, args.max_steps)
        report.extras["trace"] = trace.to_dict()
    _write_json(report.to_dict(), args.out)
    if args.csv:
        report.write_pr_csv(args.csv)
    print(
        f"{args.scenario}: {report.n_queries} queries, PR-AUC {report.pr_auc:.4f} -> {args.out}"
    )
    return 0


def cmd_clipscore(args: argparse.Namespace) -> int:
    dataset = _load_dataset(str(_require_file(args.dataset, "dataset")))
    store = JsonlEmbeddingStore.from_path(_require_file(args.embeddings, "embeddings file"))
    texts = [
        line.strip()
        for line in _require_file(args.texts, "texts file").read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    registry = _pattern_registry(args.patterns_file)
    patterns = [_lookup_pattern(registry, name) for name in args.patterns.split(",")]
    sweep = sweep_patterns(
        dataset, patterns, texts, store, ClipScoreConfig(w=args.w), epsilon=args.epsilon
    )
    _write_json(sweep.to_dict(), args.out)
    if args.per_image:
        # per-image averaged scores, descending, one column per pattern
        import csv

        with open(args.per_image, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["pattern", "rank", "image_id", "averaged_score"])
            for entry in sweep.entries:
                for rank, (image_id, score) in enumerate(entry.per_image, start=1):
                    writer.writerow([entry.pattern, rank, image_id, f"{score:.10g}"])
    for entry in sweep.entries:
        marker = " <- selected" if entry.pattern == sweep.selected else ""
        print(f"{entry.pattern:10s} {entry.images_per_original:4d} images/original "
              f"score {entry.averaged_score:.4f}{marker}")
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    docs = load_captions(_require_file(args.captions, "captions file"))
    for term, count in term_histogram(docs, top_n=args.top):
        print(f"{count:8d}  {term}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from capsearch.service import ServiceConfig, create_app

    _require_file(args.index, "index file")
    config = ServiceConfig(
        index_path=args.index,
        captions_path=args.captions,
        dataset_path=args.dataset,
        image_dir=args.images,
        cors_origins=args.cors.split(",") if args.cors else [],
        admin_token=args.admin_token or os.environ.get("CAPSEARCH_ADMIN_TOKEN"),
    )
    app = create_app(config)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="capsearch", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("caption", help="caption a dataset via an M-LLM endpoint")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--pattern", default="crops17", help="none | crops17 | crops40 | custom name")
    p.add_argument("--patterns-file", default=None, help="JSON file of custom grid-spec patterns")
    p.add_argument("--images-root", default=None)
    p.add_argument("--cache-dir", default=None)
    p.add_argument("--endpoint", default=None)
    p.add_argument("--model", default=None)
    p.add_argument("--api-key", default=None)
    p.add_argument("--config", default=None, help="KEY=VALUE config file")
    p.add_argument("--prompt-preset", default="captions", choices=sorted(PROMPT_PRESETS))
    p.add_argument("--max-tokens", type=int, default=512)
    p.add_argument("--temperature", type=float, default=0.0)
    p.add_argument("--jobs", type=int, default=4)
    p.set_defaults(func=cmd_caption)

    p = sub.add_parser("index", help="build an inverted index from a captions file")
    p.add_argument("--captions", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-stem", action="store_true")
    p.add_argument("--no-lowercase", action="store_true")
    p.add_argument("--stopwords", default="english", choices=("english", "none"))
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("search", help="query an index from the command line")
    p.add_argument("--index", required=True)
    p.add_argument("--query", required=True)
    p.add_argument("-k", type=int, default=10)
    p.add_argument("--k1", type=float, default=0.9)
    p.add_argument("--b", type=float, default=0.4)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("eval", help="run a retrieval evaluation scenario")
    p.add_argument("--scenario", required=True, choices=SCENARIOS)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--csv", default=None, help="also write PR points as CSV")
    p.add_argument("--retriever", default="sparse", choices=("sparse", "dense"))
    p.add_argument("--index", default=None)
    p.add_argument("--embeddings", default=None, help="embeddings JSONL for the dense baseline")
    p.add_argument("--k1", type=float, default=0.9)
    p.add_argument("--b", type=float, default=0.4)
    p.add_argument("--max-steps", type=int, default=5)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("clipscore", help="crop-pattern sweep of averaged image-text scores")
    p.add_argument("--dataset", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--texts", required=True, help="one text per line")
    p.add_argument("--patterns", default="none,crops17,crops40")
    p.add_argument("--patterns-file", default=None, help="JSON file of custom grid-spec patterns")
    p.add_argument("--out", required=True)
    p.add_argument("--per-image", default=None, help="also write per-image scores (descending) as CSV")
    p.add_argument("--epsilon", type=float, default=0.001)
    p.add_argument("--w", type=float, default=2.5)
    p.set_defaults(func=cmd_clipscore)

    p = sub.add_parser("stats", help="term histogram over a captions file")
    p.add_argument("--captions", required=True)
    p.add_argument("--top", type=int, default=15)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("serve", help="run the HTTP search service")
    p.add_argument("--index", required=True)
    p.add_argument("--captions", default=None)
    p.add_argument("--dataset", default=None)
    p.add_argument("--images", default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--cors", default=None, help="comma-separated allowed origins")
    p.add_argument("--admin-token", default=None)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - single reporting point for the CLI
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
