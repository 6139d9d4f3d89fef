"""HTTP search service over a loaded index, for the browser UI and scripts.

The served index is an immutable snapshot; reload builds a complete new
snapshot and swaps it in a single reference assignment, so no request ever
sees a partially loaded index.
"""

from __future__ import annotations

import logging
import re
import threading
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import FileResponse
from pydantic import BaseModel

from capsearch.analysis import tokenize
from capsearch.captions import CaptionDocument, load_captions
from capsearch.datasets import load_jsonl
from capsearch.evaluation import compose_query
from capsearch.index import IndexFileError, InvertedIndex, load_index
from capsearch.index import search as index_search

log = logging.getLogger(__name__)

_SENTENCE_RE = re.compile(r"(?<=[.!?])\s+")


@dataclass
class ServiceConfig:
    index_path: str | None = None
    captions_path: str | None = None
    dataset_path: str | None = None
    image_dir: str | None = None
    cors_origins: list[str] = field(default_factory=list)
    admin_token: str | None = None


@dataclass
class IndexSnapshot:
    index: InvertedIndex
    captions: dict[str, CaptionDocument]
    labels: dict[str, tuple[str, ...]]
    image_paths: dict[str, str]
    image_dir: str | None


def load_snapshot(config: ServiceConfig) -> IndexSnapshot:
    if not config.index_path:
        raise ValueError("no index path configured")
    index = load_index(config.index_path)
    captions: dict[str, CaptionDocument] = {}
    if config.captions_path:
        captions = {d.image_id: d for d in load_captions(config.captions_path)}
    labels: dict[str, tuple[str, ...]] = {}
    image_paths: dict[str, str] = {}
    if config.dataset_path:
        dataset = load_jsonl(config.dataset_path)
        labels = {r.image_id: r.labels for r in dataset.records}
        image_paths = {r.image_id: r.path for r in dataset.records if r.path}
    return IndexSnapshot(
        index=index,
        captions=captions,
        labels=labels,
        image_paths=image_paths,
        image_dir=config.image_dir,
    )


class SearchBody(BaseModel):
    keywords: list[str] = []
    free_text: str = ""
    k: int = 20


class ReloadBody(BaseModel):
    index_path: str | None = None
    captions_path: str | None = None
    dataset_path: str | None = None


def _first_matching_snippet(doc: CaptionDocument, matched: set[str], index: InvertedIndex) -> str:
    for source in doc.sources:
        for sentence in _SENTENCE_RE.split(source.text):
            if not sentence.strip():
                continue
            if matched.intersection(tokenize(sentence, index.analyzer)):
                return sentence.strip()
    return ""


def _resolve_image_file(snapshot: IndexSnapshot, image_id: str) -> Path | None:
    if snapshot.image_dir is None:
        return None
    root = Path(snapshot.image_dir).resolve()
    candidates = []
    mapped = snapshot.image_paths.get(image_id)
    if mapped:
        candidates.append(mapped)
    candidates.extend([image_id, f"{image_id}.png", f"{image_id}.jpg", f"{image_id}.jpeg"])
    for cand in candidates:
        path = (root / cand).resolve()
        if root in path.parents or path == root:
            if path.is_file():
                return path
    return None


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    app = FastAPI(title="capsearch")
    if config.cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=config.cors_origins,
            allow_methods=["*"],
            allow_headers=["*"],
        )

    app.state.config = config
    app.state.snapshot = None
    app.state.reload_lock = threading.Lock()
    if config.index_path:
        app.state.snapshot = load_snapshot(config)

    def current_snapshot() -> IndexSnapshot:
        snapshot = app.state.snapshot
        if snapshot is None:
            raise HTTPException(status_code=503, detail="no index loaded")
        return snapshot

    @app.post("/v1/search")
    def handle_search(body: SearchBody) -> dict:
        snapshot = current_snapshot()
        if body.k < 1:
            raise HTTPException(status_code=400, detail=f"k must be >= 1, got {body.k}")
        effective = compose_query(body.free_text, body.keywords)
        if not effective:
            raise HTTPException(status_code=400, detail="empty query")
        index = snapshot.index
        full = index_search(index, effective, max(body.k, index.n_docs))
        results = []
        for image_id, score in full.entries[: body.k]:
            internal = index.internal_id(image_id)
            matched = []
            seen: set[str] = set()
            for term in full.query_terms:
                if term not in seen and index.term_freq(term, internal) > 0:
                    seen.add(term)
                    matched.append(term)
            doc = snapshot.captions.get(image_id)
            snippet = _first_matching_snippet(doc, set(matched), index) if doc else ""
            results.append(
                {
                    "image_id": image_id,
                    "score": score,
                    "matched_terms": matched,
                    "caption_snippet": snippet,
                }
            )
        return {
            "results": results,
            "total_candidates": len(full.entries),
            "query_echo": {
                "free_text": body.free_text,
                "keywords": body.keywords,
                "k": body.k,
                "effective_query": effective,
            },
        }

    @app.get("/v1/images/{image_id}/meta")
    def handle_image_meta(image_id: str) -> dict:
        snapshot = current_snapshot()
        try:
            snapshot.index.internal_id(image_id)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown image id {image_id!r}") from None
        doc = snapshot.captions.get(image_id)
        return {
            "image_id": image_id,
            "labels": list(snapshot.labels.get(image_id, ())),
            "captions": [
                {
                    "j": s.j,
                    "rect": None if s.rect is None else [s.rect.x, s.rect.y, s.rect.w, s.rect.h],
                    "text": s.text,
                }
                for s in (doc.sources if doc else ())
            ],
            "concatenated": doc.concatenated if doc else "",
        }

    @app.get("/v1/images/{image_id}/file")
    def handle_image_file(image_id: str):
        snapshot = current_snapshot()
        path = _resolve_image_file(snapshot, image_id)
        if path is None:
            raise HTTPException(status_code=404, detail=f"no image file for {image_id!r}")
        return FileResponse(path)

    @app.get("/v1/stats")
    def handle_stats() -> dict:
        snapshot = current_snapshot()
        index = snapshot.index
        return {
            "n_docs": index.n_docs,
            "n_terms": index.n_terms,
            "avgdl": index.avgdl,
            "analyzer": index.analyzer.to_dict(),
        }

    @app.post("/v1/admin/reload")
    def handle_reload(body: ReloadBody, request: Request) -> dict:
        token = config.admin_token
        if token and request.headers.get("x-admin-token") != token:
            raise HTTPException(status_code=403, detail="bad admin token")
        if not app.state.reload_lock.acquire(blocking=False):
            raise HTTPException(status_code=409, detail="reload already in progress")
        try:
            new_config = ServiceConfig(
                index_path=body.index_path or config.index_path,
                captions_path=body.captions_path or config.captions_path,
                dataset_path=body.dataset_path or config.dataset_path,
                image_dir=config.image_dir,
                cors_origins=config.cors_origins,
                admin_token=config.admin_token,
            )
            snapshot = load_snapshot(new_config)
            config.index_path = new_config.index_path
            config.captions_path = new_config.captions_path
            config.dataset_path = new_config.dataset_path
            app.state.snapshot = snapshot
            log.info("reloaded index from %s (%d docs)", new_config.index_path, snapshot.index.n_docs)
            return {"status": "ok", "n_docs": snapshot.index.n_docs}
        except (OSError, ValueError, IndexFileError) as exc:
            raise HTTPException(status_code=400, detail=f"reload failed: {exc}") from exc
        finally:
            app.state.reload_lock.release()

    return app
