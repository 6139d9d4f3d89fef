"""Image-text relevance scoring over precomputed embeddings.

Score of a pair is w * max(cos, 0); per-image and corpus-level averages follow,
and a crop-pattern sweep locates the point where adding more crops stops
improving the averaged score. Embedding vectors are inputs (JSONL files or an
HTTP endpoint); no encoder runs in-process.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import numpy as np

from capsearch.crops import CropPattern
from capsearch.datasets import Dataset


class MissingEmbeddingError(KeyError):
    pass


@dataclass(frozen=True)
class Embedding:
    vector: np.ndarray
    source: str = ""

    def __post_init__(self) -> None:
        vec = np.asarray(self.vector, dtype=np.float64)
        object.__setattr__(self, "vector", vec)
        if vec.ndim != 1 or vec.size == 0:
            raise ValueError(f"embedding {self.source!r} must be a nonempty 1-d vector")
        if not np.all(np.isfinite(vec)):
            raise ValueError(f"embedding {self.source!r} has non-finite entries")
        if np.linalg.norm(vec) == 0.0:
            raise ValueError(f"embedding {self.source!r} has zero norm")


@dataclass(frozen=True)
class ClipScoreConfig:
    w: float = 2.5


DEFAULT_CLIPSCORE = ClipScoreConfig()


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine undefined for zero-norm vector")
    return float(np.dot(u, v)) / (nu * nv)


def clip_score(e_i: Embedding, e_t: Embedding, cfg: ClipScoreConfig = DEFAULT_CLIPSCORE) -> float:
    """w * max(cos(image, text), 0)."""
    return cfg.w * max(cosine(e_i.vector, e_t.vector), 0.0)


def averaged_clipscore_each(
    image_embs: Sequence[Embedding],
    text_embs: Sequence[Embedding],
    cfg: ClipScoreConfig = DEFAULT_CLIPSCORE,
) -> float:
    """Mean pair score for one image: originals+crops (j) against all texts (k).

    Summation runs in fixed (j, k) order so results are bit-stable.
    """
    if not image_embs or not text_embs:
        raise ValueError("image and text embedding lists must be nonempty")
    total = 0.0
    for img in image_embs:
        for txt in text_embs:
            total += clip_score(img, txt, cfg)
    return total / (len(image_embs) * len(text_embs))


def averaged_clipscore_all(per_image: Sequence[float]) -> float:
    """Mean of per-image averaged scores across the dataset."""
    if not per_image:
        raise ValueError("per-image score list must be nonempty")
    return sum(per_image) / len(per_image)


class EmbeddingSource(Protocol):
    def image_embedding(self, image_id: str, crop_j: int) -> Embedding: ...

    def text_embedding(self, text: str) -> Embedding: ...


class JsonlEmbeddingStore:
    """Embeddings from JSONL lines {id, kind: "image"|"text", crop_j?, vector}."""

    def __init__(self) -> None:
        self._images: dict[tuple[str, int], Embedding] = {}
        self._texts: dict[str, Embedding] = {}

    @classmethod
    def from_path(cls, path: str | Path) -> "JsonlEmbeddingStore":
        store = cls()
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                    kind = obj["kind"]
                    vector = np.asarray(obj["vector"], dtype=np.float64)
                    if kind == "image":
                        key = (str(obj["id"]), int(obj.get("crop_j", 0)))
                        store._images[key] = Embedding(vector, source=f"{key[0]}#{key[1]}")
                    elif kind == "text":
                        text = str(obj["id"])
                        store._texts[text] = Embedding(vector, source=text)
                    else:
                        raise ValueError(f"unknown kind {kind!r}")
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise ValueError(f"{path}:{lineno}: malformed embedding record: {exc}") from exc
        return store

    def add_image(self, image_id: str, crop_j: int, vector) -> None:
        self._images[(image_id, crop_j)] = Embedding(np.asarray(vector, dtype=np.float64), source=f"{image_id}#{crop_j}")

    def add_text(self, text: str, vector) -> None:
        self._texts[text] = Embedding(np.asarray(vector, dtype=np.float64), source=text)

    def image_embedding(self, image_id: str, crop_j: int) -> Embedding:
        try:
            return self._images[(image_id, crop_j)]
        except KeyError:
            raise MissingEmbeddingError(f"no embedding for image {image_id!r} crop {crop_j}") from None

    def text_embedding(self, text: str) -> Embedding:
        try:
            return self._texts[text]
        except KeyError:
            raise MissingEmbeddingError(f"no embedding for text {text!r}") from None

    def image_embeddings(self, crop_j: int = 0) -> list[Embedding]:
        """Embeddings of one crop index for every image, ascending by image id."""
        picked = [(i, emb) for (i, j), emb in self._images.items() if j == crop_j]
        return [Embedding(emb.vector, source=i) for i, emb in sorted(picked)]

    def text_embeddings(self) -> dict[str, Embedding]:
        return dict(self._texts)


class HttpEmbeddingStore:
    """Fetch embeddings from an HTTP endpoint on demand, memoizing responses.

    The endpoint receives {"kind", "id", "crop_j"?|"text"?} and must answer
    {"vector": [...]}.
    """

    def __init__(self, endpoint: str, http=None, cache_path: str | Path | None = None) -> None:
        import httpx

        self.endpoint = endpoint
        self._http = http or httpx.Client(timeout=60.0)
        self._cache = JsonlEmbeddingStore()
        self._cache_path = Path(cache_path) if cache_path else None
        if self._cache_path and self._cache_path.exists():
            self._cache = JsonlEmbeddingStore.from_path(self._cache_path)

    def _persist(self, obj: dict) -> None:
        if self._cache_path is None:
            return
        with open(self._cache_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(obj, sort_keys=True) + "\n")

    def image_embedding(self, image_id: str, crop_j: int) -> Embedding:
        try:
            return self._cache.image_embedding(image_id, crop_j)
        except MissingEmbeddingError:
            pass
        response = self._http.post(
            self.endpoint, json={"kind": "image", "id": image_id, "crop_j": crop_j}
        )
        response.raise_for_status()
        vector = response.json()["vector"]
        self._cache.add_image(image_id, crop_j, vector)
        self._persist({"kind": "image", "id": image_id, "crop_j": crop_j, "vector": vector})
        return self._cache.image_embedding(image_id, crop_j)

    def text_embedding(self, text: str) -> Embedding:
        try:
            return self._cache.text_embedding(text)
        except MissingEmbeddingError:
            pass
        response = self._http.post(self.endpoint, json={"kind": "text", "id": text})
        response.raise_for_status()
        vector = response.json()["vector"]
        self._cache.add_text(text, vector)
        self._persist({"kind": "text", "id": text, "vector": vector})
        return self._cache.text_embedding(text)


@dataclass
class SweepEntry:
    pattern: str
    images_per_original: int
    averaged_score: float
    per_image: list[tuple[str, float]]  # descending score, ties by image id


@dataclass
class CropScoreSweep:
    entries: list[SweepEntry]
    selected: str

    def to_dict(self) -> dict:
        return {
            "selected": self.selected,
            "entries": [
                {
                    "pattern": e.pattern,
                    "images_per_original": e.images_per_original,
                    "averaged_score": e.averaged_score,
                }
                for e in self.entries
            ],
        }


def sweep_patterns(
    dataset: Dataset,
    patterns: Iterable[CropPattern],
    texts: Sequence[str],
    embeddings: EmbeddingSource,
    cfg: ClipScoreConfig = DEFAULT_CLIPSCORE,
    epsilon: float = 0.001,
) -> CropScoreSweep:
    """Average scores per crop pattern and pick the saturation point.

    The selected pattern is the smallest one whose successor improves the
    averaged score by less than ``epsilon``; if every successive gain is at
    least ``epsilon``, the largest pattern wins.
    """
    patterns = list(patterns)
    if not patterns:
        raise ValueError("at least one crop pattern is required")
    if not texts:
        raise ValueError("at least one text is required")
    text_embs = [embeddings.text_embedding(t) for t in texts]

    entries: list[SweepEntry] = []
    for pattern in patterns:
        n_images = pattern.count() + 1
        per_image: list[tuple[str, float]] = []
        for record in dataset.records:
            image_embs = [
                embeddings.image_embedding(record.image_id, j) for j in range(n_images)
            ]
            per_image.append(
                (record.image_id, averaged_clipscore_each(image_embs, text_embs, cfg))
            )
        score = averaged_clipscore_all([s for _, s in per_image])
        per_image.sort(key=lambda item: (-item[1], item[0]))
        entries.append(SweepEntry(pattern.name, n_images, score, per_image))

    entries.sort(key=lambda e: e.images_per_original)
    selected = entries[-1].pattern
    for current, successor in zip(entries, entries[1:]):
        if successor.averaged_score - current.averaged_score < epsilon:
            selected = current.pattern
            break
    return CropScoreSweep(entries=entries, selected=selected)
