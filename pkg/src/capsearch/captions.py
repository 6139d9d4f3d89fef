"""Caption acquisition from an external multi-modal LLM endpoint.

Everything nondeterministic lives here: responses are cached on disk keyed by
(image content hash, crop rect, prompt, model), so a finished run is frozen
and the downstream pipeline (index, eval) is fully deterministic.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from io import BytesIO
from pathlib import Path
from typing import Callable, Iterable

import httpx
from PIL import Image

from capsearch.crops import CropPattern, CropRect, crop_image, generate_crops
from capsearch.datasets import Dataset

log = logging.getLogger(__name__)

DEFAULT_PROMPT = "Please generate multiple captions to describe the features of this image."

PROMPT_PRESETS = {
    "captions": DEFAULT_PROMPT,
    "tags_and_captions": "Please describe the characteristics of this image with tags and captions.",
    "additional_captions": (
        "If there are any additional features of this image that are not expressed "
        "in the generated captions, please generate additional captions to explain them."
    ),
}


class CaptionError(Exception):
    pass


class CaptionTransportError(CaptionError):
    """Endpoint unreachable or persistently failing after bounded retries."""


class CaptionEmptyError(CaptionError):
    """Model returned an empty response; the image should be re-run."""


@dataclass(frozen=True)
class CaptionRequest:
    """One captioning call: image payload plus endpoint and generation params."""

    endpoint: str
    model: str
    image: bytes = b""
    mime: str = "image/png"
    prompt: str = DEFAULT_PROMPT
    max_tokens: int = 512
    temperature: float = 0.0
    api_key: str | None = None


@dataclass(frozen=True)
class CaptionSource:
    """Caption text for crop index j; j=0 is the original full frame."""

    j: int
    rect: CropRect | None
    text: str


@dataclass(frozen=True)
class CaptionDocument:
    """All caption text generated for one image; the unit of indexing."""

    image_id: str
    pattern: str
    sources: tuple[CaptionSource, ...]

    def __post_init__(self) -> None:
        js = [s.j for s in self.sources]
        if js != sorted(set(js)):
            raise ValueError(f"{self.image_id}: caption sources must have unique ascending j")

    @property
    def concatenated(self) -> str:
        return " ".join(s.text for s in self.sources)


def cache_key(image_hash: str, rect: CropRect | None, prompt: str, model: str) -> str:
    rect_part = "full" if rect is None else f"{rect.x},{rect.y},{rect.w},{rect.h}"
    raw = "\x00".join((image_hash, rect_part, prompt, model))
    return hashlib.sha256(raw.encode("utf-8")).hexdigest()


class CaptionClient:
    """HTTP client for an OpenAI-compatible chat-completions endpoint.

    Transient failures (transport errors, 429, 5xx) are retried with
    exponential backoff, at most ``max_attempts`` tries per request.
    """

    def __init__(
        self,
        cache_dir: str | Path | None = None,
        http: httpx.Client | None = None,
        max_attempts: int = 4,
        backoff_base: float = 0.5,
        sleep: Callable[[float], None] = time.sleep,
        timeout: float = 120.0,
    ) -> None:
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self._http = http or httpx.Client(timeout=timeout)
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self._sleep = sleep

    def _cache_path(self, key: str) -> Path | None:
        if self.cache_dir is None:
            return None
        return self.cache_dir / key[:2] / f"{key}.json"

    def cache_get(self, key: str) -> str | None:
        path = self._cache_path(key)
        if path is None or not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))["text"]

    def cache_put(self, key: str, text: str) -> None:
        path = self._cache_path(key)
        if path is None:
            return
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps({"text": text}, ensure_ascii=False), encoding="utf-8")
        tmp.replace(path)

    def _post_once(self, req: CaptionRequest) -> str:
        b64 = base64.b64encode(req.image).decode("ascii")
        payload = {
            "model": req.model,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
            "messages": [
                {
                    "role": "user",
                    "content": [
                        {"type": "text", "text": req.prompt},
                        {"type": "image_url", "image_url": {"url": f"data:{req.mime};base64,{b64}"}},
                    ],
                }
            ],
        }
        headers = {}
        if req.api_key:
            headers["Authorization"] = f"Bearer {req.api_key}"
        response = self._http.post(req.endpoint, json=payload, headers=headers)
        if response.status_code in (429,) or response.status_code >= 500:
            raise httpx.HTTPStatusError(
                f"retryable status {response.status_code}", request=response.request, response=response
            )
        response.raise_for_status()
        data = response.json()
        return str(data["choices"][0]["message"]["content"])

    def request_captions(self, req: CaptionRequest, key: str | None = None) -> str:
        """Raw model text for one image payload; cache hit makes no network call."""
        if key is None:
            key = cache_key(hashlib.sha256(req.image).hexdigest(), None, req.prompt, req.model)
        cached = self.cache_get(key)
        if cached is not None:
            return cached

        last_error: Exception | None = None
        for attempt in range(self.max_attempts):
            try:
                text = self._post_once(req)
                break
            except (httpx.TransportError, httpx.HTTPStatusError) as exc:
                status = getattr(getattr(exc, "response", None), "status_code", None)
                retryable = isinstance(exc, httpx.TransportError) or status == 429 or (
                    status is not None and status >= 500
                )
                if not retryable:
                    raise CaptionTransportError(f"caption request rejected: {exc}") from exc
                last_error = exc
                if attempt + 1 < self.max_attempts:
                    self._sleep(self.backoff_base * (2**attempt))
        else:
            raise CaptionTransportError(
                f"caption request failed after {self.max_attempts} attempts: {last_error}"
            ) from last_error

        if not text.strip():
            raise CaptionEmptyError("model returned an empty caption response")
        self.cache_put(key, text)
        return text


def _load_image(path: Path) -> tuple[Image.Image, bytes, str]:
    raw = path.read_bytes()
    image = Image.open(BytesIO(raw))
    image.load()
    mime = "image/jpeg" if path.suffix.lower() in (".jpg", ".jpeg") else "image/png"
    return image, raw, mime


def _encode_png(image: Image.Image) -> bytes:
    buf = BytesIO()
    image.save(buf, format="PNG")
    return buf.getvalue()


def caption_image(
    client: CaptionClient,
    template: CaptionRequest,
    image_path: Path,
    pattern: CropPattern,
    image_id: str,
) -> CaptionDocument:
    """Caption the original image plus every crop of ``pattern``."""
    image, raw, mime = _load_image(image_path)
    image_hash = hashlib.sha256(raw).hexdigest()

    sources: list[CaptionSource] = []
    original_key = cache_key(image_hash, None, template.prompt, template.model)
    text = client.request_captions(replace(template, image=raw, mime=mime), key=original_key)
    sources.append(CaptionSource(j=0, rect=None, text=text))

    for j, rect in enumerate(generate_crops(image.width, image.height, pattern), start=1):
        key = cache_key(image_hash, rect, template.prompt, template.model)
        cropped = _encode_png(crop_image(image, rect))
        text = client.request_captions(replace(template, image=cropped, mime="image/png"), key=key)
        sources.append(CaptionSource(j=j, rect=rect, text=text))
    return CaptionDocument(image_id=image_id, pattern=pattern.name, sources=tuple(sources))


@dataclass
class CaptionRun:
    documents: list[CaptionDocument]
    failures: list[tuple[str, str]]


def caption_dataset(
    dataset: Dataset,
    pattern: CropPattern,
    template: CaptionRequest,
    client: CaptionClient,
    images_root: str | Path | None = None,
    jobs: int = 4,
) -> CaptionRun:
    """Caption every dataset image; per-image failures are quarantined.

    Re-running a completed dataset is a no-op on the network thanks to the
    response cache, so interrupted runs can simply be restarted.
    """
    root = Path(images_root) if images_root else None

    def work(record) -> CaptionDocument:
        path = (root / record.path) if root else Path(record.path)
        return caption_image(client, template, path, pattern, record.image_id)

    documents: dict[str, CaptionDocument] = {}
    failures: list[tuple[str, str]] = []
    records = sorted(dataset.records, key=lambda r: r.image_id)
    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        for record, outcome in zip(records, pool.map(lambda r: _guard(work, r), records)):
            if isinstance(outcome, CaptionDocument):
                documents[record.image_id] = outcome
                log.info("captioned %s (%d sources)", record.image_id, len(outcome.sources))
            else:
                failures.append((record.image_id, outcome))
                log.warning("caption failed for %s: %s", record.image_id, outcome)
    if failures:
        log.warning("caption run finished with %d failures", len(failures))
    return CaptionRun(
        documents=[documents[i] for i in sorted(documents)],
        failures=failures,
    )


def _guard(fn, record):
    try:
        return fn(record)
    except (CaptionError, OSError, ValueError) as exc:
        return f"{type(exc).__name__}: {exc}"


# -- captions file (JSONL) ----------------------------------------------------


def save_captions(docs: Iterable[CaptionDocument], path: str | Path) -> None:
    """One JSON object per image; deterministic serialization."""
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            obj = {
                "image_id": doc.image_id,
                "pattern": doc.pattern,
                "captions": [
                    {
                        "j": s.j,
                        "rect": None if s.rect is None else [s.rect.x, s.rect.y, s.rect.w, s.rect.h],
                        "text": s.text,
                    }
                    for s in doc.sources
                ],
            }
            fh.write(json.dumps(obj, sort_keys=True, ensure_ascii=False) + "\n")


def load_captions(path: str | Path) -> list[CaptionDocument]:
    """Lossless inverse of save_captions; malformed lines name their line number."""
    docs: list[CaptionDocument] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                sources = tuple(
                    CaptionSource(
                        j=int(c["j"]),
                        rect=None if c.get("rect") is None else CropRect(*map(int, c["rect"])),
                        text=str(c["text"]),
                    )
                    for c in obj["captions"]
                )
                docs.append(
                    CaptionDocument(
                        image_id=str(obj["image_id"]),
                        pattern=str(obj.get("pattern", "none")),
                        sources=sources,
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed caption record: {exc}") from exc
    return docs
