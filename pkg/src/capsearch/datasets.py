"""Evaluation dataset loaders: generic JSONL records and COCO annotation JSON."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ImageRecord:
    """One dataset image with its ground-truth labels and captions.

    Labels are deduplicated but keep their first-occurrence annotation order,
    which multi-keyword and feedback query construction depend on.
    """

    image_id: str
    path: str
    labels: tuple[str, ...] = ()
    captions: tuple[str, ...] = ()

    @property
    def label_set(self) -> frozenset[str]:
        return frozenset(self.labels)


@dataclass
class Dataset:
    records: list[ImageRecord]
    label_vocabulary: frozenset[str] = field(init=False)

    def __post_init__(self) -> None:
        self.label_vocabulary = frozenset(l for r in self.records for l in r.labels)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def labeled(self) -> list[ImageRecord]:
        return [r for r in self.records if r.labels]

    @property
    def unlabeled_ids(self) -> list[str]:
        return [r.image_id for r in self.records if not r.labels]


def _dedup_keep_order(items) -> tuple[str, ...]:
    seen: set[str] = set()
    out: list[str] = []
    for item in items:
        if item not in seen:
            seen.add(item)
            out.append(item)
    return tuple(out)


def _finish(records: dict[str, ImageRecord], source: str) -> Dataset:
    dataset = Dataset(records=[records[i] for i in sorted(records)])
    log.info(
        "%s: %d images, %d labeled, %d label types",
        source, len(dataset), len(dataset.labeled), len(dataset.label_vocabulary),
    )
    return dataset


def load_jsonl(path: str | Path) -> Dataset:
    """Load records from JSONL lines {image_id, path, labels, captions}."""
    records: dict[str, ImageRecord] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                image_id = str(obj["image_id"])
                record = ImageRecord(
                    image_id=image_id,
                    path=str(obj.get("path", "")),
                    labels=_dedup_keep_order(str(l) for l in obj.get("labels", [])),
                    captions=tuple(str(c) for c in obj.get("captions", [])),
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed dataset record: {exc}") from exc
            if image_id in records:
                raise ValueError(f"{path}:{lineno}: duplicate image_id {image_id!r}")
            records[image_id] = record
    return _finish(records, str(path))


def load_coco(instances_json: str | Path, captions_json: str | Path | None = None) -> Dataset:
    """Load a COCO-format instances file, optionally joined with its captions file.

    Labels are the category names of each image's annotations, deduplicated in
    annotation order. Images without annotations are retained unlabeled.
    """
    with open(instances_json, encoding="utf-8") as fh:
        instances = json.load(fh)
    categories = {c["id"]: str(c["name"]) for c in instances.get("categories", [])}

    labels_by_image: dict[str, list[str]] = {}
    for ann in instances.get("annotations", []):
        image_id = str(ann["image_id"])
        cat_id = ann["category_id"]
        if cat_id not in categories:
            raise ValueError(f"{instances_json}: annotation references unknown category id {cat_id}")
        labels_by_image.setdefault(image_id, []).append(categories[cat_id])

    captions_by_image: dict[str, list[str]] = {}
    if captions_json is not None:
        with open(captions_json, encoding="utf-8") as fh:
            caption_data = json.load(fh)
        for ann in caption_data.get("annotations", []):
            captions_by_image.setdefault(str(ann["image_id"]), []).append(str(ann["caption"]))

    records: dict[str, ImageRecord] = {}
    for img in instances.get("images", []):
        image_id = str(img["id"])
        records[image_id] = ImageRecord(
            image_id=image_id,
            path=str(img.get("file_name", "")),
            labels=_dedup_keep_order(labels_by_image.get(image_id, [])),
            captions=tuple(captions_by_image.get(image_id, [])),
        )
    return _finish(records, str(instances_json))
