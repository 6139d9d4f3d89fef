#!/usr/bin/env python3
"""End-to-end desk-scale demo: synthetic captions -> index -> all four scenarios.

No network or real images needed; caption text is fabricated so the whole
pipeline downstream of the captioning endpoint can be exercised and inspected.
Artifacts land in ./demo_out.
"""

import json
import sys
from pathlib import Path

from capsearch.captions import CaptionDocument, CaptionSource, save_captions
from capsearch.cli import main as cli


# scene line, ground-truth labels, extra doc text the "model" noticed in crops
SCENES = {
    "img001": ("a red double-decker bus on a rainy street", ["bus"], ""),
    "img002": ("a yellow school bus parked near a traffic light", ["bus", "traffic light"], ""),
    "img003": ("a bowl of green apples on a wooden table", ["bowl", "apple"], ""),
    "img004": ("a bunch of bananas sitting on top of a wooden table", ["cup", "banana", "keyboard"], ""),
    "img005": ("a dog catching a frisbee in the park", ["dog", "frisbee"], ""),
    "img006": ("a black dog sleeping beside a bicycle", ["dog", "bicycle"], ""),
    "img007": ("a giraffe standing near a fence at the zoo", ["giraffe"], ""),
    "img008": ("two cars and a bus stuck in traffic", ["car", "bus", "traffic light"], ""),
    # distractor: same caption as img004 but no cup or keyboard in frame
    "img009": ("a bunch of bananas sitting on top of a wooden table", ["banana"], "a man standing nearby"),
}


def build_inputs(out: Path) -> tuple[Path, Path]:
    docs = []
    rows = []
    for image_id, (caption, labels, extra) in sorted(SCENES.items()):
        # fake "generated" captions: the scene line plus a paraphrase per label
        sources = [CaptionSource(0, None, f"{caption}. {extra}".strip())]
        for j, label in enumerate(labels, start=1):
            sources.append(CaptionSource(j, None, f"A close-up view of the {label}."))
        docs.append(CaptionDocument(image_id=image_id, pattern="none", sources=tuple(sources)))
        rows.append({"image_id": image_id, "path": "", "labels": labels, "captions": [caption]})
    captions_path = out / "captions.jsonl"
    dataset_path = out / "dataset.jsonl"
    save_captions(docs, captions_path)
    dataset_path.write_text("\n".join(json.dumps(r) for r in rows) + "\n")
    return captions_path, dataset_path


def main() -> int:
    out = Path("demo_out")
    out.mkdir(exist_ok=True)
    captions_path, dataset_path = build_inputs(out)
    index_path = out / "index.json"

    steps = [["index", "--captions", str(captions_path), "--out", str(index_path)]]
    for scenario in ("keyword", "multi_keyword", "caption", "feedback"):
        steps.append(
            [
                "eval", "--scenario", scenario,
                "--dataset", str(dataset_path),
                "--index", str(index_path),
                "--out", str(out / f"report_{scenario}.json"),
                "--csv", str(out / f"pr_{scenario}.csv"),
                "--max-steps", "3",
            ]
        )
    steps.append(["search", "--index", str(index_path), "--query", "bus, traffic light", "-k", "5"])
    steps.append(["stats", "--captions", str(captions_path), "--top", "10"])

    for argv in steps:
        print(f"\n$ capsearch {' '.join(argv)}")
        code = cli(argv)
        if code != 0:
            return code

    feedback = json.loads((out / "report_feedback.json").read_text())
    print("\nR@1 per feedback step:", feedback["r1_per_step"])
    print(f"artifacts written to {out}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
