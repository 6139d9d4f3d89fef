#!/usr/bin/env python3
"""Full-scale MS-COCO evaluation driver.

Runs the complete protocol against the COCO 2017 validation set: caption all
images (original + 17 crops) through a LLaVA-compatible endpoint, build the
index, then evaluate all four scenarios. Requires the COCO annotation files,
the image directory, and a reachable captioning endpoint; expect tens of
thousands of model calls on the first run (cached and resumable afterwards).

Example:
    python scripts/run_coco_eval.py \
        --instances data/annotations/instances_val2017.json \
        --captions-ann data/annotations/captions_val2017.json \
        --images data/val2017 \
        --endpoint http://localhost:8000/v1/chat/completions \
        --model llava-1.5-13b \
        --out runs/coco
"""

import argparse
import json
import sys
from pathlib import Path

from capsearch.cli import main as cli
from capsearch.datasets import load_coco


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--instances", required=True, help="instances_val2017.json")
    parser.add_argument("--captions-ann", required=True, help="captions_val2017.json")
    parser.add_argument("--images", required=True, help="val2017 image directory")
    parser.add_argument("--endpoint", required=True)
    parser.add_argument("--model", required=True)
    parser.add_argument("--pattern", default="crops17")
    parser.add_argument("--out", default="runs/coco")
    parser.add_argument("--jobs", type=int, default=4)
    parser.add_argument("--max-steps", type=int, default=5)
    args = parser.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    # convert COCO annotations to the generic dataset JSONL once
    dataset = load_coco(args.instances, args.captions_ann)
    dataset_path = out / "dataset.jsonl"
    with open(dataset_path, "w", encoding="utf-8") as fh:
        for r in dataset.records:
            fh.write(
                json.dumps(
                    {
                        "image_id": r.image_id,
                        "path": r.path,
                        "labels": list(r.labels),
                        "captions": list(r.captions),
                    }
                )
                + "\n"
            )
    print(f"dataset: {len(dataset)} images, {len(dataset.labeled)} labeled, "
          f"{len(dataset.label_vocabulary)} label types")

    captions_path = out / "captions.jsonl"
    code = cli(
        [
            "caption",
            "--dataset", str(dataset_path),
            "--out", str(captions_path),
            "--pattern", args.pattern,
            "--images-root", args.images,
            "--cache-dir", str(out / "cache"),
            "--endpoint", args.endpoint,
            "--model", args.model,
            "--jobs", str(args.jobs),
        ]
    )
    if code != 0:
        print("captioning incomplete; re-run to resume from cache", file=sys.stderr)
        return code

    index_path = out / "index.json"
    code = cli(["index", "--captions", str(captions_path), "--out", str(index_path)])
    if code != 0:
        return code

    for scenario in ("keyword", "multi_keyword", "caption", "feedback"):
        code = cli(
            [
                "eval", "--scenario", scenario,
                "--dataset", str(dataset_path),
                "--index", str(index_path),
                "--out", str(out / f"report_{scenario}.json"),
                "--csv", str(out / f"pr_{scenario}.csv"),
                "--max-steps", str(args.max_steps),
            ]
        )
        if code != 0:
            return code
    print(f"done; reports in {out}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
