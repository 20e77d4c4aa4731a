"""Run a detector over an image directory and emit prediction files.

Emission follows the evaluation toolkit's published file formats (schema
version "1", boxes as [x, y, width, height]); the toolkit itself is never
imported. One prediction file is written for the original frames plus one
per test-time augmentation, tagged with the transform it was produced
under, along with a companion image-record file and a run manifest.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from PIL import Image

from .backends import create_backend
from .backends.base import DetectorBackend, RawDetection
from .config import AdapterConfig, AdapterError

logger = logging.getLogger(__name__)

SCHEMA_VERSION = "1"
ROI_PROMPT_ID = "roi"
IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".bmp", ".webp", ".tif", ".tiff")

# PIL transposes producing each augmented frame (boxes stay in that frame)
_TTA_TRANSPOSE = {
    "horizontal_flip": Image.Transpose.FLIP_LEFT_RIGHT,
    "rotate90_cw": Image.Transpose.ROTATE_270,  # PIL rotations are ccw
    "rotate90_ccw": Image.Transpose.ROTATE_90,
}


@dataclass
class RunResult:
    predictions: Path
    image_records: Path
    manifest: Path
    tta_predictions: dict[str, Path] = field(default_factory=dict)


def _slug(text: str, taken: set[str]) -> str:
    slug = re.sub(r"[^a-z0-9]+", "-", text.strip().lower()).strip("-") or "prompt"
    candidate = slug
    suffix = 2
    while candidate in taken:
        candidate = f"{slug}-{suffix}"
        suffix += 1
    taken.add(candidate)
    return candidate


def list_images(image_dir: str | Path) -> list[Path]:
    image_dir = Path(image_dir)
    if not image_dir.is_dir():
        raise AdapterError(f"image directory not found: {image_dir}")
    return sorted(
        p for p in image_dir.iterdir() if p.suffix.lower() in IMAGE_EXTENSIONS
    )


def _entry(image_id: str, prompt_id: str, detection: RawDetection) -> dict | None:
    width = detection.x2 - detection.x1
    height = detection.y2 - detection.y1
    if width <= 0 or height <= 0:
        return None
    return {
        "image_id": image_id,
        "prompt_id": prompt_id,
        "label": detection.label,
        "bbox": [detection.x1, detection.y1, width, height],
        "score": max(0.0, min(1.0, detection.score)),
    }


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=1)
        handle.write("\n")


def _detect_into(
    entries: list[dict],
    backend: DetectorBackend,
    image: Image.Image,
    image_id: str,
    prompts: Iterable[tuple[str, str]],
    score_floor: float,
) -> None:
    for prompt_id, prompt in prompts:
        for detection in backend.detect(image, prompt):
            if detection.score < score_floor:
                continue
            entry = _entry(image_id, prompt_id, detection)
            if entry is not None:
                entries.append(entry)


def run_inference(
    config: AdapterConfig, image_dir: str | Path, out: str | Path
) -> RunResult:
    """Query every prompt on every readable image; write prediction files.

    Unreadable images are skipped with a warning and recorded in the
    manifest. Scores are the model's own, untouched apart from the
    permissive floor; no suppression or fusion happens here.
    """
    out = Path(out)
    backend = create_backend(config.model, config.checkpoint, config.device)

    taken: set[str] = {ROI_PROMPT_ID}
    prompt_ids = [(_slug(p, taken), p) for p in config.prompts]

    records = []
    entries: list[dict] = []
    tta_entries: dict[str, list[dict]] = {kind: [] for kind in config.tta}
    skipped: list[dict] = []

    for path in list_images(image_dir):
        image_id = path.stem
        try:
            with Image.open(path) as raw:
                image = raw.convert("RGB")
        except Exception as exc:
            logger.warning("skipping unreadable image %s: %s", path, exc)
            skipped.append({"file": path.name, "reason": str(exc)})
            continue
        records.append(
            {"id": image_id, "width": image.width, "height": image.height}
        )
        _detect_into(entries, backend, image, image_id, prompt_ids, config.score_floor)
        if config.roi_prompt:
            _detect_into(
                entries,
                backend,
                image,
                image_id,
                [(ROI_PROMPT_ID, config.roi_prompt)],
                config.score_floor,
            )
        for kind in config.tta:
            augmented = image.transpose(_TTA_TRANSPOSE[kind])
            _detect_into(
                tta_entries[kind],
                backend,
                augmented,
                image_id,
                prompt_ids,
                config.score_floor,
            )

    prompt_tag = {prompt_id: prompt for prompt_id, prompt in prompt_ids}
    _write_json(
        out,
        {
            "schema_version": SCHEMA_VERSION,
            "model": config.model,
            "checkpoint": getattr(backend, "checkpoint", config.checkpoint),
            "prompts": prompt_tag,
            "entries": entries,
        },
    )
    records_path = out.with_name(out.stem + ".images.json")
    _write_json(records_path, {"images": records})

    tta_paths: dict[str, Path] = {}
    for kind, kind_entries in tta_entries.items():
        path = out.with_name(f"{out.stem}.{kind}.json")
        _write_json(
            path,
            {
                "schema_version": SCHEMA_VERSION,
                "model": config.model,
                "prompts": prompt_tag,
                "augmentation": {"kind": kind, "frame": "augmented"},
                "entries": kind_entries,
            },
        )
        tta_paths[kind] = path

    manifest_path = out.with_name(out.stem + ".manifest.json")
    _write_json(
        manifest_path,
        {
            "model": config.model,
            "checkpoint": getattr(backend, "checkpoint", config.checkpoint),
            "images": len(records),
            "skipped": skipped,
            "tta": list(config.tta),
        },
    )
    return RunResult(
        predictions=out,
        image_records=records_path,
        manifest=manifest_path,
        tta_predictions=tta_paths,
    )
