"""File formats: predictions, annotations, ROI masks, run configs, reports.

Prediction and annotation files are JSON. External boxes are
[x, y, width, height]; they convert to corner form at this boundary and
back on write. Unknown fields on prediction entries ride along on the
Detection so a load/write round trip is lossless.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
from PIL import Image

from .metrics import MetricReport
from .model import (
    BoundingBox,
    ConfigError,
    DataError,
    Detection,
    GroundTruthObject,
    ImageRecord,
    PromptStream,
)
from .roi import RegionOfInterest

PREDICTION_SCHEMA_VERSION = "1"
UNDEFINED_CELL = "—"  # em dash, how tables mark values with no ground truth

_ENTRY_FIELDS = ("image_id", "prompt_id", "label", "bbox", "score")
_MASK_EXTENSIONS = (".png", ".bmp", ".jpg", ".jpeg", ".tif", ".tiff", ".webp")


def _read_json(path: str | Path) -> Any:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except FileNotFoundError:
        raise DataError(f"file not found: {path}") from None
    except OSError as exc:
        raise DataError(f"{path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON ({exc})") from None


def _entry_bbox(entry: Mapping[str, Any], where: str) -> BoundingBox:
    bbox = entry.get("bbox")
    if (
        not isinstance(bbox, (list, tuple))
        or len(bbox) != 4
        or not all(isinstance(v, (int, float)) for v in bbox)
    ):
        raise DataError(f"{where}: bbox must be [x, y, width, height], got {bbox!r}")
    x, y, w, h = map(float, bbox)
    if w <= 0 or h <= 0:
        raise DataError(f"{where}: bbox width/height must be positive, got {w}x{h}")
    return BoundingBox.from_xywh(x, y, w, h)


def load_predictions(path: str | Path) -> list[PromptStream]:
    """Load a prediction file into per-prompt streams (weight 1.0 each).

    Streams appear in first-occurrence order of their prompt id; entry
    order within a stream is preserved. Malformed entries fail with the
    entry index in the message.
    """
    payload = _read_json(path)
    if not isinstance(payload, dict):
        raise DataError(f"{path}: expected a JSON object at top level")
    version = payload.get("schema_version")
    if version != PREDICTION_SCHEMA_VERSION:
        raise DataError(
            f"{path}: schema_version {version!r} not supported "
            f"(expected {PREDICTION_SCHEMA_VERSION!r})"
        )
    entries = payload.get("entries")
    if not isinstance(entries, list):
        raise DataError(f"{path}: missing entries array")

    streams: dict[str, list[Detection]] = {}
    for index, entry in enumerate(entries):
        where = f"{path}: entry {index}"
        if not isinstance(entry, dict):
            raise DataError(f"{where}: not an object")
        for name in ("image_id", "prompt_id"):
            if not isinstance(entry.get(name), str) or not entry[name]:
                raise DataError(f"{where}: {name} must be a non-empty string")
        score = entry.get("score")
        if not isinstance(score, (int, float)):
            raise DataError(f"{where}: score must be a number, got {score!r}")
        box = _entry_bbox(entry, where)
        extras = {k: v for k, v in entry.items() if k not in _ENTRY_FIELDS}
        try:
            detection = Detection(
                image_id=entry["image_id"],
                box=box,
                score=float(score),
                prompt_id=entry["prompt_id"],
                label=str(entry.get("label", "")),
                extras=extras,
            )
        except DataError as exc:
            raise DataError(f"{where}: {exc}") from None
        streams.setdefault(detection.prompt_id, []).append(detection)

    # optional per-stream default weights (a run config still overrides)
    weights = payload.get("weights", {})
    if not isinstance(weights, dict) or not all(
        isinstance(w, (int, float)) for w in weights.values()
    ):
        raise DataError(f"{path}: weights must map prompt ids to numbers")
    return [
        PromptStream(
            prompt_id=prompt_id,
            weight=float(weights.get(prompt_id, 1.0)),
            detections=tuple(dets),
        )
        for prompt_id, dets in streams.items()
    ]


def write_predictions(
    streams: Iterable[PromptStream] | Sequence[Detection],
    path: str | Path,
    *,
    tags: Mapping[str, Any] | None = None,
) -> None:
    """Write streams (or a flat detection list) as a prediction file.

    ``tags`` adds informational top-level keys (e.g. the augmentation a
    TTA file was produced under); the loader ignores them.
    """
    detections: list[Detection] = []
    weights: dict[str, float] = {}
    for item in streams:
        if isinstance(item, PromptStream):
            detections.extend(item.detections)
            weights[item.prompt_id] = item.weight
        else:
            detections.append(item)
    entries = []
    for det in detections:
        entry: dict[str, Any] = {
            "image_id": det.image_id,
            "prompt_id": det.prompt_id,
            "label": det.label,
            "bbox": det.box.as_xywh(),
            "score": det.score,
        }
        entry.update(det.extras)
        entries.append(entry)
    payload: dict[str, Any] = {"schema_version": PREDICTION_SCHEMA_VERSION}
    if tags:
        payload.update(tags)
    if any(w != 1.0 for w in weights.values()):
        payload["weights"] = weights
    payload["entries"] = entries
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=1)
        handle.write("\n")


def _parse_image_records(payload: Any, path: str | Path) -> list[ImageRecord]:
    if not isinstance(payload, dict) or not isinstance(payload.get("images"), list):
        raise DataError(f"{path}: expected an object with an images array")
    records: list[ImageRecord] = []
    for index, image in enumerate(payload["images"]):
        where = f"{path}: images[{index}]"
        if not isinstance(image, dict):
            raise DataError(f"{where}: not an object")
        if "id" not in image:
            raise DataError(f"{where}: missing id")
        for name in ("width", "height"):
            if not isinstance(image.get(name), int):
                raise DataError(f"{where}: {name} must be an integer")
        subset = image.get("subset")
        try:
            records.append(
                ImageRecord(
                    image_id=str(image["id"]),
                    width=image["width"],
                    height=image["height"],
                    subset_id=str(subset) if subset is not None else None,
                )
            )
        except DataError as exc:
            raise DataError(f"{where}: {exc}") from None
    return records


def load_image_records(path: str | Path) -> list[ImageRecord]:
    """Load a standalone image-record file ({"images": [...]})."""
    return _parse_image_records(_read_json(path), path)


def load_ground_truth(
    path: str | Path,
) -> tuple[list[GroundTruthObject], list[ImageRecord]]:
    """Load an annotation file with images[] and annotations[] arrays.

    Annotations carry their supplied area when present, otherwise the box
    area; each object inherits the optional "subset" tag of its image.
    """
    payload = _read_json(path)
    records = _parse_image_records(payload, path)
    subsets = {record.image_id: record.subset_id for record in records}
    annotations = payload.get("annotations")
    if not isinstance(annotations, list):
        raise DataError(f"{path}: missing annotations array")

    objects: list[GroundTruthObject] = []
    for index, annotation in enumerate(annotations):
        where = f"{path}: annotations[{index}]"
        if not isinstance(annotation, dict):
            raise DataError(f"{where}: not an object")
        if "image_id" not in annotation:
            raise DataError(f"{where}: missing image_id")
        image_id = str(annotation["image_id"])
        box = _entry_bbox(annotation, where)
        area = annotation.get("area")
        if area is not None and not isinstance(area, (int, float)):
            raise DataError(f"{where}: area must be a number, got {area!r}")
        try:
            objects.append(
                GroundTruthObject(
                    image_id=image_id,
                    box=box,
                    annotated_area=float(area) if area is not None else None,
                    subset_id=subsets.get(image_id),
                )
            )
        except DataError as exc:
            raise DataError(f"{where}: {exc}") from None
    return objects, records


def load_roi_masks(
    directory: str | Path, images: Sequence[ImageRecord]
) -> dict[str, RegionOfInterest]:
    """Load 8-bit single-channel masks named <image_id>.<ext>, nonzero = inside.

    Images without a mask file get no region (pass-through); finding no
    mask at all for any image is a hard error since the run requested
    mask filtering.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise DataError(f"mask directory not found: {directory}")
    regions: dict[str, RegionOfInterest] = {}
    for record in images:
        mask_path = None
        for extension in _MASK_EXTENSIONS:
            candidate = directory / f"{record.image_id}{extension}"
            if candidate.is_file():
                mask_path = candidate
                break
        if mask_path is None:
            continue
        try:
            with Image.open(mask_path) as image:
                mask = np.asarray(image.convert("L")) > 0
        except Exception as exc:
            raise DataError(f"{mask_path}: unreadable mask ({exc})") from None
        if mask.shape != (record.height, record.width):
            raise DataError(
                f"{mask_path}: mask is {mask.shape[1]}x{mask.shape[0]}, image "
                f"{record.image_id!r} is {record.width}x{record.height}"
            )
        regions[record.image_id] = RegionOfInterest(image_id=record.image_id, mask=mask)
    if not regions:
        raise DataError(f"no ROI masks found under {directory}")
    return regions


@dataclass(frozen=True)
class RunConfig:
    """One evaluation run, as loaded from a config file plus CLI overrides."""

    predictions: str = ""
    ground_truth: str = ""
    images: str = ""  # standalone image records, when no ground truth is given
    output_dir: str = "."
    prompt_weights: dict[str, float] = field(default_factory=dict)
    score_threshold: float = 0.1
    match_iou: float = 0.5
    nms_iou: float = 0.5
    fuse_iou: float = 0.5
    roi_mode: str = "none"  # none | mask-dir | predicted-road
    roi_fraction: float = 0.5
    roi_mask_dir: str = ""
    roi_score_floor: float = 0.1
    threshold_set: str = "ap50_95"
    max_detections: int = 100
    report_format: str = "csv"  # csv | md
    threads: int = 1

    _NUMERIC_FIELDS = (
        "score_threshold",
        "match_iou",
        "nms_iou",
        "fuse_iou",
        "roi_fraction",
        "roi_score_floor",
    )

    def __post_init__(self) -> None:
        for name in self._NUMERIC_FIELDS:
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ConfigError(f"{name} must be a number, got {value!r}")
        for name in ("threads", "max_detections"):
            if not isinstance(getattr(self, name), int):
                raise ConfigError(f"{name} must be an integer, got {getattr(self, name)!r}")
        if self.roi_mode not in ("none", "mask-dir", "predicted-road"):
            raise ConfigError(f"unknown roi_mode {self.roi_mode!r}")
        if self.report_format not in ("csv", "md"):
            raise ConfigError(f"unknown report format {self.report_format!r}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1: {self.threads}")
        if not isinstance(self.prompt_weights, dict) or not all(
            isinstance(w, (int, float)) and not isinstance(w, bool)
            for w in self.prompt_weights.values()
        ):
            raise ConfigError("prompt_weights must map prompt ids to numbers")
        if self.prompt_weights:
            if any(w < 0 for w in self.prompt_weights.values()):
                raise ConfigError("prompt weights must be nonnegative")
            if all(w == 0 for w in self.prompt_weights.values()):
                raise ConfigError("at least one prompt weight must be positive")

    @classmethod
    def from_file(cls, path: str | Path, **overrides: Any) -> "RunConfig":
        payload = _read_json(path)
        if not isinstance(payload, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(payload) - known
        if unknown:
            raise ConfigError(f"{path}: unknown config keys {sorted(unknown)}")
        merged = dict(payload)
        merged.update({k: v for k, v in overrides.items() if v is not None})
        try:
            return cls(**merged)
        except TypeError as exc:
            raise ConfigError(f"{path}: {exc}") from None

    # fields that determine metric values; paths are covered by content
    # digests and execution details (threads, output_dir) change nothing
    _PROTOCOL_FIELDS = (
        "prompt_weights",
        "score_threshold",
        "match_iou",
        "nms_iou",
        "fuse_iou",
        "roi_mode",
        "roi_fraction",
        "roi_score_floor",
        "threshold_set",
        "max_detections",
    )

    def protocol_json(self) -> str:
        """The result-determining settings, canonically serialized."""
        return json.dumps(
            {k: getattr(self, k) for k in self._PROTOCOL_FIELDS}, sort_keys=True
        )

    def content_hash(self) -> str:
        return hashlib.sha256(self.protocol_json().encode("utf-8")).hexdigest()[:16]


def file_digest(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()[:16]


def _format_metric(value: float | None) -> str:
    return UNDEFINED_CELL if value is None else f"{value:.3f}"


def _report_columns(reports: Sequence[MetricReport], has_ar: bool) -> list[str]:
    columns = ["label", "subset"]
    columns += list(reports[0].ap.keys())
    columns += ["ap_s", "ap_m", "ap_l"]
    if has_ar:
        k = next(r.ar_k for r in reports if r.ar_k is not None)
        columns.append(f"ar{k}")
    columns += ["tp", "fp", "fn"]
    return columns


def _report_row(report: MetricReport, has_ar: bool) -> list[str]:
    cells = [report.label, report.subset_id or ""]
    cells += [_format_metric(value) for value in report.ap.values()]
    cells += [
        _format_metric(report.ap_small),
        _format_metric(report.ap_medium),
        _format_metric(report.ap_large),
    ]
    if has_ar:
        cells.append(_format_metric(report.ar_at_k))
    cells += [str(report.counts.tp), str(report.counts.fp), str(report.counts.fn)]
    return cells


def write_report(
    reports: Sequence[MetricReport],
    format: str,
    path: str | Path,
    header: Mapping[str, str] | None = None,
) -> None:
    """Write one row per report; AP values at 3 decimals, counts as integers.

    ``header`` lines (provenance: config hash, input digests) precede the
    table as comments.
    """
    if not reports:
        raise DataError("no reports to write")
    for report in reports[1:]:
        if list(report.ap.keys()) != list(reports[0].ap.keys()):
            raise DataError("reports carry different AP columns")
    has_ar = any(r.ar_at_k is not None for r in reports)
    columns = _report_columns(reports, has_ar)
    rows = [_report_row(report, has_ar) for report in reports]

    lines: list[str] = []
    if format == "csv":
        lines += [f"# {key}: {value}" for key, value in (header or {}).items()]
        lines.append(",".join(columns))
        lines += [",".join(row) for row in rows]
    elif format == "md":
        lines += [f"<!-- {key}: {value} -->" for key, value in (header or {}).items()]
        widths = [
            max(len(column), *(len(row[i]) for row in rows))
            for i, column in enumerate(columns)
        ]
        def fmt(cells: Sequence[str]) -> str:
            return "| " + " | ".join(c.ljust(w) for c, w in zip(cells, widths)) + " |"
        lines.append(fmt(columns))
        lines.append("|" + "|".join("-" * (w + 2) for w in widths) + "|")
        lines += [fmt(row) for row in rows]
    else:
        raise ConfigError(f"unknown report format {format!r}")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")
