"""Core data model shared by every pipeline stage.

All types are immutable after construction and validate their own
invariants, so downstream code never re-checks coordinates or scores.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Any, Iterable, Mapping

logger = logging.getLogger(__name__)

# How far (in pixels) an annotation box may spill past the image border
# before it stops being rounding noise and becomes a data error.
CLAMP_TOLERANCE = 1.0


class DataError(ValueError):
    """Malformed or inconsistent input data (CLI exit code 1)."""


class ConfigError(ValueError):
    """Invalid run configuration (CLI exit code 2)."""


def _require_finite(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise DataError(f"{name} must be finite, got {value!r}")
    return value


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned rectangle in pixel coordinates, origin top-left.

    Stored corner-form (x1, y1, x2, y2) with x1 < x2 and y1 < y2;
    zero-area boxes are rejected. Areas are geometric (x2 - x1, no +1).
    """

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self) -> None:
        for name in ("x1", "y1", "x2", "y2"):
            object.__setattr__(self, name, _require_finite(name, getattr(self, name)))
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise DataError(
                f"degenerate box: ({self.x1}, {self.y1}, {self.x2}, {self.y2})"
            )

    def width(self) -> float:
        return self.x2 - self.x1

    def height(self) -> float:
        return self.y2 - self.y1

    def area(self) -> float:
        return self.width() * self.height()

    def as_xywh(self) -> list[float]:
        """Corner-form to [x, y, width, height] (the external file format)."""
        return [self.x1, self.y1, self.width(), self.height()]

    @classmethod
    def from_xywh(cls, x: float, y: float, w: float, h: float) -> "BoundingBox":
        return cls(x, y, x + w, y + h)


@dataclass(frozen=True)
class Detection:
    """One scored, prompt-attributed box on one image.

    ``extras`` carries unrecognized fields from prediction files so
    writing a loaded file back is lossless.
    """

    image_id: str
    box: BoundingBox
    score: float
    prompt_id: str
    label: str = ""
    extras: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "score", _require_finite("score", self.score))
        if not 0.0 <= self.score <= 1.0:
            raise DataError(f"score must be in [0, 1], got {self.score}")
        if not self.image_id:
            raise DataError("image_id must be non-empty")
        if not self.prompt_id:
            raise DataError("prompt_id must be non-empty")
        object.__setattr__(self, "extras", MappingProxyType(dict(self.extras)))


@dataclass(frozen=True)
class GroundTruthObject:
    """Annotated object instance.

    ``annotated_area`` is the area the annotation file supplied, if any;
    ``area`` falls back to the geometric box area. Keeping both apart
    lets border clamping recompute derived areas without touching
    annotation-supplied ones.
    """

    image_id: str
    box: BoundingBox
    annotated_area: float | None = None
    subset_id: str | None = None

    def __post_init__(self) -> None:
        if not self.image_id:
            raise DataError("image_id must be non-empty")
        if self.annotated_area is not None:
            area = _require_finite("area", self.annotated_area)
            if area <= 0:
                raise DataError(f"area must be positive, got {area}")
            object.__setattr__(self, "annotated_area", area)

    @property
    def area(self) -> float:
        if self.annotated_area is not None:
            return self.annotated_area
        return self.box.area()


@dataclass(frozen=True)
class ImageRecord:
    """Image metadata; pixels are never stored.

    ``subset_id`` tags the image's evaluation subset (e.g. a capture
    location); objects on the image inherit it.
    """

    image_id: str
    width: int
    height: int
    subset_id: str | None = None

    def __post_init__(self) -> None:
        if not self.image_id:
            raise DataError("image_id must be non-empty")
        if self.width <= 0 or self.height <= 0:
            raise DataError(
                f"image {self.image_id!r}: dimensions must be positive, "
                f"got {self.width}x{self.height}"
            )


@dataclass(frozen=True)
class PromptStream:
    """All detections one text prompt produced, plus its ensemble weight."""

    prompt_id: str
    prompt_text: str = ""
    weight: float = 1.0
    detections: tuple[Detection, ...] = ()

    def __post_init__(self) -> None:
        if not self.prompt_id:
            raise DataError("prompt_id must be non-empty")
        weight = _require_finite("weight", self.weight)
        if weight < 0:
            raise DataError(f"weight must be nonnegative, got {weight}")
        object.__setattr__(self, "weight", weight)
        object.__setattr__(self, "detections", tuple(self.detections))
        for det in self.detections:
            if det.prompt_id != self.prompt_id:
                raise DataError(
                    f"stream {self.prompt_id!r} holds a detection tagged "
                    f"{det.prompt_id!r}"
                )

    def with_detections(self, detections: Iterable[Detection]) -> "PromptStream":
        return replace(self, detections=tuple(detections))


@dataclass(frozen=True)
class EvalConfig:
    """Numeric knobs of the evaluation protocol."""

    score_threshold: float = 0.1
    match_iou: float = 0.5
    nms_iou: float = 0.5
    fuse_iou: float = 0.5
    roi_fraction: float = 0.5
    threshold_set_id: str = "ap50_95"
    max_detections_per_image: int = 100

    def __post_init__(self) -> None:
        if not 0.0 <= self.score_threshold <= 1.0:
            raise ConfigError(f"score_threshold out of [0, 1]: {self.score_threshold}")
        for name in ("match_iou", "nms_iou", "fuse_iou"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ConfigError(f"{name} out of (0, 1]: {value}")
        if not 0.0 <= self.roi_fraction <= 1.0:
            raise ConfigError(f"roi_fraction out of [0, 1]: {self.roi_fraction}")
        if self.max_detections_per_image < 1:
            raise ConfigError(
                f"max_detections_per_image must be >= 1: {self.max_detections_per_image}"
            )


@dataclass(frozen=True)
class ValidatedDataset:
    """Ground truth indexed by image and subset, post bounds-checking.

    Subsets are an image property, so images without a single annotated
    object still belong to their subset and contribute false positives.
    """

    images: Mapping[str, ImageRecord]
    ground_truth: tuple[GroundTruthObject, ...]
    warnings: tuple[str, ...] = ()

    def by_image(self, image_id: str) -> tuple[GroundTruthObject, ...]:
        return tuple(g for g in self.ground_truth if g.image_id == image_id)

    @property
    def subset_ids(self) -> tuple[str | None, ...]:
        """Distinct subset ids in image order (None = untagged)."""
        seen: dict[str | None, None] = {}
        for record in self.images.values():
            seen.setdefault(record.subset_id)
        if not seen:
            return (None,)
        return tuple(seen)

    def subset(self, subset_id: str | None) -> tuple[GroundTruthObject, ...]:
        return tuple(g for g in self.ground_truth if g.subset_id == subset_id)

    def subset_images(self, subset_id: str | None) -> tuple[str, ...]:
        return tuple(
            record.image_id
            for record in self.images.values()
            if record.subset_id == subset_id
        )


def _clamp_box(
    obj: GroundTruthObject, image: ImageRecord, index: int
) -> tuple[GroundTruthObject, str | None]:
    """Clamp a box that spills over the border by at most CLAMP_TOLERANCE px."""
    b = obj.box
    low_x, low_y = min(b.x1, 0.0), min(b.y1, 0.0)
    high_x = max(b.x2 - image.width, 0.0)
    high_y = max(b.y2 - image.height, 0.0)
    overflow = max(-low_x, -low_y, high_x, high_y)
    if overflow == 0.0:
        return obj, None
    if overflow > CLAMP_TOLERANCE:
        raise DataError(
            f"annotation #{index} on image {obj.image_id!r} exceeds bounds by "
            f"{overflow:.3f} px: box=({b.x1}, {b.y1}, {b.x2}, {b.y2}) "
            f"image={image.width}x{image.height}"
        )
    clamped = BoundingBox(
        max(b.x1, 0.0),
        max(b.y1, 0.0),
        min(b.x2, float(image.width)),
        min(b.y2, float(image.height)),
    )
    message = (
        f"annotation #{index} on image {obj.image_id!r} clamped to bounds "
        f"(overflow {overflow:.3f} px)"
    )
    return replace(obj, box=clamped), message


def validate_dataset(
    ground_truth: Iterable[GroundTruthObject], images: Iterable[ImageRecord]
) -> ValidatedDataset:
    """Check referential integrity and box bounds; returns the indexed dataset.

    Boxes over the border by at most one pixel are clamped with a warning
    (annotation rounding); anything worse is a hard error, as is a ground
    truth entry naming an unknown image. Subset tags are reconciled in
    both directions: objects inherit their image's tag, an untagged image
    adopts its objects' (consistent) tag, and a conflict is a hard error.
    Validation is idempotent: feeding the result back in changes nothing
    and emits no warnings.
    """
    image_index: dict[str, ImageRecord] = {}
    for record in images:
        if record.image_id in image_index:
            raise DataError(f"duplicate image_id {record.image_id!r}")
        image_index[record.image_id] = record

    ground_truth = list(ground_truth)
    for index, obj in enumerate(ground_truth):
        image = image_index.get(obj.image_id)
        if image is None:
            raise DataError(
                f"annotation #{index} references unknown image {obj.image_id!r}"
            )
        if obj.subset_id is None:
            continue
        if image.subset_id is None:
            image_index[obj.image_id] = replace(image, subset_id=obj.subset_id)
        elif image.subset_id != obj.subset_id:
            raise DataError(
                f"annotation #{index} carries subset {obj.subset_id!r} but "
                f"image {obj.image_id!r} is tagged {image.subset_id!r}"
            )

    checked: list[GroundTruthObject] = []
    warnings: list[str] = []
    for index, obj in enumerate(ground_truth):
        image = image_index[obj.image_id]
        if obj.subset_id is None and image.subset_id is not None:
            obj = replace(obj, subset_id=image.subset_id)
        obj, message = _clamp_box(obj, image, index)
        if message is not None:
            warnings.append(message)
            logger.warning(message)
        checked.append(obj)

    return ValidatedDataset(
        images=image_index,
        ground_truth=tuple(checked),
        warnings=tuple(warnings),
    )


def filter_by_score(detections: Iterable[Detection], threshold: float) -> list[Detection]:
    """Keep detections scoring at least ``threshold``, order preserved.

    The comparison is inclusive so boundary detections survive.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ConfigError(f"score threshold out of [0, 1]: {threshold}")
    return [d for d in detections if d.score >= threshold]
