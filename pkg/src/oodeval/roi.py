"""Region-of-interest filtering.

A region is either a binary mask (pixel-center semantics) or a union of
rectangles (exact geometric semantics, e.g. road boxes predicted by the
detector itself). Detections keep only where a sufficient fraction of
their box lies inside the region; images with no registered region pass
everything through, which is how benchmarks without a designated region
are evaluated.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .model import BoundingBox, ConfigError, DataError, Detection, ImageRecord

logger = logging.getLogger(__name__)

# Reserved stream id carrying road-region boxes inside prediction files.
ROI_PROMPT_ID = "roi"


@dataclass(frozen=True)
class RegionOfInterest:
    """Per-image region: a bool mask (H x W) or a rectangle union."""

    image_id: str
    mask: np.ndarray | None = None
    rectangles: tuple[BoundingBox, ...] | None = None

    def __post_init__(self) -> None:
        if (self.mask is None) == (self.rectangles is None):
            raise DataError("region needs exactly one of mask or rectangles")
        if self.mask is not None:
            mask = np.asarray(self.mask, dtype=bool)
            if mask.ndim != 2:
                raise DataError(f"mask for {self.image_id!r} must be 2-D")
            object.__setattr__(self, "mask", mask)
        if self.rectangles is not None:
            rectangles = tuple(self.rectangles)
            if not rectangles:
                raise DataError(f"empty rectangle region for {self.image_id!r}")
            object.__setattr__(self, "rectangles", rectangles)


def _covered_pixel_range(lo: float, hi: float, limit: int) -> tuple[int, int]:
    """Indices whose centers (i + 0.5) fall in [lo, hi), clipped to [0, limit)."""
    first = max(0, math.ceil(lo - 0.5))
    last = min(limit - 1, math.ceil(hi - 0.5) - 1)
    return first, last


def _rectangle_union_area(rects: Sequence[tuple[float, float, float, float]]) -> float:
    """Exact area of a union of axis-aligned rectangles (coordinate sweep)."""
    rects = [r for r in rects if r[0] < r[2] and r[1] < r[3]]
    if not rects:
        return 0.0
    xs = sorted({x for r in rects for x in (r[0], r[2])})
    total = 0.0
    for x_lo, x_hi in zip(xs, xs[1:]):
        if x_hi <= x_lo:
            continue
        spans = sorted(
            (r[1], r[3]) for r in rects if r[0] <= x_lo and r[2] >= x_hi
        )
        covered = 0.0
        cursor = None
        for y_lo, y_hi in spans:
            if cursor is None or y_lo > cursor:
                covered += y_hi - y_lo
                cursor = y_hi
            elif y_hi > cursor:
                covered += y_hi - cursor
                cursor = y_hi
        total += covered * (x_hi - x_lo)
    return total


def roi_overlap_fraction(box: BoundingBox | Detection, roi: RegionOfInterest) -> float:
    """Fraction of the box lying inside the region, in [0, 1].

    Rectangle regions are evaluated geometrically on the union (a spot
    covered by two road boxes counts once). Mask regions count the pixel
    centers the box covers; a box too small to cover any center has
    fraction 0.
    """
    if isinstance(box, Detection):
        if box.image_id != roi.image_id:
            raise DataError(
                f"detection on {box.image_id!r} checked against region of "
                f"{roi.image_id!r}"
            )
        box = box.box

    if roi.rectangles is not None:
        clipped = []
        for rect in roi.rectangles:
            x1, y1 = max(box.x1, rect.x1), max(box.y1, rect.y1)
            x2, y2 = min(box.x2, rect.x2), min(box.y2, rect.y2)
            if x1 < x2 and y1 < y2:
                clipped.append((x1, y1, x2, y2))
        return _rectangle_union_area(clipped) / box.area()

    mask = roi.mask
    height, width = mask.shape
    j_lo, j_hi = _covered_pixel_range(box.x1, box.x2, width)
    i_lo, i_hi = _covered_pixel_range(box.y1, box.y2, height)
    if j_lo > j_hi or i_lo > i_hi:
        return 0.0
    window = mask[i_lo : i_hi + 1, j_lo : j_hi + 1]
    return float(window.sum()) / window.size


def filter_by_roi(
    detections: Iterable[Detection],
    rois: Mapping[str, RegionOfInterest],
    fraction_threshold: float,
) -> list[Detection]:
    """Keep detections overlapping their image's region by >= threshold.

    Images without a registered region pass all detections through.
    """
    if not 0.0 <= fraction_threshold <= 1.0:
        raise ConfigError(f"roi fraction out of [0, 1]: {fraction_threshold}")
    kept = []
    for det in detections:
        roi = rois.get(det.image_id)
        if roi is None or roi_overlap_fraction(det, roi) >= fraction_threshold:
            kept.append(det)
    return kept


def roi_from_detections(
    road_detections: Sequence[Detection],
    image: ImageRecord,
    score_floor: float,
) -> RegionOfInterest | None:
    """Build a rectangle-union region from model-predicted road boxes.

    Returns None (pass-through, with a warning) when no road box clears
    the score floor.
    """
    for det in road_detections:
        if det.image_id != image.image_id:
            raise DataError(
                f"road box on {det.image_id!r} offered for image {image.image_id!r}"
            )
    boxes = tuple(d.box for d in road_detections if d.score >= score_floor)
    if not boxes:
        logger.warning(
            "image %r: no road box with score >= %s; no region registered",
            image.image_id,
            score_floor,
        )
        return None
    return RegionOfInterest(image_id=image.image_id, rectangles=boxes)
