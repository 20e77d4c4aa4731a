"""Closed-form box arithmetic: overlap areas, IoU, augmentation transforms.

All areas are geometric (continuous coordinates, no +1 pixel convention),
and an intersection that only touches along an edge or corner counts as
empty.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .model import BoundingBox, DataError


class AugmentationKind(str, Enum):
    IDENTITY = "identity"
    HORIZONTAL_FLIP = "horizontal_flip"
    ROTATE90_CW = "rotate90_cw"
    ROTATE90_CCW = "rotate90_ccw"


@dataclass(frozen=True)
class AugmentationSpec:
    """An image transform plus the ORIGINAL image's dimensions.

    90-degree rotations produce an augmented image with width and height
    swapped; ``reference_width``/``reference_height`` always describe the
    un-augmented image.
    """

    kind: AugmentationKind
    reference_width: int = 0
    reference_height: int = 0

    def __post_init__(self) -> None:
        if self.kind is not AugmentationKind.IDENTITY:
            if self.reference_width <= 0 or self.reference_height <= 0:
                raise DataError(
                    f"augmentation {self.kind.value!r} needs positive reference "
                    f"dimensions, got {self.reference_width}x{self.reference_height}"
                )


def intersection_area(a: BoundingBox, b: BoundingBox) -> float:
    """Overlap area of two boxes; 0 for disjoint or edge-touching boxes."""
    iw = min(a.x2, b.x2) - max(a.x1, b.x1)
    ih = min(a.y2, b.y2) - max(a.y1, b.y1)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    return iw * ih


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union in [0, 1]."""
    inter = intersection_area(a, b)
    if inter == 0.0:
        return 0.0
    union = a.area() + b.area() - inter
    return inter / union


def deaugment_box(box: BoundingBox, aug: AugmentationSpec) -> BoundingBox:
    """Map a box from the augmented image frame back to the original frame.

    A horizontal flip maps (x1, y1, x2, y2) to (W - x2, y1, W - x1, y2);
    rotations map corner-wise and re-normalize the corner order.
    """
    w = float(aug.reference_width)
    h = float(aug.reference_height)
    if aug.kind is AugmentationKind.IDENTITY:
        return box
    if aug.kind is AugmentationKind.HORIZONTAL_FLIP:
        return BoundingBox(w - box.x2, box.y1, w - box.x1, box.y2)
    if aug.kind is AugmentationKind.ROTATE90_CW:
        # forward cw: (x, y) -> (H - y, x); inverse: (x', y') -> (y', H - x')
        return BoundingBox(box.y1, h - box.x2, box.y2, h - box.x1)
    if aug.kind is AugmentationKind.ROTATE90_CCW:
        # forward ccw: (x, y) -> (y, W - x); inverse: (x', y') -> (W - y', x')
        return BoundingBox(w - box.y2, box.x1, w - box.y1, box.x2)
    raise DataError(f"unknown augmentation kind {aug.kind!r}")
