"""Greedy one-to-one matching of detections to ground truth.

Detections are processed in descending score order; each takes the free
ground-truth object it overlaps most, provided the IoU clears the matching
threshold. Ties break deterministically: higher IoU, then lower
ground-truth index. No object is ever matched twice.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .geometry import iou
from .model import ConfigError, DataError, Detection, GroundTruthObject
from .suppression import detection_order


@dataclass(frozen=True)
class MatchResult:
    """Outcome of matching one image's detections against its ground truth.

    ``pairs`` holds (detection index, ground-truth index, iou) triples in
    processing order; indices refer to the input sequences.
    """

    pairs: tuple[tuple[int, int, float], ...]
    unmatched_detections: tuple[int, ...]
    unmatched_ground_truth: tuple[int, ...]


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn) < 0:
            raise DataError(f"negative confusion count: {self}")

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)


def match_image(
    detections: Sequence[Detection],
    ground_truth: Sequence[GroundTruthObject],
    iou_threshold: float,
) -> MatchResult:
    """Match one image's detections to its ground truth at ``iou_threshold``."""
    if not 0.0 < iou_threshold <= 1.0:
        raise ConfigError(f"iou threshold out of (0, 1]: {iou_threshold}")
    image_ids = {d.image_id for d in detections} | {g.image_id for g in ground_truth}
    if len(image_ids) > 1:
        raise DataError(f"match_image over mixed images: {sorted(image_ids)}")

    taken = [False] * len(ground_truth)
    pairs: list[tuple[int, int, float]] = []
    matched_detections: set[int] = set()
    for det_index in detection_order(detections):
        box = detections[det_index].box
        best_gt = -1
        best_iou = 0.0
        for gt_index, gt in enumerate(ground_truth):
            if taken[gt_index]:
                continue
            overlap = iou(box, gt.box)
            if overlap >= iou_threshold and overlap > best_iou:
                best_iou = overlap
                best_gt = gt_index
        if best_gt >= 0:
            taken[best_gt] = True
            matched_detections.add(det_index)
            pairs.append((det_index, best_gt, best_iou))

    return MatchResult(
        pairs=tuple(pairs),
        unmatched_detections=tuple(
            i for i in range(len(detections)) if i not in matched_detections
        ),
        unmatched_ground_truth=tuple(
            i for i in range(len(ground_truth)) if not taken[i]
        ),
    )


def confusion(match: MatchResult) -> ConfusionCounts:
    return ConfusionCounts(
        tp=len(match.pairs),
        fp=len(match.unmatched_detections),
        fn=len(match.unmatched_ground_truth),
    )
