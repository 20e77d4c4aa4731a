"""Greedy non-maximum suppression, applied to each prompt stream separately."""

from __future__ import annotations

from typing import Iterable, Sequence

from .geometry import iou
from .model import ConfigError, DataError, Detection, PromptStream


def detection_order(detections: Sequence[Detection]) -> list[int]:
    """Deterministic processing order: score desc, then larger box, then input order."""
    return sorted(
        range(len(detections)),
        key=lambda i: (-detections[i].score, -detections[i].box.area(), i),
    )


def _check_threshold(iou_threshold: float) -> None:
    if not 0.0 < iou_threshold <= 1.0:
        raise ConfigError(f"iou threshold out of (0, 1]: {iou_threshold}")


def nms(detections: Sequence[Detection], iou_threshold: float) -> list[Detection]:
    """Greedy NMS over one image's detections.

    Repeatedly keeps the highest-scored remaining detection and drops every
    remaining detection overlapping it with IoU >= threshold. Survivors come
    back in descending score order.
    """
    _check_threshold(iou_threshold)
    image_ids = {d.image_id for d in detections}
    if len(image_ids) > 1:
        raise DataError(f"nms over mixed images: {sorted(image_ids)}")
    kept: list[Detection] = []
    for index in detection_order(detections):
        candidate = detections[index]
        if all(iou(candidate.box, k.box) < iou_threshold for k in kept):
            kept.append(candidate)
    return kept


def nms_per_image(detections: Iterable[Detection], iou_threshold: float) -> list[Detection]:
    """NMS applied independently per image; groups never interact.

    Output groups follow the first appearance of each image in the input.
    """
    groups: dict[str, list[Detection]] = {}
    for det in detections:
        groups.setdefault(det.image_id, []).append(det)
    merged: list[Detection] = []
    for dets in groups.values():
        merged.extend(nms(dets, iou_threshold))
    return merged


def nms_per_prompt(
    streams: Iterable[PromptStream], iou_threshold: float
) -> list[PromptStream]:
    """Per-prompt, per-image NMS; streams never suppress each other."""
    return [
        stream.with_detections(nms_per_image(stream.detections, iou_threshold))
        for stream in streams
    ]
