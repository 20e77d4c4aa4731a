"""Prompt-ensemble fusion and test-time-augmentation merging.

Fusion clusters detections from different prompt streams by IoU, averages
their confidences with normalized per-prompt weights, and finishes with
NMS over the fused boxes. A prompt missing from a cluster contributes
score zero while its weight stays in the normalization, so detections not
corroborated across prompts are damped.
"""

from __future__ import annotations

from typing import Iterable, Mapping, Sequence

from .geometry import AugmentationSpec, deaugment_box, iou
from .model import BoundingBox, ConfigError, DataError, Detection, PromptStream
from .suppression import nms_per_image

ENSEMBLE_PROMPT_ID = "ensemble"


class FusionCluster:
    """Detections from distinct prompts judged to be the same object."""

    __slots__ = ("members", "fused_box")

    def __init__(self, first: Detection) -> None:
        self.members: list[Detection] = [first]
        self.fused_box: BoundingBox = first.box

    def prompt_ids(self) -> set[str]:
        return {m.prompt_id for m in self.members}

    def add(self, detection: Detection) -> None:
        if detection.prompt_id in self.prompt_ids():
            raise DataError(
                f"cluster already holds a member of prompt {detection.prompt_id!r}"
            )
        self.members.append(detection)
        self._refresh_box()

    def _refresh_box(self) -> None:
        # Score-weighted mean: higher-confidence localizations dominate.
        # Anchoring at the first member keeps coinciding coordinates exact.
        total = sum(m.score for m in self.members)
        if total == 0.0:
            weights = [1.0 / len(self.members)] * len(self.members)
        else:
            weights = [m.score / total for m in self.members]
        anchor = self.members[0].box

        def mean(coordinate: str) -> float:
            base = getattr(anchor, coordinate)
            return base + sum(
                w * (getattr(m.box, coordinate) - base)
                for w, m in zip(weights, self.members)
            )

        self.fused_box = BoundingBox(mean("x1"), mean("y1"), mean("x2"), mean("y2"))

    def fused_score(self, normalized_weights: Mapping[str, float]) -> float:
        score = sum(normalized_weights[m.prompt_id] * m.score for m in self.members)
        return min(1.0, max(0.0, score))


def _normalized_weights(streams: Sequence[PromptStream]) -> dict[str, float]:
    seen = set()
    for stream in streams:
        if stream.prompt_id in seen:
            raise DataError(f"duplicate prompt stream {stream.prompt_id!r}")
        seen.add(stream.prompt_id)
    total = sum(s.weight for s in streams)
    if total <= 0.0:
        raise DataError("prompt weights sum to zero; nothing can be fused")
    return {s.prompt_id: s.weight / total for s in streams}


def _cluster_image(
    detections: list[tuple[int, int, Detection]], fuse_iou: float
) -> list[FusionCluster]:
    """Greedy clustering of one image's detections across streams.

    Detections are processed by descending score. Each joins the existing
    cluster it overlaps most (IoU >= fuse_iou), unless that cluster already
    holds a member of the same prompt, in which case it seeds its own.
    """
    order = sorted(
        range(len(detections)),
        key=lambda i: (
            -detections[i][2].score,
            -detections[i][2].box.area(),
            detections[i][0],
            detections[i][1],
        ),
    )
    clusters: list[FusionCluster] = []
    for index in order:
        det = detections[index][2]
        best = None
        best_iou = 0.0
        for cluster in clusters:
            overlap = iou(det.box, cluster.fused_box)
            if overlap >= fuse_iou and overlap > best_iou:
                best_iou = overlap
                best = cluster
        if best is None or det.prompt_id in best.prompt_ids():
            clusters.append(FusionCluster(det))
        else:
            best.add(det)
    return clusters


def fuse_prompts(
    streams: Sequence[PromptStream], fuse_iou: float, nms_iou: float
) -> list[Detection]:
    """Fuse per-prompt detection streams into one ensemble stream.

    Expects per-stream NMS to have run already. Weights are normalized to
    sum 1; zero-weight streams are dropped up front (they would contribute
    score zero everywhere but still perturb fused boxes). The fused pool
    goes through standard NMS and comes back under the reserved prompt id
    "ensemble".
    """
    if not 0.0 < fuse_iou <= 1.0:
        raise ConfigError(f"fuse_iou out of (0, 1]: {fuse_iou}")
    if not streams:
        return []
    weights = _normalized_weights(streams)
    active = [s for s in streams if s.weight > 0.0]

    by_image: dict[str, list[tuple[int, int, Detection]]] = {}
    for stream_index, stream in enumerate(active):
        for det_index, det in enumerate(stream.detections):
            by_image.setdefault(det.image_id, []).append(
                (stream_index, det_index, det)
            )

    fused: list[Detection] = []
    for image_id, dets in by_image.items():
        for cluster in _cluster_image(dets, fuse_iou):
            top = max(cluster.members, key=lambda m: m.score)
            box = top.box if len(cluster.members) == 1 else cluster.fused_box
            fused.append(
                Detection(
                    image_id=image_id,
                    box=box,
                    score=cluster.fused_score(weights),
                    prompt_id=ENSEMBLE_PROMPT_ID,
                    label=top.label,
                )
            )
    return nms_per_image(fused, nms_iou)


def fuse_tta(
    original: Sequence[Detection],
    augmented: Iterable[tuple[AugmentationSpec, Sequence[Detection]]],
    nms_iou: float,
) -> list[Detection]:
    """Merge detections from augmented runs back into the original frame.

    Every augmented detection is mapped through the inverse of its
    transform, pooled with the originals, and de-duplicated with NMS.
    Scores are untouched.
    """
    pool = list(original)
    for spec, detections in augmented:
        for det in detections:
            pool.append(
                Detection(
                    image_id=det.image_id,
                    box=deaugment_box(det.box, spec),
                    score=det.score,
                    prompt_id=det.prompt_id,
                    label=det.label,
                    extras=dict(det.extras),
                )
            )
    return nms_per_image(pool, nms_iou)
