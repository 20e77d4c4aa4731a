"""COCO-style interpolated average precision over configurable IoU intervals.

The evaluation pools detections across images, matches them per image with
the greedy rule from :mod:`oodeval.matching`, ranks the pool by descending
score, and integrates precision over 101 evenly spaced recall points.
Interval metrics average the interpolated AP over a set of IoU matching
thresholds (0.05 steps). Metrics that cannot be computed (no ground truth
in scope) are reported as None, never as 0, so averages are not deflated.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .matching import ConfusionCounts
from .model import ConfigError, DataError, Detection, GroundTruthObject
from .geometry import iou
from .suppression import detection_order

RECALL_POINTS = tuple(i / 100 for i in range(101))


def _percent_range(lo: int, hi: int) -> tuple[float, ...]:
    """IoU thresholds lo%..hi% in 5-point steps, as exact hundredths."""
    return tuple(t / 100 for t in range(lo, hi + 1, 5))


@dataclass(frozen=True)
class ThresholdSet:
    """A named, sorted set of IoU matching thresholds to average AP over."""

    id: str
    thresholds: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.thresholds:
            raise ConfigError("threshold set must be non-empty")
        previous = 0.0
        for t in self.thresholds:
            if not 0.0 < t <= 1.0:
                raise ConfigError(f"threshold out of (0, 1]: {t}")
            if t <= previous:
                raise ConfigError("thresholds must be strictly increasing")
            previous = t


NAMED_THRESHOLD_SETS: Mapping[str, ThresholdSet] = {
    "ap50_95": ThresholdSet("ap50_95", _percent_range(50, 95)),
    "ap10": ThresholdSet("ap10", _percent_range(10, 10)),
    "ap10_75": ThresholdSet("ap10_75", _percent_range(10, 75)),
    "ap20_75": ThresholdSet("ap20_75", _percent_range(20, 75)),
    "ap50": ThresholdSet("ap50", _percent_range(50, 50)),
    "ap75": ThresholdSet("ap75", _percent_range(75, 75)),
}


def threshold_set(name: str) -> ThresholdSet:
    try:
        return NAMED_THRESHOLD_SETS[name]
    except KeyError:
        raise ConfigError(
            f"unknown threshold set {name!r}; expected one of "
            f"{sorted(NAMED_THRESHOLD_SETS)}"
        ) from None


def custom_threshold_set(thresholds: Iterable[float]) -> ThresholdSet:
    return ThresholdSet("custom", tuple(sorted(thresholds)))


@dataclass(frozen=True)
class SizeBuckets:
    """Area boundaries splitting ground truth into small/medium/large.

    Buckets are half-open: small is area <= small_max, medium is
    (small_max, medium_max], large is everything above.
    """

    small_max: float = 32.0**2
    medium_max: float = 96.0**2

    def __post_init__(self) -> None:
        if not 0.0 < self.small_max < self.medium_max:
            raise ConfigError(
                f"need 0 < small_max < medium_max, got {self.small_max}, {self.medium_max}"
            )

    def bounds(self, bucket: str) -> tuple[float, float]:
        if bucket == "small":
            return (0.0, self.small_max)
        if bucket == "medium":
            return (self.small_max, self.medium_max)
        if bucket == "large":
            return (self.medium_max, math.inf)
        raise ConfigError(f"unknown size bucket {bucket!r}")


@dataclass(frozen=True)
class MetricReport:
    """Every metric of one evaluation run; None marks an undefined value."""

    label: str
    ap: dict[str, float | None] = field(default_factory=dict)
    ap_small: float | None = None
    ap_medium: float | None = None
    ap_large: float | None = None
    ar_at_k: float | None = None
    ar_k: int | None = None
    counts: ConfusionCounts = ConfusionCounts()
    subset_id: str | None = None

    def __post_init__(self) -> None:
        for name, value in self.metric_values():
            if value is None:
                continue
            if not -1e-9 <= value <= 1.0 + 1e-9:
                raise DataError(f"{name} out of [0, 1]: {value}")

    def metric_values(self) -> list[tuple[str, float | None]]:
        pairs = [(f"ap[{key}]", value) for key, value in self.ap.items()]
        pairs += [
            ("ap_small", self.ap_small),
            ("ap_medium", self.ap_medium),
            ("ap_large", self.ap_large),
            ("ar_at_k", self.ar_at_k),
        ]
        return pairs


class _Pool:
    """Detections and ground truth grouped per image, with cached IoU."""

    def __init__(
        self,
        detections: Sequence[Detection],
        ground_truth: Sequence[GroundTruthObject],
    ) -> None:
        self.npos = len(ground_truth)
        order = detection_order(detections)
        self.images: dict[str, dict] = {}
        # detection-less images matter too: their ground truth still counts
        for gt in ground_truth:
            slot = self.images.setdefault(gt.image_id, {"dets": [], "gts": [], "iou": []})
            slot["gts"].append(gt)
        self.sequence: list[tuple[str, int]] = []  # (image_id, local det index)
        for det_index in order:
            det = detections[det_index]
            slot = self.images.setdefault(det.image_id, {"dets": [], "gts": [], "iou": []})
            local = len(slot["dets"])
            slot["dets"].append(det)
            slot["iou"].append([iou(det.box, g.box) for g in slot["gts"]])
            self.sequence.append((det.image_id, local))
        self._flag_cache: dict[float, list[bool]] = {}
        self._ap_cache: dict[float, float] = {}

    def tp_flags(self, t: float) -> list[bool]:
        """Per-detection TP flags in pooled (descending score) order."""
        cached = self._flag_cache.get(t)
        if cached is not None:
            return cached
        flags_by_image: dict[str, list[bool]] = {}
        for image_id, slot in self.images.items():
            taken = [False] * len(slot["gts"])
            local_flags = []
            for local, ious in enumerate(slot["iou"]):
                best_gt, best_iou = -1, 0.0
                for gt_index, overlap in enumerate(ious):
                    if taken[gt_index]:
                        continue
                    if overlap >= t and overlap > best_iou:
                        best_iou, best_gt = overlap, gt_index
                if best_gt >= 0:
                    taken[best_gt] = True
                local_flags.append(best_gt >= 0)
            flags_by_image[image_id] = local_flags
        flags = [flags_by_image[img][local] for img, local in self.sequence]
        self._flag_cache[t] = flags
        return flags

    def ap(self, t: float) -> float:
        cached = self._ap_cache.get(t)
        if cached is None:
            cached = average_precision(_curve_from_flags(self.tp_flags(t), self.npos))
            self._ap_cache[t] = cached
        return cached

    def bucket_outcomes(self, t: float, lo: float, hi: float) -> tuple[list[str], int]:
        """Flags 'tp'/'fp'/'ignore' in pooled order, plus in-bucket GT count.

        Ground truth outside (lo, hi] only absorbs detections: a detection
        whose best free match is out-of-bucket is dropped from the pool
        instead of counting as a false positive. In-bucket matches are
        preferred over out-of-bucket ones.
        """
        npos = 0
        outcome_by_image: dict[str, list[str]] = {}
        for image_id, slot in self.images.items():
            in_bucket = [lo < g.area <= hi for g in slot["gts"]]
            npos += sum(in_bucket)
            taken = [False] * len(slot["gts"])
            outcomes = []
            for ious in slot["iou"]:
                match = -1
                for phase_in_bucket in (True, False):
                    best_iou = 0.0
                    for gt_index, overlap in enumerate(ious):
                        if taken[gt_index] or in_bucket[gt_index] != phase_in_bucket:
                            continue
                        if overlap >= t and overlap > best_iou:
                            best_iou, match = overlap, gt_index
                    if match >= 0:
                        break
                if match >= 0:
                    taken[match] = True
                    outcomes.append("tp" if in_bucket[match] else "ignore")
                else:
                    outcomes.append("fp")
            outcome_by_image[image_id] = outcomes
        pooled = [outcome_by_image[img][local] for img, local in self.sequence]
        return pooled, npos

    def bucket_ap(self, t: float, lo: float, hi: float) -> float | None:
        outcomes, npos = self.bucket_outcomes(t, lo, hi)
        if npos == 0:
            return None
        flags = [o == "tp" for o in outcomes if o != "ignore"]
        return average_precision(_curve_from_flags(flags, npos))

    def matched_within_top_k(self, t: float, k: int) -> int:
        """Total ground truth matched when each image keeps its k best detections."""
        total = 0
        for slot in self.images.values():
            taken = [False] * len(slot["gts"])
            for ious in slot["iou"][:k]:
                best_gt, best_iou = -1, 0.0
                for gt_index, overlap in enumerate(ious):
                    if taken[gt_index]:
                        continue
                    if overlap >= t and overlap > best_iou:
                        best_iou, best_gt = overlap, gt_index
                if best_gt >= 0:
                    taken[best_gt] = True
                    total += 1
        return total


def _curve_from_flags(tp_flags: Sequence[bool], npos: int) -> list[tuple[float, float]]:
    points = []
    tp = 0
    for rank, flag in enumerate(tp_flags, start=1):
        tp += flag
        points.append((tp / rank, tp / npos))
    return points


def pr_curve(
    detections: Sequence[Detection],
    ground_truth: Sequence[GroundTruthObject],
    iou_threshold: float,
) -> list[tuple[float, float]]:
    """Ranked (precision, recall) points over the pooled dataset.

    The k-th point reflects the k highest-scored detections across all
    images: precision TP@k / k, recall TP@k / total ground truth.
    """
    if not ground_truth:
        raise DataError("precision-recall curve needs at least one ground-truth object")
    pool = _Pool(detections, ground_truth)
    return _curve_from_flags(pool.tp_flags(iou_threshold), pool.npos)


def average_precision(curve: Sequence[tuple[float, float]]) -> float:
    """101-point interpolated AP of a ranked (precision, recall) curve.

    AP = mean over r in {0.00, 0.01, ..., 1.00} of the maximum precision
    among points with recall >= r (0 where recall never reaches r).
    """
    if not curve:
        return 0.0
    interpolated = [0.0] * len(curve)
    best = 0.0
    for index in range(len(curve) - 1, -1, -1):
        best = max(best, curve[index][0])
        interpolated[index] = best
    recalls = [r for _, r in curve]
    total = 0.0
    for r in RECALL_POINTS:
        index = bisect_left(recalls, r)
        if index < len(recalls):
            total += interpolated[index]
    return total / len(RECALL_POINTS)


def ap_over_thresholds(
    detections: Sequence[Detection],
    ground_truth: Sequence[GroundTruthObject],
    thresholds: ThresholdSet,
) -> float | None:
    """Mean AP over the set's IoU thresholds; None when no ground truth."""
    if not ground_truth:
        return None
    pool = _Pool(detections, ground_truth)
    return math.fsum(pool.ap(t) for t in thresholds.thresholds) / len(
        thresholds.thresholds
    )


def size_bucketed_ap(
    detections: Sequence[Detection],
    ground_truth: Sequence[GroundTruthObject],
    buckets: SizeBuckets,
    thresholds: ThresholdSet,
) -> tuple[float | None, float | None, float | None]:
    """AP restricted to small/medium/large ground truth, in that order."""
    pool = _Pool(detections, ground_truth)
    results = []
    for bucket in ("small", "medium", "large"):
        lo, hi = buckets.bounds(bucket)
        values = [pool.bucket_ap(t, lo, hi) for t in thresholds.thresholds]
        if any(v is None for v in values):
            results.append(None)
        else:
            results.append(math.fsum(values) / len(values))
    return tuple(results)


def average_recall_at_k(
    detections: Sequence[Detection],
    ground_truth: Sequence[GroundTruthObject],
    k: int,
) -> float | None:
    """Recall with at most k detections per image, averaged over the
    ap50_95 thresholds; None when no ground truth."""
    if k < 1:
        raise ConfigError(f"k must be >= 1: {k}")
    if not ground_truth:
        return None
    pool = _Pool(detections, ground_truth)
    thresholds = NAMED_THRESHOLD_SETS["ap50_95"].thresholds
    recalls = [pool.matched_within_top_k(t, k) / pool.npos for t in thresholds]
    return math.fsum(recalls) / len(recalls)


def evaluate_pool(
    detections: Sequence[Detection],
    ground_truth: Sequence[GroundTruthObject],
    *,
    match_iou: float,
    ap_sets: Sequence[ThresholdSet],
    primary_set: ThresholdSet,
    buckets: SizeBuckets = SizeBuckets(),
    ar_k: int | None = None,
    label: str = "",
    subset_id: str | None = None,
) -> MetricReport:
    """Assemble the full metric report for one pool of detections.

    The IoU matrices are computed once and shared across every threshold,
    so evaluating several overlapping interval sets costs little extra.
    """
    pool = _Pool(detections, ground_truth)

    ap_values: dict[str, float | None] = {}
    for ap_set in ap_sets:
        if pool.npos == 0:
            ap_values[ap_set.id] = None
        else:
            ap_values[ap_set.id] = math.fsum(
                pool.ap(t) for t in ap_set.thresholds
            ) / len(ap_set.thresholds)

    bucket_aps: dict[str, float | None] = {}
    for bucket in ("small", "medium", "large"):
        lo, hi = buckets.bounds(bucket)
        values = [pool.bucket_ap(t, lo, hi) for t in primary_set.thresholds]
        bucket_aps[bucket] = (
            None
            if any(v is None for v in values)
            else math.fsum(values) / len(values)
        )

    ar_value: float | None = None
    if ar_k is not None and pool.npos > 0:
        thresholds = NAMED_THRESHOLD_SETS["ap50_95"].thresholds
        ar_value = math.fsum(
            pool.matched_within_top_k(t, ar_k) / pool.npos for t in thresholds
        ) / len(thresholds)

    tp = sum(pool.tp_flags(match_iou))
    counts = ConfusionCounts(tp=tp, fp=len(detections) - tp, fn=pool.npos - tp)

    return MetricReport(
        label=label,
        ap=ap_values,
        ap_small=bucket_aps["small"],
        ap_medium=bucket_aps["medium"],
        ap_large=bucket_aps["large"],
        ar_at_k=ar_value,
        ar_k=ar_k,
        counts=counts,
        subset_id=subset_id,
    )


def _round_half_away(value: float) -> int:
    return int(math.floor(value + 0.5)) if value >= 0 else -int(math.floor(-value + 0.5))


def _mean_defined(values: Sequence[float | None]) -> float | None:
    defined = [v for v in values if v is not None]
    if not defined:
        return None
    return math.fsum(defined) / len(defined)


def aggregate_subsets(reports: Sequence[MetricReport]) -> MetricReport:
    """Unweighted mean of per-subset reports.

    Undefined values are excluded from each mean; TP/FP/FN are averaged
    and rounded to the nearest integer (half away from zero), matching how
    combined results are reported over location subsets.
    """
    if not reports:
        raise DataError("nothing to aggregate")
    if len(reports) == 1:
        return reports[0]
    subset_ids = [r.subset_id for r in reports]
    if len(set(subset_ids)) != len(subset_ids):
        raise DataError(f"subset ids must be distinct, got {subset_ids}")
    keys = list(reports[0].ap.keys())
    for report in reports[1:]:
        if list(report.ap.keys()) != keys:
            raise DataError("reports carry different AP columns; cannot aggregate")
    ar_ks = {r.ar_k for r in reports}
    if len(ar_ks) != 1:
        raise DataError(f"reports disagree on AR k: {sorted(map(str, ar_ks))}")

    n = len(reports)
    counts = ConfusionCounts(
        tp=_round_half_away(sum(r.counts.tp for r in reports) / n),
        fp=_round_half_away(sum(r.counts.fp for r in reports) / n),
        fn=_round_half_away(sum(r.counts.fn for r in reports) / n),
    )
    return MetricReport(
        label="average",
        ap={key: _mean_defined([r.ap[key] for r in reports]) for key in keys},
        ap_small=_mean_defined([r.ap_small for r in reports]),
        ap_medium=_mean_defined([r.ap_medium for r in reports]),
        ap_large=_mean_defined([r.ap_large for r in reports]),
        ar_at_k=_mean_defined([r.ar_at_k for r in reports]),
        ar_k=reports[0].ar_k,
        counts=counts,
        subset_id=None,
    )
