"""End-to-end evaluation protocol: filter, suppress, restrict, measure.

Stage order: score filtering first (the threshold governs which
predictions are considered at all), then per-prompt NMS, then optional
region-of-interest filtering, then per-subset metric computation. Images
are independent, so per-image stages may run on a thread pool; results
are merged in input order, keeping every run bit-deterministic regardless
of thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Mapping, Sequence

from .ensemble import fuse_prompts
from .metrics import (
    MetricReport,
    SizeBuckets,
    ThresholdSet,
    aggregate_subsets,
    evaluate_pool,
    threshold_set,
)
from .model import (
    DataError,
    Detection,
    EvalConfig,
    PromptStream,
    ValidatedDataset,
    filter_by_score,
)
from .roi import ROI_PROMPT_ID, RegionOfInterest, filter_by_roi, roi_from_detections
from .suppression import nms


def ap_set_group(primary_id: str) -> list[ThresholdSet]:
    """Report columns to compute for a given primary interval choice.

    The standard choice reports the strict interval plus its 0.50 / 0.75
    single-threshold columns; the low-IoU choices report the full
    low-threshold column group plus the strict interval for reference.
    """
    if primary_id in ("ap50_95", "ap50", "ap75"):
        return [threshold_set("ap50_95"), threshold_set("ap50"), threshold_set("ap75")]
    return [
        threshold_set("ap10"),
        threshold_set("ap10_75"),
        threshold_set("ap20_75"),
        threshold_set("ap50_95"),
    ]


def split_roi_streams(
    streams: Sequence[PromptStream],
) -> tuple[list[PromptStream], PromptStream | None]:
    """Separate the reserved road-region stream from evaluation streams."""
    roi_stream = None
    rest = []
    for stream in streams:
        if stream.prompt_id == ROI_PROMPT_ID:
            roi_stream = stream
        else:
            rest.append(stream)
    return rest, roi_stream


def build_predicted_road_rois(
    roi_stream: PromptStream | None,
    dataset: ValidatedDataset,
    score_floor: float,
) -> dict[str, RegionOfInterest]:
    """Turn road-prompt detections into per-image rectangle regions."""
    if roi_stream is None:
        raise DataError(
            f"roi mode 'predicted-road' needs a stream with prompt_id "
            f"{ROI_PROMPT_ID!r} in the prediction file"
        )
    by_image: dict[str, list[Detection]] = {}
    for det in roi_stream.detections:
        by_image.setdefault(det.image_id, []).append(det)
    regions: dict[str, RegionOfInterest] = {}
    for image_id, dets in by_image.items():
        image = dataset.images.get(image_id)
        if image is None:
            raise DataError(f"road box references unknown image {image_id!r}")
        region = roi_from_detections(dets, image, score_floor)
        if region is not None:
            regions[image_id] = region
    return regions


def _check_known_images(stream: PromptStream, dataset: ValidatedDataset) -> None:
    for det in stream.detections:
        if det.image_id not in dataset.images:
            raise DataError(
                f"prediction in stream {stream.prompt_id!r} references unknown "
                f"image {det.image_id!r}"
            )


def _map_images(groups: list[list[Detection]], fn, threads: int) -> list[list[Detection]]:
    if threads <= 1 or len(groups) <= 1:
        return [fn(g) for g in groups]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, groups))


def prepare_stream(
    stream: PromptStream,
    dataset: ValidatedDataset,
    config: EvalConfig,
    rois: Mapping[str, RegionOfInterest] | None = None,
    threads: int = 1,
) -> PromptStream:
    """Apply score filtering, per-image NMS and ROI filtering to one stream."""
    _check_known_images(stream, dataset)
    scored = filter_by_score(stream.detections, config.score_threshold)
    groups: dict[str, list[Detection]] = {}
    for det in scored:
        groups.setdefault(det.image_id, []).append(det)
    suppressed = _map_images(
        list(groups.values()), lambda g: nms(g, config.nms_iou), threads
    )
    flattened = [det for group in suppressed for det in group]
    if rois:
        flattened = filter_by_roi(flattened, rois, config.roi_fraction)
    return stream.with_detections(flattened)


def evaluate_stream(
    stream: PromptStream,
    dataset: ValidatedDataset,
    config: EvalConfig,
    buckets: SizeBuckets = SizeBuckets(),
) -> list[MetricReport]:
    """Metric reports for one prepared stream: per subset, plus the average.

    Datasets without subset tags produce a single row. Detections are
    assigned to the subset of the image they sit on.
    """
    primary = threshold_set(config.threshold_set_id)
    sets = ap_set_group(config.threshold_set_id)
    subset_ids = dataset.subset_ids
    reports = []
    for subset_id in subset_ids:
        subset_images = set(dataset.subset_images(subset_id))
        detections = [d for d in stream.detections if d.image_id in subset_images]
        report = evaluate_pool(
            detections,
            dataset.subset(subset_id),
            match_iou=config.match_iou,
            ap_sets=sets,
            primary_set=primary,
            buckets=buckets,
            ar_k=config.max_detections_per_image,
            label=stream.prompt_id,
            subset_id=subset_id,
        )
        reports.append(report)
    if len(reports) > 1:
        average = aggregate_subsets(reports)
        reports.append(
            MetricReport(
                label=stream.prompt_id,
                ap=average.ap,
                ap_small=average.ap_small,
                ap_medium=average.ap_medium,
                ap_large=average.ap_large,
                ar_at_k=average.ar_at_k,
                ar_k=average.ar_k,
                counts=average.counts,
                subset_id="average",
            )
        )
    return reports


def evaluate_streams(
    streams: Sequence[PromptStream],
    dataset: ValidatedDataset,
    config: EvalConfig,
    rois: Mapping[str, RegionOfInterest] | None = None,
    threads: int = 1,
) -> list[MetricReport]:
    """The full protocol for every stream: one report row group per prompt."""
    reports: list[MetricReport] = []
    for stream in streams:
        prepared = prepare_stream(stream, dataset, config, rois, threads)
        reports.extend(evaluate_stream(prepared, dataset, config))
    return reports


def fuse_and_prepare(
    streams: Sequence[PromptStream],
    dataset: ValidatedDataset,
    config: EvalConfig,
    threads: int = 1,
) -> PromptStream:
    """Score-filter and suppress each stream, then fuse them into one.

    The fused stream has NOT been through the evaluation pipeline yet; run
    it through prepare_stream/evaluate_stream like any other input so a
    written fusion file and its report stay consistent.
    """
    prepared = [
        prepare_stream(stream, dataset, config, rois=None, threads=threads)
        for stream in streams
    ]
    fused = fuse_prompts(prepared, config.fuse_iou, config.nms_iou)
    return PromptStream(
        prompt_id="ensemble",
        prompt_text=" + ".join(s.prompt_text or s.prompt_id for s in streams),
        weight=1.0,
        detections=tuple(fused),
    )
