"""Command-line interface: each pipeline stage as a composable subcommand.

Exit codes: 0 success, 1 data error, 2 configuration/usage error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

from . import io_formats
from .geometry import AugmentationKind, AugmentationSpec
from .ensemble import fuse_tta
from .io_formats import RunConfig
from .metrics import SizeBuckets
from .model import (
    ConfigError,
    DataError,
    EvalConfig,
    PromptStream,
    ValidatedDataset,
    validate_dataset,
)
from .pipeline import (
    build_predicted_road_rois,
    evaluate_stream,
    evaluate_streams,
    fuse_and_prepare,
    prepare_stream,
    split_roi_streams,
)

_AUGMENTATION_ALIASES = {
    "identity": AugmentationKind.IDENTITY,
    "hflip": AugmentationKind.HORIZONTAL_FLIP,
    "horizontal_flip": AugmentationKind.HORIZONTAL_FLIP,
    "rot90": AugmentationKind.ROTATE90_CW,
    "rot90cw": AugmentationKind.ROTATE90_CW,
    "rotate90_cw": AugmentationKind.ROTATE90_CW,
    "rot90ccw": AugmentationKind.ROTATE90_CCW,
    "rotate90_ccw": AugmentationKind.ROTATE90_CCW,
}


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="run configuration file (JSON)")
    parser.add_argument("--predictions", help="prediction file")
    parser.add_argument("--ground-truth", dest="ground_truth", help="annotation file")
    parser.add_argument("--images", help="standalone image-record file")
    parser.add_argument("--out-dir", dest="output_dir", help="output directory")
    parser.add_argument("--score-threshold", type=float, dest="score_threshold")
    parser.add_argument("--match-iou", type=float, dest="match_iou")
    parser.add_argument("--nms-iou", type=float, dest="nms_iou")
    parser.add_argument("--fuse-iou", type=float, dest="fuse_iou")
    parser.add_argument(
        "--roi-mode",
        dest="roi_mode",
        choices=["none", "mask-dir", "predicted-road"],
    )
    parser.add_argument("--roi-fraction", type=float, dest="roi_fraction")
    parser.add_argument("--roi-mask-dir", dest="roi_mask_dir")
    parser.add_argument("--roi-score-floor", type=float, dest="roi_score_floor")
    parser.add_argument(
        "--threshold-set",
        dest="threshold_set",
        choices=["ap50_95", "ap10", "ap10_75", "ap20_75"],
    )
    parser.add_argument("--max-dets", type=int, dest="max_detections")
    parser.add_argument("--format", dest="report_format", choices=["csv", "md"])
    parser.add_argument("--threads", type=int)


def _run_config(args: argparse.Namespace) -> RunConfig:
    overrides = {
        name: getattr(args, name, None)
        for name in (
            "predictions",
            "ground_truth",
            "images",
            "output_dir",
            "score_threshold",
            "match_iou",
            "nms_iou",
            "fuse_iou",
            "roi_mode",
            "roi_fraction",
            "roi_mask_dir",
            "roi_score_floor",
            "threshold_set",
            "max_detections",
            "report_format",
            "threads",
        )
    }
    if args.config:
        return RunConfig.from_file(args.config, **overrides)
    return RunConfig(**{k: v for k, v in overrides.items() if v is not None})


def _eval_config(config: RunConfig) -> EvalConfig:
    return EvalConfig(
        score_threshold=config.score_threshold,
        match_iou=config.match_iou,
        nms_iou=config.nms_iou,
        fuse_iou=config.fuse_iou,
        roi_fraction=config.roi_fraction,
        threshold_set_id=config.threshold_set,
        max_detections_per_image=config.max_detections,
    )


def _load_dataset(config: RunConfig) -> ValidatedDataset:
    if not config.ground_truth:
        raise ConfigError("this command needs --ground-truth")
    objects, images = io_formats.load_ground_truth(config.ground_truth)
    return validate_dataset(objects, images)


def _load_streams(config: RunConfig) -> list[PromptStream]:
    if not config.predictions:
        raise ConfigError("this command needs --predictions")
    return io_formats.load_predictions(config.predictions)


def _apply_weights(
    streams: list[PromptStream],
    config: RunConfig,
    weights_flag: str | None,
) -> list[PromptStream]:
    """Attach ensemble weights: --weights by stream order, config by prompt id."""
    if weights_flag:
        try:
            values = [float(v) for v in weights_flag.split(",")]
        except ValueError:
            raise ConfigError(f"bad --weights value {weights_flag!r}") from None
        if len(values) != len(streams):
            raise ConfigError(
                f"--weights lists {len(values)} values for {len(streams)} streams"
            )
        return [
            PromptStream(s.prompt_id, s.prompt_text, w, s.detections)
            for s, w in zip(streams, values)
        ]
    if config.prompt_weights:
        missing = [s.prompt_id for s in streams if s.prompt_id not in config.prompt_weights]
        if missing:
            raise ConfigError(f"config assigns no weight to prompts {missing}")
        return [
            PromptStream(
                s.prompt_id, s.prompt_text, config.prompt_weights[s.prompt_id], s.detections
            )
            for s in streams
        ]
    return streams


def _build_rois(
    config: RunConfig,
    dataset: ValidatedDataset,
    roi_stream: PromptStream | None,
):
    if config.roi_mode == "none":
        return {}
    if config.roi_mode == "mask-dir":
        if not config.roi_mask_dir:
            raise ConfigError("roi mode 'mask-dir' needs --roi-mask-dir")
        return io_formats.load_roi_masks(config.roi_mask_dir, list(dataset.images.values()))
    return build_predicted_road_rois(roi_stream, dataset, config.roi_score_floor)


def _provenance(config: RunConfig, streams: Sequence[PromptStream]) -> dict[str, str]:
    header = {
        "config_hash": config.content_hash(),
        "config": config.protocol_json(),
    }
    for name in ("predictions", "ground_truth", "images"):
        path = getattr(config, name)
        if path:
            header[f"{name}_sha256"] = io_formats.file_digest(path)
    weights = ",".join(f"{s.prompt_id}={s.weight:g}" for s in streams)
    if weights:
        header["weights"] = weights
    return header


def _size_histogram(dataset: ValidatedDataset) -> dict[str, int]:
    buckets = SizeBuckets()
    histogram = {"small": 0, "medium": 0, "large": 0}
    for obj in dataset.ground_truth:
        for name in histogram:
            lo, hi = buckets.bounds(name)
            if lo < obj.area <= hi:
                histogram[name] += 1
                break
    return histogram


def cmd_validate(args: argparse.Namespace) -> int:
    """Load and cross-check all configured inputs; summarize the dataset."""
    config = _run_config(args)
    warnings = 0
    dataset = None
    if config.ground_truth:
        dataset = _load_dataset(config)
        warnings += len(dataset.warnings)
        histogram = _size_histogram(dataset)
        print(f"images: {len(dataset.images)}")
        print(f"objects: {len(dataset.ground_truth)}")
        for subset_id in dataset.subset_ids:
            name = subset_id if subset_id is not None else "(untagged)"
            print(f"  subset {name}: {len(dataset.subset(subset_id))} objects")
        print(
            "size buckets: "
            f"small={histogram['small']} medium={histogram['medium']} "
            f"large={histogram['large']}"
        )
    elif config.images:
        records = io_formats.load_image_records(config.images)
        dataset = validate_dataset([], records)
        print(f"images: {len(records)}")
        print("objects: 0")

    if config.predictions:
        streams = io_formats.load_predictions(config.predictions)
        total = sum(len(s.detections) for s in streams)
        print(f"prediction streams: {len(streams)} ({total} detections)")
        for stream in streams:
            print(f"  prompt {stream.prompt_id!r}: {len(stream.detections)} detections")
        if dataset is not None:
            for stream in streams:
                for det in stream.detections:
                    if det.image_id not in dataset.images:
                        raise DataError(
                            f"prediction in stream {stream.prompt_id!r} references "
                            f"unknown image {det.image_id!r}"
                        )
    if not config.ground_truth and not config.predictions and not config.images:
        raise ConfigError("nothing to validate: give --ground-truth, --predictions or --images")
    print(f"warnings: {warnings}")
    print("ok")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    """Score filter, per-prompt NMS, optional ROI filter, metrics, report."""
    config = _run_config(args)
    dataset = _load_dataset(config)
    eval_config = _eval_config(config)
    streams, roi_stream = split_roi_streams(_load_streams(config))
    if not streams:
        raise DataError("prediction file holds no evaluable streams")
    rois = _build_rois(config, dataset, roi_stream)
    reports = evaluate_streams(streams, dataset, eval_config, rois, config.threads)

    out = Path(config.output_dir) / f"report.{config.report_format}"
    io_formats.write_report(
        reports, config.report_format, out, _provenance(config, streams)
    )
    print(f"wrote {out}")
    return 0


def cmd_fuse(args: argparse.Namespace) -> int:
    """Fuse >= 2 prompt streams by weighted confidence averaging, then evaluate."""
    config = _run_config(args)
    dataset = _load_dataset(config)
    eval_config = _eval_config(config)
    streams, roi_stream = split_roi_streams(_load_streams(config))
    if len(streams) < 2:
        raise ConfigError(f"fusion needs at least 2 prompt streams, found {len(streams)}")
    rois = _build_rois(config, dataset, roi_stream)

    sweeps: list[tuple[str, str | None]]
    if args.weight_sweep:
        sweeps = [(pair.strip(), pair.strip()) for pair in args.weight_sweep.split(";") if pair.strip()]
        if not sweeps:
            raise ConfigError(f"empty --weight-sweep value {args.weight_sweep!r}")
    else:
        sweeps = [(args.weights, None)]

    for weights_flag, tag in sweeps:
        weighted = _apply_weights(streams, config, weights_flag)
        fused = fuse_and_prepare(weighted, dataset, eval_config, config.threads)
        suffix = f"_{tag.replace(',', '-')}" if tag else ""
        fused_path = Path(config.output_dir) / f"fused{suffix}.json"
        # the road-region stream rides along so the emitted file can be
        # re-evaluated under the same roi mode it was fused for
        emitted = [fused] if roi_stream is None else [fused, roi_stream]
        io_formats.write_predictions(emitted, fused_path)

        prepared = prepare_stream(fused, dataset, eval_config, rois, config.threads)
        reports = evaluate_stream(prepared, dataset, eval_config)
        report_path = Path(config.output_dir) / f"report{suffix}.{config.report_format}"
        io_formats.write_report(
            reports, config.report_format, report_path, _provenance(config, weighted)
        )
        print(f"wrote {fused_path}")
        print(f"wrote {report_path}")
    return 0


def cmd_tta_merge(args: argparse.Namespace) -> int:
    """De-augment detections from augmented runs and merge them with originals."""
    config = _run_config(args)
    if config.ground_truth:
        records = io_formats.load_ground_truth(config.ground_truth)[1]
    elif config.images:
        records = io_formats.load_image_records(config.images)
    else:
        raise ConfigError("tta-merge needs --images (or --ground-truth) for image sizes")
    images = {r.image_id: r for r in records}
    eval_config = _eval_config(config)

    original = [
        det
        for stream in _load_streams(config)
        for det in stream.detections
    ]

    augmented: list[tuple[AugmentationSpec, list]] = []
    for item in args.augmented or []:
        kind_name, _, path = item.partition("=")
        kind = _AUGMENTATION_ALIASES.get(kind_name.strip().lower())
        if kind is None or not path:
            raise ConfigError(
                f"bad --augmented value {item!r}; expected KIND=FILE with KIND in "
                f"{sorted(set(_AUGMENTATION_ALIASES))}"
            )
        for stream in io_formats.load_predictions(path):
            by_image: dict[str, list] = {}
            for det in stream.detections:
                by_image.setdefault(det.image_id, []).append(det)
            for image_id, dets in by_image.items():
                record = images.get(image_id)
                if record is None:
                    raise DataError(
                        f"augmented prediction references unknown image {image_id!r}"
                    )
                spec = AugmentationSpec(
                    kind=kind,
                    reference_width=record.width,
                    reference_height=record.height,
                )
                augmented.append((spec, dets))

    # NMS stays per prompt: augmented variants only merge into their own stream
    prompt_ids: dict[str, None] = {}
    for det in original:
        prompt_ids.setdefault(det.prompt_id)
    for _, dets in augmented:
        for det in dets:
            prompt_ids.setdefault(det.prompt_id)
    merged = []
    for prompt_id in prompt_ids:
        merged.extend(
            fuse_tta(
                [d for d in original if d.prompt_id == prompt_id],
                [
                    (spec, [d for d in dets if d.prompt_id == prompt_id])
                    for spec, dets in augmented
                ],
                eval_config.nms_iou,
            )
        )

    out = Path(args.out or Path(config.output_dir) / "merged.json")
    io_formats.write_predictions(merged, out)
    print(f"wrote {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oodeval",
        description=(
            "Evaluate prompt-based object detections on out-of-distribution "
            "road-scene benchmarks"
        ),
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    p_validate = subparsers.add_parser("validate", help="check inputs and summarize")
    _add_common_flags(p_validate)
    p_validate.set_defaults(func=cmd_validate)

    p_evaluate = subparsers.add_parser("evaluate", help="run the evaluation protocol")
    _add_common_flags(p_evaluate)
    p_evaluate.set_defaults(func=cmd_evaluate)

    p_fuse = subparsers.add_parser("fuse", help="fuse prompt streams, then evaluate")
    _add_common_flags(p_fuse)
    p_fuse.add_argument("--weights", help="comma-separated weights, one per stream")
    p_fuse.add_argument(
        "--weight-sweep",
        dest="weight_sweep",
        help="semicolon-separated weight tuples; one report per tuple",
    )
    p_fuse.set_defaults(func=cmd_fuse)

    p_tta = subparsers.add_parser(
        "tta-merge", help="merge augmented-run detections into the original frame"
    )
    _add_common_flags(p_tta)
    p_tta.add_argument(
        "--augmented",
        action="append",
        metavar="KIND=FILE",
        help="augmented prediction file and its transform (repeatable)",
    )
    p_tta.add_argument("--out", help="merged prediction file path")
    p_tta.set_defaults(func=cmd_tta_merge)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
