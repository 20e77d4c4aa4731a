"""Evaluation toolkit for prompt-based object detection on
out-of-distribution road-scene benchmarks."""

from .ensemble import ENSEMBLE_PROMPT_ID, FusionCluster, fuse_prompts, fuse_tta
from .geometry import (
    AugmentationKind,
    AugmentationSpec,
    deaugment_box,
    intersection_area,
    iou,
)
from .matching import ConfusionCounts, MatchResult, confusion, match_image
from .metrics import (
    MetricReport,
    SizeBuckets,
    ThresholdSet,
    aggregate_subsets,
    ap_over_thresholds,
    average_precision,
    average_recall_at_k,
    custom_threshold_set,
    evaluate_pool,
    pr_curve,
    size_bucketed_ap,
    threshold_set,
)
from .model import (
    BoundingBox,
    ConfigError,
    DataError,
    Detection,
    EvalConfig,
    GroundTruthObject,
    ImageRecord,
    PromptStream,
    ValidatedDataset,
    filter_by_score,
    validate_dataset,
)
from .roi import (
    ROI_PROMPT_ID,
    RegionOfInterest,
    filter_by_roi,
    roi_from_detections,
    roi_overlap_fraction,
)
from .suppression import nms, nms_per_image, nms_per_prompt

__version__ = "0.1.0"
