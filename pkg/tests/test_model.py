import math

import pytest
from hypothesis import given, strategies as st

from oodeval.model import (
    BoundingBox,
    DataError,
    Detection,
    EvalConfig,
    ConfigError,
    GroundTruthObject,
    ImageRecord,
    PromptStream,
    filter_by_score,
    validate_dataset,
)


def det(score, image_id="img", prompt_id="p", box=None):
    return Detection(
        image_id=image_id,
        box=box or BoundingBox(0, 0, 10, 10),
        score=score,
        prompt_id=prompt_id,
    )


class TestBoundingBox:
    def test_rejects_zero_area(self):
        with pytest.raises(DataError):
            BoundingBox(0, 0, 0, 10)
        with pytest.raises(DataError):
            BoundingBox(5, 5, 5, 5)

    def test_rejects_inverted_corners(self):
        with pytest.raises(DataError):
            BoundingBox(10, 0, 0, 10)

    @pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
    def test_rejects_non_finite(self, bad):
        with pytest.raises(DataError):
            BoundingBox(0, 0, bad, 10)

    def test_xywh_round_trip(self):
        box = BoundingBox.from_xywh(5, 5, 10, 10)
        assert (box.x1, box.y1, box.x2, box.y2) == (5, 5, 15, 15)
        assert box.as_xywh() == [5, 5, 10, 10]


class TestDetection:
    def test_score_range(self):
        with pytest.raises(DataError):
            det(1.5)
        with pytest.raises(DataError):
            det(-0.1)
        with pytest.raises(DataError):
            det(math.nan)

    def test_ids_non_empty(self):
        with pytest.raises(DataError):
            det(0.5, image_id="")
        with pytest.raises(DataError):
            det(0.5, prompt_id="")

    def test_extras_read_only(self):
        d = Detection(
            image_id="img",
            box=BoundingBox(0, 0, 1, 1),
            score=0.5,
            prompt_id="p",
            extras={"key": "value"},
        )
        with pytest.raises(TypeError):
            d.extras["key"] = "other"
        assert d.extras == {"key": "value"}


class TestGroundTruthObject:
    def test_area_defaults_to_box_area(self):
        gt = GroundTruthObject(image_id="img", box=BoundingBox(0, 0, 10, 10))
        assert gt.area == 100

    def test_annotated_area_passes_through(self):
        gt = GroundTruthObject(
            image_id="img", box=BoundingBox(0, 0, 10, 10), annotated_area=123.0
        )
        assert gt.area == 123.0

    def test_rejects_nonpositive_area(self):
        with pytest.raises(DataError):
            GroundTruthObject(
                image_id="img", box=BoundingBox(0, 0, 10, 10), annotated_area=0.0
            )


class TestPromptStream:
    def test_rejects_foreign_detection(self):
        with pytest.raises(DataError):
            PromptStream(prompt_id="a", detections=(det(0.5, prompt_id="b"),))

    def test_rejects_negative_weight(self):
        with pytest.raises(DataError):
            PromptStream(prompt_id="a", weight=-0.5)


class TestEvalConfig:
    def test_defaults_valid(self):
        EvalConfig()

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"score_threshold": 1.5},
            {"match_iou": 0.0},
            {"nms_iou": 1.2},
            {"fuse_iou": -0.1},
            {"roi_fraction": 2.0},
            {"max_detections_per_image": 0},
        ],
    )
    def test_rejects_out_of_range(self, kwargs):
        with pytest.raises(ConfigError):
            EvalConfig(**kwargs)


class TestValidateDataset:
    def test_well_formed(self):
        gt = GroundTruthObject(image_id="a", box=BoundingBox(1, 1, 5, 5))
        dataset = validate_dataset([gt], [ImageRecord("a", 10, 10)])
        assert len(dataset.ground_truth) == 1
        assert dataset.warnings == ()

    def test_unknown_image(self):
        gt = GroundTruthObject(image_id="ghost", box=BoundingBox(1, 1, 5, 5))
        with pytest.raises(DataError, match="unknown image"):
            validate_dataset([gt], [ImageRecord("a", 10, 10)])

    def test_clamps_half_pixel_overflow(self):
        gt = GroundTruthObject(image_id="a", box=BoundingBox(1, 1, 10.5, 5))
        dataset = validate_dataset([gt], [ImageRecord("a", 10, 10)])
        assert dataset.ground_truth[0].box.x2 == 10.0
        assert len(dataset.warnings) == 1

    def test_clamped_derived_area_recomputed(self):
        gt = GroundTruthObject(image_id="a", box=BoundingBox(0, 0, 10.5, 10))
        dataset = validate_dataset([gt], [ImageRecord("a", 10, 10)])
        assert dataset.ground_truth[0].area == 100.0

    def test_clamp_keeps_annotated_area(self):
        gt = GroundTruthObject(
            image_id="a", box=BoundingBox(0, 0, 10.5, 10), annotated_area=99.0
        )
        dataset = validate_dataset([gt], [ImageRecord("a", 10, 10)])
        assert dataset.ground_truth[0].area == 99.0

    def test_rejects_large_overflow(self):
        gt = GroundTruthObject(image_id="a", box=BoundingBox(1, 1, 12, 5))
        with pytest.raises(DataError, match="exceeds bounds"):
            validate_dataset([gt], [ImageRecord("a", 10, 10)])

    def test_rejects_duplicate_image_ids(self):
        with pytest.raises(DataError, match="duplicate"):
            validate_dataset([], [ImageRecord("a", 10, 10), ImageRecord("a", 5, 5)])

    def test_idempotent(self):
        gt = [
            GroundTruthObject(image_id="a", box=BoundingBox(0, 0, 10.5, 10)),
            GroundTruthObject(image_id="b", box=BoundingBox(2, 2, 8, 9), subset_id="s1"),
        ]
        images = [ImageRecord("a", 10, 10), ImageRecord("b", 20, 20)]
        once = validate_dataset(gt, images)
        twice = validate_dataset(once.ground_truth, once.images.values())
        assert twice.ground_truth == once.ground_truth
        assert twice.warnings == ()

    def test_subset_indexing(self):
        gt = [
            GroundTruthObject(image_id="a", box=BoundingBox(0, 0, 5, 5), subset_id="s1"),
            GroundTruthObject(image_id="b", box=BoundingBox(0, 0, 5, 5), subset_id="s2"),
            GroundTruthObject(image_id="a", box=BoundingBox(6, 6, 9, 9), subset_id="s1"),
        ]
        images = [ImageRecord("a", 10, 10), ImageRecord("b", 10, 10)]
        dataset = validate_dataset(gt, images)
        assert dataset.subset_ids == ("s1", "s2")
        assert len(dataset.subset("s1")) == 2
        assert dataset.subset_images("s1") == ("a",)
        assert dataset.by_image("a") == (gt[0], gt[2])

    def test_empty_images_belong_to_their_subset(self):
        # an image without annotations still contributes to its subset
        gt = [GroundTruthObject(image_id="a", box=BoundingBox(0, 0, 5, 5))]
        images = [
            ImageRecord("a", 10, 10, subset_id="s1"),
            ImageRecord("empty", 10, 10, subset_id="s1"),
        ]
        dataset = validate_dataset(gt, images)
        assert dataset.subset_images("s1") == ("a", "empty")
        assert dataset.ground_truth[0].subset_id == "s1"  # inherited

    def test_untagged_dataset_keeps_empty_images(self):
        gt = [GroundTruthObject(image_id="a", box=BoundingBox(0, 0, 5, 5))]
        images = [ImageRecord("a", 10, 10), ImageRecord("empty", 10, 10)]
        dataset = validate_dataset(gt, images)
        assert dataset.subset_ids == (None,)
        assert dataset.subset_images(None) == ("a", "empty")

    def test_objects_adopt_subset_regardless_of_order(self):
        # the tagged object comes last; the earlier one must still inherit
        gt = [
            GroundTruthObject(image_id="a", box=BoundingBox(0, 0, 5, 5)),
            GroundTruthObject(image_id="a", box=BoundingBox(6, 6, 9, 9), subset_id="s1"),
        ]
        dataset = validate_dataset(gt, [ImageRecord("a", 10, 10)])
        assert [g.subset_id for g in dataset.ground_truth] == ["s1", "s1"]
        assert dataset.images["a"].subset_id == "s1"

    def test_conflicting_subset_tags_rejected(self):
        gt = [
            GroundTruthObject(image_id="a", box=BoundingBox(0, 0, 5, 5), subset_id="s1"),
            GroundTruthObject(image_id="a", box=BoundingBox(6, 6, 9, 9), subset_id="s2"),
        ]
        with pytest.raises(DataError, match="subset"):
            validate_dataset(gt, [ImageRecord("a", 10, 10)])


class TestFilterByScore:
    def test_inclusive_threshold(self):
        dets = [det(0.05), det(0.10), det(0.90)]
        kept = filter_by_score(dets, 0.1)
        assert [d.score for d in kept] == [0.10, 0.90]

    def test_zero_threshold_is_identity(self):
        dets = [det(0.0), det(0.5)]
        assert filter_by_score(dets, 0.0) == dets

    def test_empty_input(self):
        assert filter_by_score([], 0.5) == []

    @given(
        scores=st.lists(st.floats(min_value=0, max_value=1), max_size=30),
        threshold=st.floats(min_value=0, max_value=1),
    )
    def test_subsequence_and_idempotent(self, scores, threshold):
        dets = [det(s) for s in scores]
        once = filter_by_score(dets, threshold)
        # subsequence of the input
        it = iter(dets)
        assert all(any(d is candidate for candidate in it) for d in once)
        assert filter_by_score(once, threshold) == once
