import json

import pytest
from PIL import Image

from oodadapters.backends import available_models, create_backend
from oodadapters.backends.synthetic import SyntheticBackend
from oodadapters.config import AdapterConfig, AdapterError
from oodadapters.runner import run_inference


def config(**overrides):
    defaults = dict(model="synthetic", prompts=("foreground objects",))
    defaults.update(overrides)
    return AdapterConfig(**defaults)


class TestAdapterConfig:
    def test_needs_a_prompt(self):
        with pytest.raises(AdapterError):
            AdapterConfig(model="synthetic", prompts=())

    def test_score_floor_range(self):
        with pytest.raises(AdapterError):
            config(score_floor=1.5)

    def test_tta_aliases_normalized(self):
        assert config(tta=("hflip", "rot90")).tta == ("horizontal_flip", "rotate90_cw")

    def test_unknown_tta_kind(self):
        with pytest.raises(AdapterError):
            config(tta=("vflip",))


class TestRegistry:
    def test_all_documented_models_registered(self):
        assert {"grounding-dino", "yolo-world", "mdetr", "omdet", "synthetic"} <= set(
            available_models()
        )

    def test_unknown_model(self):
        with pytest.raises(AdapterError):
            create_backend("imaginary-detector")


class TestSyntheticBackend:
    def test_deterministic_per_image_and_prompt(self, smoke_images):
        backend = SyntheticBackend()
        image = Image.open(next(iter(sorted(smoke_images.iterdir())))).convert("RGB")
        first = backend.detect(image, "objects")
        again = backend.detect(image, "objects")
        other_prompt = backend.detect(image, "road")
        assert first == again
        assert first != other_prompt

    def test_boxes_inside_image(self, smoke_images):
        backend = SyntheticBackend()
        for path in smoke_images.iterdir():
            image = Image.open(path).convert("RGB")
            for det in backend.detect(image, "objects"):
                assert 0 <= det.x1 < det.x2 <= image.width
                assert 0 <= det.y1 < det.y2 <= image.height


class TestRunInference:
    def test_two_prompts_grouped_under_two_streams(self, smoke_images, tmp_path):
        result = run_inference(
            config(prompts=("foreground objects", "objects on road")),
            smoke_images,
            tmp_path / "preds.json",
        )
        payload = json.loads(result.predictions.read_text())
        assert payload["schema_version"] == "1"
        prompt_ids = {entry["prompt_id"] for entry in payload["entries"]}
        assert prompt_ids == {"foreground-objects", "objects-on-road"}

    def test_companion_image_records(self, smoke_images, tmp_path):
        result = run_inference(config(), smoke_images, tmp_path / "preds.json")
        records = json.loads(result.image_records.read_text())["images"]
        assert len(records) == 5
        assert all(r["width"] == 160 and r["height"] == 120 for r in records)

    def test_tta_emits_tagged_files(self, smoke_images, tmp_path):
        result = run_inference(
            config(tta=("hflip",)), smoke_images, tmp_path / "preds.json"
        )
        assert set(result.tta_predictions) == {"horizontal_flip"}
        payload = json.loads(result.tta_predictions["horizontal_flip"].read_text())
        assert payload["augmentation"]["kind"] == "horizontal_flip"
        assert payload["entries"]

    def test_roi_prompt_uses_reserved_stream(self, smoke_images, tmp_path):
        result = run_inference(
            config(roi_prompt="road"), smoke_images, tmp_path / "preds.json"
        )
        payload = json.loads(result.predictions.read_text())
        prompt_ids = {entry["prompt_id"] for entry in payload["entries"]}
        assert "roi" in prompt_ids

    def test_unreadable_image_skipped_into_manifest(self, smoke_images, tmp_path):
        (smoke_images / "broken.png").write_bytes(b"not a png")
        result = run_inference(config(), smoke_images, tmp_path / "preds.json")
        manifest = json.loads(result.manifest.read_text())
        assert manifest["images"] == 5
        assert [s["file"] for s in manifest["skipped"]] == ["broken.png"]

    def test_score_floor_filters(self, smoke_images, tmp_path):
        low = run_inference(
            config(score_floor=0.0), smoke_images, tmp_path / "low.json"
        )
        high = run_inference(
            config(score_floor=0.9), smoke_images, tmp_path / "high.json"
        )
        n_low = len(json.loads(low.predictions.read_text())["entries"])
        n_high = len(json.loads(high.predictions.read_text())["entries"])
        assert n_high < n_low
        assert all(
            e["score"] >= 0.9
            for e in json.loads(high.predictions.read_text())["entries"]
        )

    def test_missing_image_dir(self, tmp_path):
        with pytest.raises(AdapterError):
            run_inference(config(), tmp_path / "nowhere", tmp_path / "preds.json")

    def test_empty_image_dir_emits_empty_entries(self, tmp_path):
        (tmp_path / "empty").mkdir()
        result = run_inference(config(), tmp_path / "empty", tmp_path / "preds.json")
        assert json.loads(result.predictions.read_text())["entries"] == []


class TestOptionalBackends:
    """Each detector plug-in fails in isolation with an actionable error."""

    def test_hf_backends_raise_adapter_error_without_checkpoints(self, monkeypatch):
        monkeypatch.setenv("HF_HUB_OFFLINE", "1")
        monkeypatch.setenv("TRANSFORMERS_OFFLINE", "1")
        for model in ("grounding-dino", "omdet"):
            try:
                create_backend(model)
            except AdapterError as exc:
                assert "not loadable" in str(exc) or "needs" in str(exc)
            else:
                pytest.skip(f"{model} checkpoint available locally")

    def test_yolo_world_requires_ultralytics(self):
        try:
            import ultralytics  # noqa: F401

            pytest.skip("ultralytics installed")
        except ImportError:
            pass
        with pytest.raises(AdapterError, match="ultralytics"):
            create_backend("yolo-world")

    def test_mdetr_wraps_hub_failures(self, monkeypatch):
        import torch.hub

        def boom(*args, **kwargs):
            raise RuntimeError("hub unreachable")

        monkeypatch.setattr(torch.hub, "load", boom)
        with pytest.raises(AdapterError, match="not loadable"):
            create_backend("mdetr")
