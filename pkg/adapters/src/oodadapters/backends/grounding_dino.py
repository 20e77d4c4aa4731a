"""Grounding DINO through the transformers zero-shot detection API."""

from __future__ import annotations

from PIL import Image

from ..config import AdapterError
from .base import RawDetection

DEFAULT_CHECKPOINT = "IDEA-Research/grounding-dino-tiny"


class GroundingDinoBackend:
    def __init__(self, checkpoint: str = "", device: str = "cpu") -> None:
        self.checkpoint = checkpoint or DEFAULT_CHECKPOINT
        self.device = device
        try:
            from transformers import (
                AutoModelForZeroShotObjectDetection,
                AutoProcessor,
            )
        except ImportError as exc:
            raise AdapterError(
                "grounding-dino backend needs transformers and torch "
                "(pip install 'oodeval-adapters[grounding-dino]')"
            ) from exc
        try:
            self.processor = AutoProcessor.from_pretrained(self.checkpoint)
            self.model = AutoModelForZeroShotObjectDetection.from_pretrained(
                self.checkpoint
            ).to(device)
            self.model.eval()
        except Exception as exc:
            raise AdapterError(
                f"grounding-dino checkpoint {self.checkpoint!r} not loadable: {exc}"
            ) from exc

    def detect(self, image: Image.Image, prompt: str) -> list[RawDetection]:
        import torch

        # the grounded pipeline expects lower-cased, period-terminated text
        text = prompt.strip().lower()
        if not text.endswith("."):
            text += "."
        inputs = self.processor(images=image, text=text, return_tensors="pt").to(
            self.device
        )
        with torch.no_grad():
            outputs = self.model(**inputs)
        (result,) = self.processor.post_process_grounded_object_detection(
            outputs,
            inputs.input_ids,
            threshold=0.0,
            text_threshold=0.25,
            target_sizes=[image.size[::-1]],
        )
        detections = []
        for box, score, label in zip(
            result["boxes"].tolist(),
            result["scores"].tolist(),
            result.get("text_labels", result.get("labels", [])),
        ):
            detections.append(
                RawDetection(
                    x1=box[0], y1=box[1], x2=box[2], y2=box[3],
                    score=float(score),
                    label=str(label),
                )
            )
        return detections
