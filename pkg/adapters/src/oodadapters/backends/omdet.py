"""OmDet-Turbo through the transformers zero-shot detection API."""

from __future__ import annotations

from PIL import Image

from ..config import AdapterError
from .base import RawDetection

DEFAULT_CHECKPOINT = "omlab/omdet-turbo-swin-tiny-hf"


class OmdetBackend:
    def __init__(self, checkpoint: str = "", device: str = "cpu") -> None:
        self.checkpoint = checkpoint or DEFAULT_CHECKPOINT
        self.device = device
        try:
            from transformers import (
                OmDetTurboForObjectDetection,
                OmDetTurboProcessor,
            )
        except ImportError as exc:
            raise AdapterError(
                "omdet backend needs transformers>=4.45 and torch "
                "(pip install 'oodeval-adapters[omdet]')"
            ) from exc
        try:
            self.processor = OmDetTurboProcessor.from_pretrained(self.checkpoint)
            self.model = OmDetTurboForObjectDetection.from_pretrained(
                self.checkpoint
            ).to(device)
            self.model.eval()
        except Exception as exc:
            raise AdapterError(
                f"omdet checkpoint {self.checkpoint!r} not loadable: {exc}"
            ) from exc

    def detect(self, image: Image.Image, prompt: str) -> list[RawDetection]:
        import torch

        inputs = self.processor(image, text=[prompt], return_tensors="pt").to(
            self.device
        )
        with torch.no_grad():
            outputs = self.model(**inputs)
        # nms_threshold 1.0: suppression belongs to the evaluation toolkit
        (result,) = self.processor.post_process_grounded_object_detection(
            outputs,
            text_labels=[[prompt]],
            target_sizes=[image.size[::-1]],
            threshold=0.0,
            nms_threshold=1.0,
        )
        detections = []
        for box, score, label in zip(
            result["boxes"].tolist(),
            result["scores"].tolist(),
            result.get("text_labels", result.get("classes", [])),
        ):
            detections.append(
                RawDetection(
                    x1=box[0], y1=box[1], x2=box[2], y2=box[3],
                    score=float(score),
                    label=str(label),
                )
            )
        return detections
