"""YOLO-World through the ultralytics runtime."""

from __future__ import annotations

from PIL import Image

from ..config import AdapterError
from .base import RawDetection

DEFAULT_CHECKPOINT = "yolov8l-worldv2.pt"


class YoloWorldBackend:
    def __init__(self, checkpoint: str = "", device: str = "cpu") -> None:
        self.checkpoint = checkpoint or DEFAULT_CHECKPOINT
        self.device = device
        try:
            from ultralytics import YOLOWorld
        except ImportError as exc:
            raise AdapterError(
                "yolo-world backend needs ultralytics "
                "(pip install 'oodeval-adapters[yolo-world]')"
            ) from exc
        try:
            self.model = YOLOWorld(self.checkpoint)
        except Exception as exc:
            raise AdapterError(
                f"yolo-world checkpoint {self.checkpoint!r} not loadable: {exc}"
            ) from exc

    def detect(self, image: Image.Image, prompt: str) -> list[RawDetection]:
        import numpy as np

        self.model.set_classes([prompt])
        (result,) = self.model.predict(
            np.asarray(image.convert("RGB")),
            conf=0.0,
            device=self.device,
            verbose=False,
        )
        detections = []
        for box, score in zip(
            result.boxes.xyxy.tolist(), result.boxes.conf.tolist()
        ):
            detections.append(
                RawDetection(
                    x1=box[0], y1=box[1], x2=box[2], y2=box[3],
                    score=float(score),
                    label=prompt,
                )
            )
        return detections
