"""MDETR via torch.hub (the original research checkpoints)."""

from __future__ import annotations

from PIL import Image

from ..config import AdapterError
from .base import RawDetection

DEFAULT_CHECKPOINT = "mdetr_efficientnetB5"
_HUB_REPO = "ashkamath/mdetr:main"


class MdetrBackend:
    def __init__(self, checkpoint: str = "", device: str = "cpu") -> None:
        self.checkpoint = checkpoint or DEFAULT_CHECKPOINT
        self.device = device
        try:
            import torch
            import torchvision.transforms as T
        except ImportError as exc:
            raise AdapterError(
                "mdetr backend needs torch and torchvision "
                "(pip install 'oodeval-adapters[mdetr]')"
            ) from exc
        try:
            self.model = torch.hub.load(
                _HUB_REPO,
                self.checkpoint,
                pretrained=True,
                return_postprocessor=False,
                trust_repo=True,
            )
            self.model = self.model.to(device)
            self.model.eval()
        except Exception as exc:
            raise AdapterError(
                f"mdetr model {self.checkpoint!r} not loadable from torch.hub: {exc}"
            ) from exc
        self._transform = T.Compose(
            [
                T.Resize(800),
                T.ToTensor(),
                T.Normalize([0.485, 0.456, 0.406], [0.229, 0.224, 0.225]),
            ]
        )

    def detect(self, image: Image.Image, prompt: str) -> list[RawDetection]:
        import torch

        width, height = image.size
        tensor = self._transform(image.convert("RGB")).unsqueeze(0).to(self.device)
        with torch.no_grad():
            outputs = self.model(tensor, [prompt])
        # last logit channel is "no object"; score = 1 - its probability
        probabilities = 1.0 - outputs["pred_logits"].softmax(-1)[0, :, -1]
        boxes = outputs["pred_boxes"][0]  # normalized (cx, cy, w, h)
        detections = []
        for probability, box in zip(probabilities.tolist(), boxes.tolist()):
            cx, cy, w, h = box
            detections.append(
                RawDetection(
                    x1=(cx - w / 2) * width,
                    y1=(cy - h / 2) * height,
                    x2=(cx + w / 2) * width,
                    y2=(cy + h / 2) * height,
                    score=float(probability),
                    label=prompt,
                )
            )
        return detections
