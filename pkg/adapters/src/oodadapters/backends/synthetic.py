"""Deterministic fake detector for tests and dry runs.

Detections are a pure function of the image bytes and the prompt text, so
repeated runs over the same files reproduce identical prediction files.
"""

from __future__ import annotations

import hashlib
import random

from PIL import Image

from .base import RawDetection


class SyntheticBackend:
    def __init__(self, checkpoint: str = "", device: str = "cpu") -> None:
        self.checkpoint = checkpoint or "synthetic"

    def detect(self, image: Image.Image, prompt: str) -> list[RawDetection]:
        digest = hashlib.sha256()
        digest.update(image.tobytes())
        digest.update(prompt.encode("utf-8"))
        rng = random.Random(int.from_bytes(digest.digest()[:8], "big"))
        width, height = image.size
        detections = []
        for _ in range(rng.randint(1, 4)):
            w = rng.uniform(0.1, 0.6) * width
            h = rng.uniform(0.1, 0.6) * height
            x = rng.uniform(0, width - w)
            y = rng.uniform(0, height - h)
            detections.append(
                RawDetection(
                    x1=round(x, 2),
                    y1=round(y, 2),
                    x2=round(x + w, 2),
                    y2=round(y + h, 2),
                    score=rng.randint(100, 950) / 1000,
                    label=prompt,
                )
            )
        return detections
