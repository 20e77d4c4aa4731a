"""Backend interface: one text prompt in, raw boxes out.

Backends never post-process (no NMS, no thresholding beyond the
permissive score floor): every protocol step belongs to the evaluation
toolkit so runs stay model-agnostic and auditable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

from PIL import Image


@dataclass(frozen=True)
class RawDetection:
    """One box in (x1, y1, x2, y2) pixel coordinates of the queried image."""

    x1: float
    y1: float
    x2: float
    y2: float
    score: float
    label: str = ""


class DetectorBackend(Protocol):
    """A loaded detector that can be queried with one prompt at a time."""

    def detect(self, image: Image.Image, prompt: str) -> list[RawDetection]:
        """All detections for ``prompt`` on ``image``, unfiltered."""
        ...
