"""Backend registry: each detector is an isolated optional plug-in."""

from __future__ import annotations

from typing import Callable

from ..config import AdapterError
from .base import DetectorBackend, RawDetection

_REGISTRY: dict[str, Callable[..., DetectorBackend]] = {}


def register(model_id: str, factory: Callable[..., DetectorBackend]) -> None:
    _REGISTRY[model_id] = factory


def available_models() -> list[str]:
    return sorted(_REGISTRY)


def create_backend(model_id: str, checkpoint: str = "", device: str = "cpu") -> DetectorBackend:
    factory = _REGISTRY.get(model_id)
    if factory is None:
        raise AdapterError(
            f"unknown model {model_id!r}; available: {available_models()}"
        )
    return factory(checkpoint=checkpoint, device=device)


def _synthetic(checkpoint: str = "", device: str = "cpu"):
    from .synthetic import SyntheticBackend

    return SyntheticBackend(checkpoint=checkpoint, device=device)


def _grounding_dino(checkpoint: str = "", device: str = "cpu"):
    from .grounding_dino import GroundingDinoBackend

    return GroundingDinoBackend(checkpoint=checkpoint, device=device)


def _yolo_world(checkpoint: str = "", device: str = "cpu"):
    from .yolo_world import YoloWorldBackend

    return YoloWorldBackend(checkpoint=checkpoint, device=device)


def _mdetr(checkpoint: str = "", device: str = "cpu"):
    from .mdetr import MdetrBackend

    return MdetrBackend(checkpoint=checkpoint, device=device)


def _omdet(checkpoint: str = "", device: str = "cpu"):
    from .omdet import OmdetBackend

    return OmdetBackend(checkpoint=checkpoint, device=device)


register("synthetic", _synthetic)
register("grounding-dino", _grounding_dino)
register("yolo-world", _yolo_world)
register("mdetr", _mdetr)
register("omdet", _omdet)

__all__ = [
    "DetectorBackend",
    "RawDetection",
    "available_models",
    "create_backend",
    "register",
]
