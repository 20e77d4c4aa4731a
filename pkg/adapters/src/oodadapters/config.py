"""Adapter run configuration."""

from __future__ import annotations

from dataclasses import dataclass


class AdapterError(RuntimeError):
    """A backend cannot load or run (missing runtime, checkpoint, device)."""


# image transforms an adapter can run in addition to the original frame
TTA_KINDS = ("horizontal_flip", "rotate90_cw", "rotate90_ccw")

_TTA_ALIASES = {
    "hflip": "horizontal_flip",
    "horizontal_flip": "horizontal_flip",
    "rot90": "rotate90_cw",
    "rot90cw": "rotate90_cw",
    "rotate90_cw": "rotate90_cw",
    "rot90ccw": "rotate90_ccw",
    "rotate90_ccw": "rotate90_ccw",
}


def normalize_tta_kind(token: str) -> str:
    kind = _TTA_ALIASES.get(token.strip().lower())
    if kind is None:
        raise AdapterError(
            f"unknown tta kind {token!r}; expected one of {sorted(set(_TTA_ALIASES))}"
        )
    return kind


@dataclass(frozen=True)
class AdapterConfig:
    """One inference run: a model, its prompts, and emission options.

    ``model`` picks a registered backend ("synthetic" is the deterministic
    stub used by the tests); ``roi_prompt``, when set, is queried like any
    other prompt but emitted under the reserved stream id "roi".
    """

    model: str
    prompts: tuple[str, ...]
    checkpoint: str = ""
    device: str = "cpu"
    score_floor: float = 0.05
    tta: tuple[str, ...] = ()
    roi_prompt: str = ""

    def __post_init__(self) -> None:
        if not self.prompts:
            raise AdapterError("at least one prompt is required")
        if any(not p.strip() for p in self.prompts):
            raise AdapterError("prompts must be non-empty")
        if not 0.0 <= self.score_floor <= 1.0:
            raise AdapterError(f"score floor out of [0, 1]: {self.score_floor}")
        object.__setattr__(
            self, "tta", tuple(normalize_tta_kind(k) for k in self.tta)
        )
