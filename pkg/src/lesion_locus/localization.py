"""Bounding boxes, box expansion and the per-image localization pipeline."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import EmptyMask, LesionLocusError
from .frame import CropRect, FrameParams, remove_black_frame
from .fusion import FusionParams, fuse, fuse_thresholds
from .imaging import BoundingBox, as_mask, extract_blue_channel, histogram, label_components
from .thresholding import EnsembleSpec, ThresholdResult, compute_ensemble

DEFAULT_ENSEMBLE = "otsu,kapur,huang,sahoo"


@dataclass(frozen=True)
class BoxPolicy:
    """Which foreground pixels count toward the box.

    ``kind`` is ``"all"``, ``"largest"`` or ``"fraction"``; the last keeps every
    component whose area is at least ``fraction`` times the largest one.
    """

    kind: str = "fraction"
    fraction: float = 0.05
    connectivity: int = 8

    def __post_init__(self):
        if self.kind not in ("all", "largest", "fraction"):
            raise ValueError(f"unknown box policy {self.kind!r}")
        if not 0 <= self.fraction <= 1:
            raise ValueError("fraction must lie in [0, 1]")

    @classmethod
    def parse(cls, text: str) -> "BoxPolicy":
        kind, _, arg = text.strip().lower().partition(":")
        if kind == "fraction":
            return cls("fraction", float(arg) if arg else 0.05)
        if arg:
            raise ValueError(f"policy {kind!r} takes no argument")
        return cls(kind)

    def __str__(self) -> str:
        return f"fraction:{self.fraction:g}" if self.kind == "fraction" else self.kind


ALL_FOREGROUND = BoxPolicy("all")
LARGEST_COMPONENT = BoxPolicy("largest")


@dataclass(frozen=True)
class ExpansionSpec:
    mode: str = "none"
    amount: float = 0

    def __post_init__(self):
        if self.mode == "nonadaptive":
            if not 0 < self.amount <= 50:
                raise ValueError("non-adaptive expansion percentage must lie in (0, 50]")
        elif self.mode == "adaptive":
            if self.amount != int(self.amount) or not 1 <= self.amount <= 64:
                raise ValueError("adaptive expansion must be an integer in [1, 64] gray levels")
            object.__setattr__(self, "amount", int(self.amount))
        elif self.mode == "none":
            object.__setattr__(self, "amount", 0)
        else:
            raise ValueError(f"unknown expansion mode {self.mode!r}")

    @classmethod
    def parse(cls, text: str) -> "ExpansionSpec":
        mode, _, arg = text.strip().lower().partition(":")
        if mode == "none":
            return cls()
        if not arg:
            raise ValueError(f"expansion {mode!r} needs an amount, e.g. {mode}:2")
        value = float(arg)
        if mode == "adaptive":
            value = int(value) if value == int(value) else value
        return cls(mode, value)

    def __str__(self) -> str:
        if self.mode == "none":
            return "none"
        return f"{self.mode}:{self.amount:g}"


@dataclass(frozen=True)
class LocalizeConfig:
    frame: FrameParams = field(default_factory=FrameParams)
    ensemble: EnsembleSpec = field(default_factory=lambda: EnsembleSpec.parse(DEFAULT_ENSEMBLE))
    fusion: FusionParams = field(default_factory=FusionParams)
    expansion: ExpansionSpec = field(default_factory=ExpansionSpec)
    policy: BoxPolicy = field(default_factory=BoxPolicy)


@dataclass
class LocalizationResult:
    crop: CropRect
    fused: np.ndarray
    initial_box: BoundingBox
    expanded_box: BoundingBox
    thresholds: list[ThresholdResult]
    image_size: tuple[int, int]

    def to_dict(self) -> dict:
        width, height = self.image_size
        return {
            "image_size": {"width": width, "height": height},
            "crop": self.crop.to_dict(),
            "thresholds": {t.method.label: t.threshold for t in self.thresholds},
            "initial_box": self.initial_box.to_dict(),
            "expanded_box": self.expanded_box.to_dict(),
            "fusion_area": int(self.fused.sum()),
        }


def bounding_box(mask: np.ndarray, policy: BoxPolicy = BoxPolicy()) -> BoundingBox:
    """Smallest box enclosing the foreground retained by ``policy``."""
    mask = as_mask(mask)
    if policy.kind == "all":
        ys, xs = np.nonzero(mask)
        if ys.size == 0:
            raise EmptyMask("mask has no foreground pixels")
        return BoundingBox(int(xs.min()), int(ys.min()), int(xs.max()), int(ys.max()))
    _, comps = label_components(mask, policy.connectivity)
    if not comps:
        raise EmptyMask("mask has no foreground pixels")
    if policy.kind == "largest":
        kept = comps[:1]
    else:
        floor = policy.fraction * comps[0].area
        kept = [c for c in comps if c.area >= floor]
    return BoundingBox(min(c.box.left for c in kept), min(c.box.top for c in kept),
                       max(c.box.right for c in kept), max(c.box.bottom for c in kept))


def _round_half_up(v: Fraction) -> int:
    return max(0, int((v + Fraction(1, 2)) // 1))


def expand_nonadaptive(box: BoundingBox, percent: float, image_dims: tuple[int, int]) -> BoundingBox:
    """Grow each side by ``percent`` of the box's own width (West/East) or height (North/South).

    ``image_dims`` is ``(width, height)``; the result is clipped to it.
    """
    if percent <= 0:
        raise ValueError("expansion percentage must be positive")
    width, height = image_dims
    p = Fraction(str(percent))
    dx = _round_half_up(box.width * p / 100)
    dy = _round_half_up(box.height * p / 100)
    return BoundingBox(max(0, box.left - dx), max(0, box.top - dy),
                       min(width - 1, box.right + dx), min(height - 1, box.bottom + dy))


def raise_thresholds(thresholds: Sequence[ThresholdResult], levels: int) -> list[ThresholdResult]:
    return [ThresholdResult(t.method, min(t.threshold + levels, 255)) for t in thresholds]


def expand_adaptive(x: np.ndarray, spec: EnsembleSpec, params: FusionParams, levels: int,
                    policy: BoxPolicy = BoxPolicy(),
                    thresholds: Sequence[ThresholdResult] | None = None) -> BoundingBox:
    """Re-fuse with every threshold raised by ``levels`` gray levels and box the result.

    ``thresholds`` may carry the ensemble's original thresholds to avoid
    recomputing them.
    """
    if levels < 0:
        raise ValueError("gray-level increment must be non-negative")
    if thresholds is None:
        thresholds = compute_ensemble(histogram(x), spec)
    mask = fuse_thresholds(x, raise_thresholds(thresholds, levels), params)
    return bounding_box(mask, policy)


def localize(img: np.ndarray, config: LocalizeConfig = LocalizeConfig()) -> LocalizationResult:
    """Frame removal, blue channel fusion, boxing and expansion for one RGB image.

    Boxes are reported in the coordinates of the input image. Pipeline errors
    carry the failing stage name in their ``stage`` attribute.
    """
    height, width = img.shape[:2]
    stage = "frame"
    try:
        f = config.frame
        cropped, crop = remove_black_frame(img, f.black_lightness_threshold,
                                           f.black_row_fraction, f.max_frame_fraction)
        stage = "fuse"
        blue = extract_blue_channel(cropped)
        fused, thresholds = fuse(blue, config.ensemble, config.fusion)
        stage = "box"
        box = bounding_box(fused, config.policy)
        stage = "expand"
        exp = config.expansion
        if exp.mode == "nonadaptive":
            grown = expand_nonadaptive(box, exp.amount, (crop.width, crop.height))
        elif exp.mode == "adaptive":
            grown = expand_adaptive(blue, config.ensemble, config.fusion, exp.amount,
                                    config.policy, thresholds)
            # the raised-threshold foreground contains the original one
            grown = BoundingBox(min(grown.left, box.left), min(grown.top, box.top),
                                max(grown.right, box.right), max(grown.bottom, box.bottom))
        else:
            grown = box
    except LesionLocusError as exc:
        exc.stage = exc.stage or stage
        raise
    fused_full = np.zeros((height, width), dtype=np.uint8)
    crop.apply(fused_full)[...] = fused
    return LocalizationResult(
        crop=crop,
        fused=fused_full,
        initial_box=box.shift(crop.left, crop.top),
        expanded_box=grown.shift(crop.left, crop.top),
        thresholds=thresholds,
        image_size=(width, height),
    )
