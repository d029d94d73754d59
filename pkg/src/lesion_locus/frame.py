"""Black digitization frame removal by directional line scans."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import FrameConsumesImage
from .imaging import as_rgb, image_lightness

DEFAULT_BLACK_LIGHTNESS = 20
DEFAULT_BLACK_ROW_FRACTION = 0.60
DEFAULT_MAX_FRAME_FRACTION = 0.40


@dataclass(frozen=True)
class CropRect:
    """Inclusive row/column bounds of the kept region in the original image."""

    top: int
    bottom: int
    left: int
    right: int

    @property
    def width(self) -> int:
        return self.right - self.left + 1

    @property
    def height(self) -> int:
        return self.bottom - self.top + 1

    def apply(self, img: np.ndarray) -> np.ndarray:
        return img[self.top:self.bottom + 1, self.left:self.right + 1]

    def to_dict(self) -> dict:
        return {"top": self.top, "bottom": self.bottom, "left": self.left, "right": self.right}

    @classmethod
    def from_dict(cls, d: dict) -> "CropRect":
        return cls(int(d["top"]), int(d["bottom"]), int(d["left"]), int(d["right"]))

    @classmethod
    def full(cls, width: int, height: int) -> "CropRect":
        return cls(0, height - 1, 0, width - 1)


@dataclass(frozen=True)
class FrameParams:
    black_lightness_threshold: int = DEFAULT_BLACK_LIGHTNESS
    black_row_fraction: float = DEFAULT_BLACK_ROW_FRACTION
    max_frame_fraction: float = DEFAULT_MAX_FRAME_FRACTION

    def __post_init__(self):
        if not 0 <= self.black_lightness_threshold <= 255:
            raise ValueError("black_lightness_threshold must be in 0..255")
        if not 0 < self.black_row_fraction <= 1:
            raise ValueError("black_row_fraction must be in (0, 1]")
        if not 0 <= self.max_frame_fraction <= 1:
            raise ValueError("max_frame_fraction must be in [0, 1]")


def _leading_run(is_frame: np.ndarray) -> int:
    """Length of the run of True values at the start of ``is_frame``."""
    stops = np.flatnonzero(~is_frame)
    return int(stops[0]) if stops.size else int(is_frame.size)


def frame_lines(black: np.ndarray, axis: int, fraction: float) -> np.ndarray:
    """Flag the rows (axis=1) or columns (axis=0) whose black share reaches ``fraction``.

    The comparison is done on integers: ``count * den >= num * length``.
    """
    ratio = Fraction(str(fraction))
    counts = black.sum(axis=axis, dtype=np.int64)
    length = black.shape[axis]
    return counts * ratio.denominator >= ratio.numerator * length


def remove_black_frame(
    img: np.ndarray,
    black_lightness_threshold: int = DEFAULT_BLACK_LIGHTNESS,
    black_row_fraction: float = DEFAULT_BLACK_ROW_FRACTION,
    max_frame_fraction: float = DEFAULT_MAX_FRAME_FRACTION,
) -> tuple[np.ndarray, CropRect]:
    """Crop away the dark frame around a dermoscopy image.

    A pixel is black when its HSL lightness is below
    ``black_lightness_threshold``; a row or column belongs to the frame when at
    least ``black_row_fraction`` of its pixels are black. Each of the four
    sides is scanned inward on the original image and stops at the first
    non-frame line. Removal per side is capped at ``max_frame_fraction`` of the
    image dimension.

    Raises:
        FrameConsumesImage: every line in some direction is frame, or the
            capped crop would leave nothing.
    """
    FrameParams(black_lightness_threshold, black_row_fraction, max_frame_fraction)
    img = as_rgb(img)
    height, width = img.shape[:2]
    black = image_lightness(img) < black_lightness_threshold

    row_frame = frame_lines(black, axis=1, fraction=black_row_fraction)
    col_frame = frame_lines(black, axis=0, fraction=black_row_fraction)
    if row_frame.all() or col_frame.all():
        raise FrameConsumesImage(f"every line of the {width}x{height} image is frame")

    row_cap = math.floor(max_frame_fraction * height)
    col_cap = math.floor(max_frame_fraction * width)
    top = min(_leading_run(row_frame), row_cap)
    bottom = height - 1 - min(_leading_run(row_frame[::-1]), row_cap)
    left = min(_leading_run(col_frame), col_cap)
    right = width - 1 - min(_leading_run(col_frame[::-1]), col_cap)
    if top > bottom or left > right:
        raise FrameConsumesImage("frame removal leaves an empty image")

    rect = CropRect(top, bottom, left, right)
    return rect.apply(img), rect
