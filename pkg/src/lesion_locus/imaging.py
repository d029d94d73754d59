"""Raster primitives shared by the rest of the package.

Images are plain numpy arrays:

* RGB image   -- ``(height, width, 3)`` ``uint8``
* gray image  -- ``(height, width)`` ``uint8``
* binary mask -- ``(height, width)`` ``uint8`` holding only 0 and 1 (1 = lesion)

Coordinates follow image convention: ``x`` is the column, ``y`` the row.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import ParseError

N_LEVELS = 256


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box with inclusive pixel bounds."""

    left: int
    top: int
    right: int
    bottom: int

    def __post_init__(self):
        if self.left > self.right or self.top > self.bottom:
            raise ValueError(f"inverted box {self}")
        if self.left < 0 or self.top < 0:
            raise ValueError(f"negative box coordinates {self}")

    @property
    def width(self) -> int:
        return self.right - self.left + 1

    @property
    def height(self) -> int:
        return self.bottom - self.top + 1

    @property
    def area(self) -> int:
        return self.width * self.height

    def contains(self, other: "BoundingBox") -> bool:
        return (self.left <= other.left and self.top <= other.top
                and self.right >= other.right and self.bottom >= other.bottom)

    def shift(self, dx: int, dy: int) -> "BoundingBox":
        return BoundingBox(self.left + dx, self.top + dy, self.right + dx, self.bottom + dy)

    def fits(self, width: int, height: int) -> bool:
        return self.right < width and self.bottom < height

    def to_mask(self, width: int, height: int) -> np.ndarray:
        mask = np.zeros((height, width), dtype=np.uint8)
        mask[self.top:self.bottom + 1, self.left:self.right + 1] = 1
        return mask

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.left, self.top, self.right, self.bottom)

    def to_dict(self) -> dict:
        return {"left": self.left, "top": self.top, "right": self.right, "bottom": self.bottom}

    @classmethod
    def from_dict(cls, d: dict) -> "BoundingBox":
        return cls(int(d["left"]), int(d["top"]), int(d["right"]), int(d["bottom"]))


@dataclass(frozen=True)
class Component:
    label: int
    area: int
    box: BoundingBox


def as_rgb(img) -> np.ndarray:
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"expected (H, W, 3) RGB array, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        if arr.min() < 0 or arr.max() > 255:
            raise ValueError("RGB values must lie in 0..255")
        arr = arr.astype(np.uint8)
    return arr


def as_gray(img) -> np.ndarray:
    arr = np.asarray(img)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"expected non-empty (H, W) gray array, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        if arr.min() < 0 or arr.max() > 255:
            raise ValueError("gray values must lie in 0..255")
        arr = arr.astype(np.uint8)
    return arr


def as_mask(mask) -> np.ndarray:
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise ValueError(f"expected (H, W) mask, got shape {arr.shape}")
    if arr.dtype == bool:
        return arr.astype(np.uint8)
    if arr.size and (arr.min() < 0 or arr.max() > 1):
        raise ValueError("mask labels must be 0 or 1")
    return arr.astype(np.uint8, copy=False)


def lightness(r, g, b):
    """HSL lightness ``(max + min) // 2``.

    Works elementwise on arrays as well as on plain ints.
    """
    if np.isscalar(r) and np.isscalar(g) and np.isscalar(b):
        return (max(r, g, b) + min(r, g, b)) // 2
    r, g, b = (np.asarray(c, dtype=np.uint16) for c in (r, g, b))
    hi = np.maximum(np.maximum(r, g), b)
    lo = np.minimum(np.minimum(r, g), b)
    return ((hi + lo) // 2).astype(np.uint8)


def image_lightness(img: np.ndarray) -> np.ndarray:
    img = as_rgb(img)
    return lightness(img[..., 0], img[..., 1], img[..., 2])


def extract_blue_channel(img: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(as_rgb(img)[..., 2])


def histogram(img: np.ndarray) -> np.ndarray:
    """256-bin gray level counts as an ``int64`` array."""
    img = as_gray(img)
    return np.bincount(img.ravel(), minlength=N_LEVELS).astype(np.int64)


def binarize(img: np.ndarray, threshold: int) -> np.ndarray:
    """Dark-foreground thresholding: 1 where ``value <= threshold``."""
    img = as_gray(img)
    return (img <= int(threshold)).astype(np.uint8)


_STRUCTURES = {
    4: ndimage.generate_binary_structure(2, 1),
    8: ndimage.generate_binary_structure(2, 2),
}


def label_components(mask: np.ndarray, connectivity: int = 8) -> tuple[np.ndarray, list[Component]]:
    """Label foreground components.

    Returns the label image and components ordered by descending area, ties
    broken by the row-major position of each component's first pixel.
    """
    if connectivity not in _STRUCTURES:
        raise ValueError("connectivity must be 4 or 8")
    mask = as_mask(mask)
    labels, n = ndimage.label(mask, structure=_STRUCTURES[connectivity])
    if n == 0:
        return labels, []
    flat = labels.ravel()
    ids, first = np.unique(flat, return_index=True)
    keep = ids > 0
    ids, first = ids[keep], first[keep]
    areas = np.bincount(flat, minlength=n + 1)
    slices = ndimage.find_objects(labels)
    comps = []
    for lab, first_idx in zip(ids, first):
        sy, sx = slices[lab - 1]
        box = BoundingBox(sx.start, sy.start, sx.stop - 1, sy.stop - 1)
        comps.append((-int(areas[lab]), int(first_idx), Component(int(lab), int(areas[lab]), box)))
    comps.sort(key=lambda c: (c[0], c[1]))
    return labels, [c[2] for c in comps]


def connected_components(mask: np.ndarray, connectivity: int = 8) -> list[Component]:
    return label_components(mask, connectivity)[1]


# --- file I/O -------------------------------------------------------------

def read_rgb(path) -> np.ndarray:
    """Decode a PNG or binary PPM into an RGB array (8 bits per channel)."""
    path = Path(path)
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode in ("I", "I;16", "I;16B", "I;16L", "F") or "16" in im.mode:
                raise ParseError(f"{path}: only 8-bit images are supported (mode {im.mode})")
            if im.mode != "RGB":
                im = im.convert("RGB")
            return np.array(im, dtype=np.uint8)
    except ParseError:
        raise
    except FileNotFoundError:
        raise
    except OSError as exc:
        raise ParseError(f"{path}: cannot decode image: {exc}") from exc


def write_rgb(path, img: np.ndarray) -> None:
    Image.fromarray(as_rgb(img), mode="RGB").save(Path(path), format="PNG")


def read_mask(path) -> np.ndarray:
    """Read a single-channel mask PNG; any nonzero value is foreground."""
    path = Path(path)
    try:
        with Image.open(path) as im:
            im.load()
            arr = np.array(im.convert("L"))
    except FileNotFoundError:
        raise
    except OSError as exc:
        raise ParseError(f"{path}: cannot decode mask: {exc}") from exc
    return (arr > 0).astype(np.uint8)


def write_mask(path, mask: np.ndarray) -> None:
    Image.fromarray(as_mask(mask) * np.uint8(255), mode="L").save(Path(path), format="PNG")
