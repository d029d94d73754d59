"""Synthetic dermoscopy-like images with known lesion geometry.

A dark elliptical lesion on a lighter skin background. The pigment fades out
over a Gaussian edge that finishes at the nominal ellipse outline, mimicking
borders drawn at the outermost visible pigment, so thresholds tend to land
slightly inside the true outline. Additive Gaussian noise covers the whole
image, including an optional black frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from .imaging import BoundingBox

SKIN_RGB = (214, 168, 150)
LESION_RGB = (118, 74, 56)


@dataclass
class Ellipse:
    cx: float
    cy: float
    a: float
    b: float
    angle: float  # radians

    def half_extents(self) -> tuple[float, float]:
        c, s = math.cos(self.angle), math.sin(self.angle)
        return (math.sqrt((self.a * c) ** 2 + (self.b * s) ** 2),
                math.sqrt((self.a * s) ** 2 + (self.b * c) ** 2))

    def box(self) -> BoundingBox:
        """Box of the pixel centres lying inside the ellipse extents."""
        hx, hy = self.half_extents()
        return BoundingBox(math.ceil(self.cx - hx), math.ceil(self.cy - hy),
                           math.floor(self.cx + hx), math.floor(self.cy + hy))

    def radius_ratio(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """Normalised ellipse radius; 1 on the outline."""
        c, s = math.cos(self.angle), math.sin(self.angle)
        dx, dy = xs - self.cx, ys - self.cy
        u = (dx * c + dy * s) / self.a
        v = (-dx * s + dy * c) / self.b
        return np.sqrt(u * u + v * v)

    def mask(self, width: int, height: int) -> np.ndarray:
        ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
        return (self.radius_ratio(xs, ys) <= 1.0).astype(np.uint8)

    def area(self) -> float:
        return math.pi * self.a * self.b


@dataclass
class SyntheticCase:
    image: np.ndarray
    ellipse: Ellipse
    frame: int
    gt_mask: np.ndarray

    @property
    def gt_box(self) -> BoundingBox:
        return self.ellipse.box()


def render(width: int, height: int, ellipse: Ellipse, rng: np.random.Generator,
           frame: int = 15, noise_sigma: float = 8.0, edge_sigma: float = 4.0,
           skin=SKIN_RGB, lesion=LESION_RGB) -> np.ndarray:
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    r = ellipse.radius_ratio(xs, ys)
    # approximate signed distance to the outline, positive outside
    d = (r - 1.0) * min(ellipse.a, ellipse.b)
    # pigment fraction: ~1 inside, fades to ~0 by the nominal outline
    pig = 0.5 * (1.0 - erf((d + 2.0 * edge_sigma) / (math.sqrt(2.0) * edge_sigma)))
    skin = np.asarray(skin, dtype=np.float64)
    lesion = np.asarray(lesion, dtype=np.float64)
    img = skin[None, None, :] * (1.0 - pig[..., None]) + lesion[None, None, :] * pig[..., None]
    if frame > 0:
        img[:frame, :, :] = 0
        img[-frame:, :, :] = 0
        img[:, :frame, :] = 0
        img[:, -frame:, :] = 0
    img = img + rng.normal(0.0, noise_sigma, img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def random_ellipse(rng: np.random.Generator, width: int, height: int, margin: int) -> Ellipse:
    short = min(width, height)
    a = rng.uniform(0.15, 0.32) * short
    b = a * rng.uniform(0.55, 1.0)
    angle = rng.uniform(0.0, math.pi)
    e = Ellipse(0.0, 0.0, a, b, angle)
    hx, hy = e.half_extents()
    if 2 * (margin + hx + 4) > width or 2 * (margin + hy + 4) > height:
        raise ValueError(f"{width}x{height} is too small for a lesion with a {margin}px margin")
    e.cx = rng.uniform(margin + hx + 4, width - margin - hx - 4)
    e.cy = rng.uniform(margin + hy + 4, height - margin - hy - 4)
    return e


def make_case(rng: np.random.Generator, width: int = 768, height: int = 512, frame: int = 15,
              noise_sigma: float = 8.0, edge_sigma: float = 4.0) -> SyntheticCase:
    """One random lesion image with its analytic ground truth."""
    e = random_ellipse(rng, width, height, frame + 2 * int(math.ceil(edge_sigma)))
    img = render(width, height, e, rng, frame, noise_sigma, edge_sigma)
    return SyntheticCase(img, e, frame, e.mask(width, height))


def make_suite(n: int, seed: int = 42, **kwargs) -> list[SyntheticCase]:
    rng = np.random.default_rng(seed)
    return [make_case(rng, **kwargs) for _ in range(n)]


def add_black_frame(img: np.ndarray, width: int) -> np.ndarray:
    """Pad an RGB image with a black border ``width`` pixels wide."""
    return np.pad(img, ((width, width), (width, width), (0, 0)))
