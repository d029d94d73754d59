"""Ground-truth masks from dermatologist border annotations."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DegenerateCurve, EmptyMask, ParseError
from .imaging import BoundingBox, read_mask
from .localization import ALL_FOREGROUND, bounding_box

SAMPLES_PER_SEGMENT = 32
COLLINEAR_TOL = 0.5


@dataclass(frozen=True)
class BorderAnnotation:
    """Closed border given by ordered ``(x, y)`` control points."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        pts = tuple((float(x), float(y)) for x, y in self.points)
        if len(pts) < 3:
            raise ValueError("a border needs at least 3 points")
        object.__setattr__(self, "points", pts)

    def check_bounds(self, width: int, height: int) -> None:
        for x, y in self.points:
            if not (0 <= x <= width - 1 and 0 <= y <= height - 1):
                raise ValueError(f"point ({x}, {y}) outside {width}x{height} image")


@dataclass
class GroundTruth:
    manual_border: np.ndarray
    manual_box: BoundingBox


def _check_collinear(pts: np.ndarray) -> None:
    centred = pts - pts.mean(axis=0)
    # principal direction; max distance from the best fit line
    _, _, vt = np.linalg.svd(centred, full_matrices=False)
    normal = vt[-1]
    if np.abs(centred @ normal).max() <= COLLINEAR_TOL:
        raise DegenerateCurve("control points are collinear within 0.5 px")


def _interpolating_controls(pts: np.ndarray) -> np.ndarray:
    # segment midpoints of a uniform quadratic B-spline sit at (Q[k-1] + 6 Q[k] + Q[k+1]) / 8
    n = len(pts)
    a = np.zeros((n, n))
    for k in range(n):
        a[k, (k - 1) % n] += 1.0
        a[k, k] += 6.0
        a[k, (k + 1) % n] += 1.0
    return np.linalg.solve(a / 8.0, pts)


def spline_curve(points, samples_per_segment: int = SAMPLES_PER_SEGMENT,
                 interpolate: bool = False) -> np.ndarray:
    """Sample the closed uniform quadratic B-spline of the control points.

    Returns a ``(n * samples_per_segment, 2)`` array of ``(x, y)`` vertices.
    With ``interpolate`` the control polygon is first solved so the curve
    passes through the given points.
    """
    pts = np.asarray(points, dtype=np.float64)
    if interpolate:
        pts = _interpolating_controls(pts)
    n = len(pts)
    t = np.arange(samples_per_segment) / samples_per_segment
    b0 = 0.5 * (1 - t) ** 2
    b1 = 0.5 * (-2 * t ** 2 + 2 * t + 1)
    b2 = 0.5 * t ** 2
    segs = []
    for j in range(n):
        p0, p1, p2 = pts[j], pts[(j + 1) % n], pts[(j + 2) % n]
        segs.append(b0[:, None] * p0 + b1[:, None] * p1 + b2[:, None] * p2)
    return np.vstack(segs)


def scanline_crossings(poly: np.ndarray, y: float) -> list[float]:
    """Sorted x positions where the closed polygon crosses the row ``y``.

    Uses the half-open rule (an edge covers ``min(y0, y1) <= y < max(y0, y1)``),
    so each row always has an even number of crossings.
    """
    x0, y0 = poly[:, 0], poly[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    lo = np.minimum(y0, y1)
    hi = np.maximum(y0, y1)
    hit = (lo <= y) & (y < hi)
    xs = x0[hit] + (y - y0[hit]) * (x1[hit] - x0[hit]) / (y1[hit] - y0[hit])
    return sorted(xs.tolist())


def fill_polygon(poly: np.ndarray, width: int, height: int) -> np.ndarray:
    """Even-odd scanline fill sampled at pixel centres."""
    mask = np.zeros((height, width), dtype=np.uint8)
    ymin = max(0, math.ceil(poly[:, 1].min()))
    ymax = min(height - 1, math.floor(poly[:, 1].max()))
    for y in range(ymin, ymax + 1):
        xs = scanline_crossings(poly, float(y))
        for a, b in zip(xs[0::2], xs[1::2]):
            lo = max(0, math.ceil(a))
            hi = min(width - 1, math.floor(b))
            if lo <= hi:
                mask[y, lo:hi + 1] = 1
    return mask


def _draw_outline(mask: np.ndarray, poly: np.ndarray) -> None:
    height, width = mask.shape
    nxt = np.roll(poly, -1, axis=0)
    for (xa, ya), (xb, yb) in zip(poly, nxt):
        steps = int(math.ceil(max(abs(xb - xa), abs(yb - ya)))) + 1
        xs = np.rint(np.linspace(xa, xb, steps + 1)).astype(int)
        ys = np.rint(np.linspace(ya, yb, steps + 1)).astype(int)
        ok = (xs >= 0) & (xs < width) & (ys >= 0) & (ys < height)
        mask[ys[ok], xs[ok]] = 1


def rasterize_border(ann: BorderAnnotation, dims: tuple[int, int], interpolate: bool = False,
                     samples_per_segment: int = SAMPLES_PER_SEGMENT) -> np.ndarray:
    """Filled mask (interior plus outline) of the annotation's spline border.

    ``dims`` is ``(width, height)``.
    """
    width, height = dims
    pts = np.asarray(ann.points, dtype=np.float64)
    _check_collinear(pts)
    poly = spline_curve(pts, samples_per_segment, interpolate)
    mask = fill_polygon(poly, width, height)
    _draw_outline(mask, poly)
    return mask


def read_points(path) -> BorderAnnotation:
    """Parse a UTF-8 CSV with one ``x,y`` pair per line (a header line is tolerated)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not UTF-8 text") from exc
    pts = []
    for lineno, row in enumerate(csv.reader(text.splitlines()), start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise ParseError(f"{path}:{lineno}: expected 'x,y', got {row!r}")
        try:
            pts.append((float(row[0]), float(row[1])))
        except ValueError:
            if lineno == 1 and not pts:
                continue  # header
            raise ParseError(f"{path}:{lineno}: non-numeric coordinate in {row!r}") from None
    if not pts:
        raise ParseError(f"{path}: no points")
    if len(pts) < 3:
        raise ParseError(f"{path}: need at least 3 points, got {len(pts)}")
    return BorderAnnotation(tuple(pts))


def load_ground_truth(path, dims: tuple[int, int], kind: str | None = None,
                      interpolate: bool = False) -> GroundTruth:
    """Load a ``mask`` PNG or a ``points`` CSV. ``kind`` defaults from the suffix."""
    path = Path(path)
    if kind is None:
        kind = "points" if path.suffix.lower() in (".csv", ".txt") else "mask"
    if kind not in ("mask", "points"):
        raise ValueError(f"unknown ground truth kind {kind!r}")
    width, height = dims
    if path.stat().st_size == 0:
        raise ParseError(f"{path}: empty file")
    if kind == "points":
        ann = read_points(path)
        try:
            ann.check_bounds(width, height)
        except ValueError as exc:
            raise ParseError(f"{path}: {exc}") from None
        border = rasterize_border(ann, dims, interpolate=interpolate)
    else:
        border = read_mask(path)
        if border.shape != (height, width):
            raise ParseError(f"{path}: mask is {border.shape[1]}x{border.shape[0]}, "
                             f"image is {width}x{height}")
    if not border.any():
        raise EmptyMask(f"{path}: ground truth has no foreground")
    return GroundTruth(border, bounding_box(border, ALL_FOREGROUND))
