"""MRF fusion of an ensemble of thresholded images.

Each pixel takes the label ``y`` in {0, 1} minimising the local energy

    U(y) = beta_sp * U_sp(y) + sum_i beta_i * U_ii(y)

    U_ii(y) = -sum_{q in S} alpha_i(x_q) * [A_i(q) == y]
    U_sp(y) = -sum_{q in S, q != p} [y_prev(q) == y]

with ``alpha_i(v) = 1 - exp(-gamma |v - T_i|)`` and
``beta_i = exp(-gamma |T_mean - T_i|)``. ``S`` is a square window around the
pixel (centre included for the inter-image term), clipped at the image border.
Equal energies resolve to label 0.

Because both energies are sums of non-positive terms, label 1 wins exactly
when ``U(0) - U(1) > tol * (|U(0)| + |U(1)|)``; the relative tolerance keeps
tie resolution independent of summation order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch
from .imaging import N_LEVELS, as_gray, as_mask, binarize, histogram
from .thresholding import EnsembleSpec, ThresholdResult, compute_ensemble

TIE_RTOL = 1e-9
_ALPHA_MAX = np.nextafter(1.0, 0.0)


@dataclass(frozen=True)
class FusionParams:
    gamma: float = 0.1
    beta_sp: float = 0.0
    k_max: int = 0
    neighborhood: int = 3
    stop_fraction: float = 0.001

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.beta_sp < 0:
            raise ValueError("beta_sp must be non-negative")
        if self.k_max < 0:
            raise ValueError("k_max must be non-negative")
        if self.neighborhood < 1 or self.neighborhood % 2 == 0:
            raise ValueError("neighborhood must be an odd window side")
        if not 0 <= self.stop_fraction <= 1:
            raise ValueError("stop_fraction must lie in [0, 1]")


@dataclass(frozen=True)
class WeightTables:
    """Precomputed ``alpha[v, i]`` (256 x P) and ``beta[i]`` weights."""

    alpha: np.ndarray
    beta: np.ndarray
    t_bar: float
    thresholds: tuple[int, ...]

    @property
    def size(self) -> int:
        return len(self.thresholds)

    def to_dict(self) -> dict:
        return {
            "thresholds": list(self.thresholds),
            "t_bar": self.t_bar,
            "beta": [float(b) for b in self.beta],
        }


def _threshold_values(thresholds) -> list[int]:
    return [t.threshold if isinstance(t, ThresholdResult) else int(t) for t in thresholds]


def alpha_column(threshold: int, gamma: float) -> np.ndarray:
    """``alpha(v) = 1 - exp(-gamma |v - T|)`` for every gray level ``v``.

    Clamped just below 1: for ``gamma |v - T|`` beyond ~37 the double result
    would otherwise round up to exactly 1.
    """
    levels = np.arange(N_LEVELS, dtype=np.float64)
    alpha = 1.0 - np.exp(-gamma * np.abs(levels - float(threshold)))
    return np.minimum(alpha, _ALPHA_MAX)


def build_weight_tables(thresholds: Sequence[ThresholdResult | int], gamma: float = 0.1) -> WeightTables:
    ts = _threshold_values(thresholds)
    if not ts:
        raise ValueError("need at least one threshold")
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    t = np.asarray(ts, dtype=np.float64)
    # exact rational mean, reported as a double
    t_bar = sum(ts) / len(ts)
    alpha = np.stack([alpha_column(v, gamma) for v in ts], axis=1)
    beta = np.exp(-gamma * np.abs(t_bar - t))
    alpha.setflags(write=False)
    beta.setflags(write=False)
    return WeightTables(alpha, beta, float(t_bar), tuple(ts))


def window_sum(a: np.ndarray, size: int) -> np.ndarray:
    """Sum over a ``size`` x ``size`` window, clipped at the borders."""
    a = np.asarray(a, dtype=np.float64)
    r = size // 2
    h, w = a.shape
    p = np.pad(a, r)
    rows = np.zeros((h + 2 * r, w))
    for dx in range(size):
        rows += p[:, dx:dx + w]
    out = np.zeros((h, w))
    for dy in range(size):
        out += rows[dy:dy + h, :]
    return out


def vote_fields(x: np.ndarray, mask: np.ndarray, alpha_col: np.ndarray, size: int) -> tuple[np.ndarray, np.ndarray]:
    """Windowed alpha-weighted votes of one thresholded image.

    Returns ``(net, mass)``: ``net`` is the weight voting 1 minus the weight
    voting 0, ``mass`` the total weight in the window.
    """
    weight = np.asarray(alpha_col)[x]
    signed = np.where(mask.astype(bool), weight, -weight)
    return window_sum(signed, size), window_sum(weight, size)


def decide(net: np.ndarray, mass: np.ndarray) -> np.ndarray:
    return (net > TIE_RTOL * mass).astype(np.uint8)


def _check_dims(x: np.ndarray, masks: Sequence[np.ndarray], tables: WeightTables):
    if len(masks) != tables.size:
        raise DimensionMismatch(f"{len(masks)} masks for {tables.size} weight columns")
    for m in masks:
        if m.shape != x.shape:
            raise DimensionMismatch(f"mask shape {m.shape} does not match image {x.shape}")


def combine_votes(fields: Sequence[tuple[np.ndarray, np.ndarray]], beta: Sequence[float]
                  ) -> tuple[np.ndarray, np.ndarray]:
    """Beta-weighted sum of per-method ``(net, mass)`` vote fields, in ensemble order."""
    net = np.zeros(fields[0][0].shape)
    mass = np.zeros(fields[0][0].shape)
    for (n_i, m_i), b in zip(fields, beta):
        net += b * n_i
        mass += b * m_i
    return net, mass


def _inter_image(x, masks, tables, size):
    fields = [vote_fields(x, m, tables.alpha[:, i], size) for i, m in enumerate(masks)]
    return combine_votes(fields, tables.beta)


def fuse_initial(x: np.ndarray, masks: Sequence[np.ndarray], tables: WeightTables,
                 neighborhood: int = 3) -> np.ndarray:
    """Initial labelling without the spatial term (``beta_sp = 0``)."""
    x = as_gray(x)
    masks = [as_mask(m) for m in masks]
    _check_dims(x, masks, tables)
    return decide(*_inter_image(x, masks, tables, neighborhood))


def fuse_refine(y: np.ndarray, x: np.ndarray, masks: Sequence[np.ndarray], tables: WeightTables,
                params: FusionParams) -> np.ndarray:
    """Synchronous sweeps including the spatial term.

    Every sweep relabels all pixels from the previous sweep's labels. Stops
    after ``k_max`` sweeps or once the fraction of changed labels drops below
    ``stop_fraction``.
    """
    y = as_mask(y).copy()
    x = as_gray(x)
    masks = [as_mask(m) for m in masks]
    _check_dims(x, masks, tables)
    if y.shape != x.shape:
        raise DimensionMismatch(f"label shape {y.shape} does not match image {x.shape}")
    if params.k_max == 0:
        return y
    size = params.neighborhood
    net_ii, mass_ii = _inter_image(x, masks, tables, size)
    neighbours = window_sum(np.ones(x.shape), size) - 1.0
    for _ in range(params.k_max):
        ones = window_sum(y, size) - y
        zeros = neighbours - ones
        net = net_ii + params.beta_sp * (ones - zeros)
        mass = mass_ii + params.beta_sp * neighbours
        new = decide(net, mass)
        changed = np.count_nonzero(new != y) / y.size
        y = new
        if changed < params.stop_fraction:
            break
    return y


def fuse_thresholds(x: np.ndarray, thresholds: Sequence[ThresholdResult | int],
                    params: FusionParams = FusionParams()) -> np.ndarray:
    """Binarize at each threshold and fuse the results."""
    x = as_gray(x)
    ts = _threshold_values(thresholds)
    masks = [binarize(x, t) for t in ts]
    tables = build_weight_tables(ts, params.gamma)
    y = fuse_initial(x, masks, tables, params.neighborhood)
    if params.k_max >= 1:
        y = fuse_refine(y, x, masks, tables, params)
    return y


def fuse(x: np.ndarray, spec: EnsembleSpec, params: FusionParams = FusionParams()
         ) -> tuple[np.ndarray, list[ThresholdResult]]:
    x = as_gray(x)
    results = compute_ensemble(histogram(x), spec)
    return fuse_thresholds(x, results, params), results
