"""Global histogram thresholding criteria.

Every method maps a 256-bin histogram to a threshold ``T`` splitting the gray
levels into ``C0 = [0..T]`` and ``C1 = [T+1..255]``. Candidate thresholds are
restricted to those leaving both classes non-empty, i.e. ``T`` in
``[g_min, g_max - 1]`` where ``g_min``/``g_max`` are the lowest and highest
populated levels. Among equally good candidates the smallest is returned;
"equally good" means within a relative ``1e-9`` of the optimum so the result
does not depend on floating point summation order.

Criteria (``p`` is the normalised histogram, ``P0``/``P1`` class masses):

otsu
    maximise between-class variance ``P0 P1 (mu0 - mu1)^2``.
kapur
    maximise ``H(C0) + H(C1)``, Shannon entropies of the renormalised classes.
huang
    minimise the fuzzy entropy ``sum_g h(g) S(m(g))`` with membership
    ``m(g) = 1 / (1 + |g - mu_class(g)| / (g_max - g_min))`` and
    ``S(m) = -m ln m - (1 - m) ln(1 - m)``.
yen
    maximise ``-ln(sum_C0 (p/P0)^2) - ln(sum_C1 (p/P1)^2)``.
sahoo
    Renyi-entropy thresholds of orders 0.5, 1 and 2 merged by a rank
    weighting (see :func:`sahoo`).
li
    minimum cross entropy ``-m0 ln mu0 - m1 ln mu1`` (``m`` first moments),
    located with the iterative fixed point ``T = (mu0 - mu1) / (ln mu0 - ln mu1)``.

``0 ln 0`` is taken as 0 throughout.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateHistogram
from .imaging import N_LEVELS

TIE_RTOL = 1e-9
SAHOO_ORDERS = (0.5, 1.0, 2.0)
SAHOO_NEAR = 5
LI_MAX_ITER = 256

_LEVELS = np.arange(N_LEVELS, dtype=np.float64)


class ThresholdMethod(enum.Enum):
    OTSU = "otsu"
    KAPUR = "kapur"
    HUANG_WANG = "huang"
    YEN = "yen"
    SAHOO = "sahoo"
    LI_TAM = "li"

    @property
    def label(self) -> str:
        return _LABELS[self]

    @classmethod
    def parse(cls, token: str) -> "ThresholdMethod":
        key = token.strip().lower().replace("-", "_").replace("&", "_")
        try:
            return _ALIASES[key]
        except KeyError:
            raise ValueError(f"unknown thresholding method {token!r}") from None


_LABELS = {
    ThresholdMethod.OTSU: "Otsu",
    ThresholdMethod.KAPUR: "Kapur",
    ThresholdMethod.HUANG_WANG: "Huang",
    ThresholdMethod.YEN: "Yen",
    ThresholdMethod.SAHOO: "Sahoo",
    ThresholdMethod.LI_TAM: "Li",
}
_ALIASES = {m.value: m for m in ThresholdMethod}
_ALIASES.update({
    "huang_wang": ThresholdMethod.HUANG_WANG,
    "huangwang": ThresholdMethod.HUANG_WANG,
    "li_tam": ThresholdMethod.LI_TAM,
    "litam": ThresholdMethod.LI_TAM,
})

# Fixed canonical order used for ensemble names.
METHOD_ORDER = tuple(ThresholdMethod)


@dataclass(frozen=True)
class ThresholdResult:
    method: ThresholdMethod
    threshold: int

    def __post_init__(self):
        if not 0 <= self.threshold < N_LEVELS:
            raise ValueError(f"threshold {self.threshold} outside 0..255")


@dataclass(frozen=True)
class EnsembleSpec:
    """An ordered, duplicate-free selection of one to six methods."""

    methods: tuple[ThresholdMethod, ...]

    def __post_init__(self):
        methods = tuple(m if isinstance(m, ThresholdMethod) else ThresholdMethod.parse(m)
                        for m in self.methods)
        if not 1 <= len(methods) <= len(METHOD_ORDER):
            raise ValueError("an ensemble needs between 1 and 6 methods")
        if len(set(methods)) != len(methods):
            raise ValueError(f"duplicate method in ensemble {[m.value for m in methods]}")
        object.__setattr__(self, "methods", methods)

    @property
    def name(self) -> str:
        return "-".join(m.label for m in self.methods)

    def __len__(self) -> int:
        return len(self.methods)

    def __iter__(self):
        return iter(self.methods)

    @classmethod
    def parse(cls, text: str) -> "EnsembleSpec":
        """Parse ``"otsu,kapur,huang"`` or ``"Otsu-Kapur-Huang"``."""
        sep = "," if "," in text else "-"
        return cls(tuple(ThresholdMethod.parse(t) for t in text.split(sep) if t.strip()))


# --- shared helpers -------------------------------------------------------

def _check(h) -> tuple[np.ndarray, int, int]:
    h = np.asarray(h)
    if h.shape != (N_LEVELS,):
        raise ValueError(f"histogram must have {N_LEVELS} bins, got shape {h.shape}")
    if (h < 0).any():
        raise ValueError("histogram counts must be non-negative")
    levels = np.flatnonzero(h)
    if levels.size < 2:
        raise DegenerateHistogram(
            f"histogram has {levels.size} populated gray level(s); need at least 2")
    return h.astype(np.float64), int(levels[0]), int(levels[-1])


def _best(scores: np.ndarray, lo: int, hi: int, maximize: bool) -> int:
    """Smallest T in ``[lo, hi]`` whose score is optimal within the tie tolerance."""
    s = scores[lo:hi + 1]
    best = s.max() if maximize else s.min()
    tol = TIE_RTOL * max(1.0, abs(best))
    return lo + int(np.flatnonzero(np.abs(s - best) <= tol)[0])


def _xlogx(v: np.ndarray) -> np.ndarray:
    out = np.zeros_like(v)
    pos = v > 0
    out[pos] = v[pos] * np.log(v[pos])
    return out


def _above(v: np.ndarray) -> np.ndarray:
    """Sum of ``v`` strictly above each level; a reverse cumsum avoids cancellation."""
    return np.append(np.cumsum(v[::-1])[::-1][1:], 0.0)


def _class_masses(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return np.cumsum(p), _above(p)


def _safe_div(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.divide(a, b, out=np.zeros_like(a), where=b > 0)


def _safe_log(v: np.ndarray) -> np.ndarray:
    return np.log(v, out=np.zeros_like(v), where=v > 0)


# --- criteria -------------------------------------------------------------

def otsu_scores(h) -> np.ndarray:
    hist, _, _ = _check(h)
    p = hist / hist.sum()
    w0, w1 = _class_masses(p)
    mu0 = _safe_div(np.cumsum(p * _LEVELS), w0)
    mu1 = _safe_div(_above(p * _LEVELS), w1)
    return w0 * w1 * (mu0 - mu1) ** 2


def renyi_scores(h, order: float) -> np.ndarray:
    """Sum of the two class Renyi entropies of the given order for every T."""
    hist, _, _ = _check(h)
    p = hist / hist.sum()
    p0, p1 = _class_masses(p)
    if order == 1.0:
        # H(C) = ln P - (sum p ln p) / P
        plogp = _xlogx(p)
        h0 = _safe_log(p0) - _safe_div(np.cumsum(plogp), p0)
        h1 = _safe_log(p1) - _safe_div(_above(plogp), p1)
        return h0 + h1
    pa = np.where(p > 0, p, 0.0) ** order
    s0 = np.cumsum(pa)
    s1 = _above(pa)
    h0 = (_safe_log(s0) - order * _safe_log(p0)) / (1.0 - order)
    h1 = (_safe_log(s1) - order * _safe_log(p1)) / (1.0 - order)
    return h0 + h1


def kapur_scores(h) -> np.ndarray:
    return renyi_scores(h, 1.0)


def yen_scores(h) -> np.ndarray:
    hist, _, _ = _check(h)
    p = hist / hist.sum()
    p0, p1 = _class_masses(p)
    g0 = np.cumsum(p * p)
    g1 = _above(p * p)
    return -_safe_log(g0) - _safe_log(g1) + 2.0 * _safe_log(p0) + 2.0 * _safe_log(p1)


def huang_scores(h) -> np.ndarray:
    hist, lo, hi = _check(h)
    n = hist.sum()
    mu0 = _safe_div(np.cumsum(hist * _LEVELS), np.cumsum(hist))
    mu1 = _safe_div(_above(hist * _LEVELS), _above(hist))
    c = float(hi - lo)
    # rows: candidate T, columns: gray level g
    g = _LEVELS[None, :]
    below = g <= _LEVELS[:, None]
    mu = np.where(below, mu0[:, None], mu1[:, None])
    member = 1.0 / (1.0 + np.abs(g - mu) / c)
    ent = -_xlogx(member) - _xlogx(1.0 - member)
    return (ent * hist[None, :]).sum(axis=1) / n


def cross_entropy_scores(h) -> np.ndarray:
    hist, _, _ = _check(h)
    n = hist.sum()
    n0 = np.cumsum(hist)
    n1 = _above(hist)
    m0 = np.cumsum(hist * _LEVELS)
    m1 = _above(hist * _LEVELS)
    mu0 = _safe_div(m0, n0)
    mu1 = _safe_div(m1, n1)
    return -(m0 * _safe_log(mu0) + m1 * _safe_log(mu1)) / n


# --- single-method operations ---------------------------------------------

def _argbest(h, scores_fn, maximize: bool) -> int:
    _, lo, hi = _check(h)
    return _best(scores_fn(h), lo, hi - 1, maximize)


def otsu(h) -> ThresholdResult:
    return ThresholdResult(ThresholdMethod.OTSU, _argbest(h, otsu_scores, True))


def kapur(h) -> ThresholdResult:
    return ThresholdResult(ThresholdMethod.KAPUR, _argbest(h, kapur_scores, True))


def huang_wang(h) -> ThresholdResult:
    return ThresholdResult(ThresholdMethod.HUANG_WANG, _argbest(h, huang_scores, False))


def yen(h) -> ThresholdResult:
    return ThresholdResult(ThresholdMethod.YEN, _argbest(h, yen_scores, True))


def renyi_threshold(h, order: float) -> int:
    return _argbest(h, lambda hh: renyi_scores(hh, order), True)


def sahoo_weights(t1: int, t2: int, t3: int) -> tuple[int, int, int]:
    """Rank weights for the sorted Renyi thresholds ``t1 <= t2 <= t3``."""
    near12 = abs(t1 - t2) <= SAHOO_NEAR
    near23 = abs(t2 - t3) <= SAHOO_NEAR
    if near12 and not near23:
        return (0, 1, 3)
    if near23 and not near12:
        return (3, 1, 0)
    return (1, 2, 1)


def sahoo(h, orders: Sequence[float] = SAHOO_ORDERS) -> ThresholdResult:
    """Sahoo, Wilkins & Yeager's Renyi-entropy threshold.

    The three order-specific thresholds are sorted to ``t1 <= t2 <= t3`` and
    merged as::

        T = t1 (P(t1) + w1 omega / 4) + t2 w2 omega / 4 + t3 (1 - P(t3) + w3 omega / 4)

    with ``P`` the cumulative distribution, ``omega = P(t3) - P(t1)`` and the
    weights from :func:`sahoo_weights`. The weights of the three thresholds
    sum to one, so ``T`` lies in ``[t1, t3]``.
    """
    hist, _, _ = _check(h)
    t1, t2, t3 = sorted(renyi_threshold(h, o) for o in orders)
    cdf = np.cumsum(hist) / hist.sum()
    w1, w2, w3 = sahoo_weights(t1, t2, t3)
    omega = cdf[t3] - cdf[t1]
    value = (t1 * (cdf[t1] + 0.25 * omega * w1)
             + 0.25 * t2 * omega * w2
             + t3 * (1.0 - cdf[t3] + 0.25 * omega * w3))
    # guard truncation against a convex combination landing a hair below an integer
    return ThresholdResult(ThresholdMethod.SAHOO, int(math.floor(value + 1e-9)))


def li_tam_iterations(h) -> list[int]:
    """Raw fixed-point trajectory, starting from the floor of the mean level."""
    hist, lo, hi = _check(h)
    n = hist.sum()
    m_all = float((hist * _LEVELS).sum())
    n0c = np.cumsum(hist)
    m0c = np.cumsum(hist * _LEVELS)
    t = min(max(int(m_all // n), lo), hi - 1)
    path = [t]
    for _ in range(LI_MAX_ITER):
        n0, m0 = n0c[t], m0c[t]
        mu0 = m0 / n0
        mu1 = (m_all - m0) / (n - n0)
        if mu0 <= 0:
            # lower class sits entirely at level 0: log-mean limit is 0
            new = 0
        else:
            new = int(math.floor((mu1 - mu0) / (math.log(mu1) - math.log(mu0)) + 0.5))
        new = min(max(new, lo), hi - 1)
        if new == t or new in path:
            path.append(new)
            break
        path.append(new)
        t = new
    return path


def li_tam(h, global_check: bool = True) -> ThresholdResult:
    """Li & Tam's iterative minimum cross entropy threshold.

    The fixed-point iteration is run from the mean gray level. Because the
    objective is flat between populated levels, the iterate is then moved to
    the start of its plateau and finished with a discrete descent, which
    yields a local minimum under the smallest-``T`` tie rule.

    On sparse, multi-modal histograms that local minimum is occasionally not
    the global one. With ``global_check`` (the default) the full cross entropy
    curve is consulted and a strictly better level replaces the fixed point.
    """
    _, lo, hi = _check(h)
    scores = cross_entropy_scores(h)
    t = li_tam_iterations(h)[-1]
    t = _descend(scores, t, lo, hi - 1)
    if global_check:
        best = _best(scores, lo, hi - 1, maximize=False)
        if scores[best] < scores[t] - TIE_RTOL * max(1.0, abs(scores[t])):
            t = best
    return ThresholdResult(ThresholdMethod.LI_TAM, t)


def _descend(scores: np.ndarray, t: int, lo: int, hi: int) -> int:
    def better(a, b):
        return scores[a] < scores[b] - TIE_RTOL * max(1.0, abs(scores[b]))

    def same(a, b):
        return abs(scores[a] - scores[b]) <= TIE_RTOL * max(1.0, abs(scores[b]))

    while True:
        while t > lo and same(t - 1, t):
            t -= 1
        if t > lo and better(t - 1, t):
            t -= 1
            continue
        # look past a plateau to the right for a strictly lower level
        u = t + 1
        while u <= hi and same(u, t):
            u += 1
        if u <= hi and better(u, t):
            t = u
            continue
        return t


_DISPATCH = {
    ThresholdMethod.OTSU: otsu,
    ThresholdMethod.KAPUR: kapur,
    ThresholdMethod.HUANG_WANG: huang_wang,
    ThresholdMethod.YEN: yen,
    ThresholdMethod.SAHOO: sahoo,
    ThresholdMethod.LI_TAM: li_tam,
}


def threshold(h, method: ThresholdMethod | str) -> ThresholdResult:
    if not isinstance(method, ThresholdMethod):
        method = ThresholdMethod.parse(method)
    return _DISPATCH[method](h)


def compute_ensemble(h, methods: EnsembleSpec | Iterable) -> list[ThresholdResult]:
    if not isinstance(methods, EnsembleSpec):
        methods = EnsembleSpec(tuple(methods))
    return [threshold(h, m) for m in methods]
