"""Box error metrics, the ensemble/expansion sweep, and lesion area regression."""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateFit, LesionLocusError, ManifestError
from .frame import FrameParams, remove_black_frame
from .fusion import (FusionParams, alpha_column, build_weight_tables, combine_votes, decide,
                     fuse_thresholds, vote_fields)
from .groundtruth import load_ground_truth
from .imaging import BoundingBox, binarize, extract_blue_channel, histogram, read_rgb
from .localization import BoxPolicy, ExpansionSpec, bounding_box, expand_nonadaptive
from .manifest import Manifest, ManifestEntry
from .thresholding import METHOD_ORDER, EnsembleSpec, ThresholdResult, threshold

log = logging.getLogger(__name__)

CSV_HEADER = ("ensemble", "expansion", "mu_ei", "sigma_ei", "mu_ex", "sigma_ex",
              "mu_s", "sigma_s", "failures")
DEFAULT_EXPANSIONS = tuple(
    [ExpansionSpec("nonadaptive", p) for p in (2, 4, 6, 8)]
    + [ExpansionSpec("adaptive", g) for g in (4, 6, 8, 10)]
)


def hance_error(auto_box: BoundingBox, manual_box: BoundingBox) -> float:
    """XOR area of the two filled boxes as a percentage of the manual box area."""
    w = min(auto_box.right, manual_box.right) - max(auto_box.left, manual_box.left) + 1
    h = min(auto_box.bottom, manual_box.bottom) - max(auto_box.top, manual_box.top) + 1
    inter = max(0, w) * max(0, h)
    xor = auto_box.area + manual_box.area - 2 * inter
    return xor / manual_box.area * 100.0


def size_stat(auto_box: BoundingBox, dims: tuple[int, int]) -> float:
    """Image area over box area, in percent (100 = the box is the whole image)."""
    width, height = dims
    return width * height / auto_box.area * 100.0


def enumerate_ensembles(sizes: Iterable[int]) -> list[EnsembleSpec]:
    sizes = sorted(set(sizes))
    if not sizes:
        raise ValueError("need at least one ensemble size")
    for k in sizes:
        if not 1 <= k <= len(METHOD_ORDER):
            raise ValueError(f"ensemble size {k} outside 1..{len(METHOD_ORDER)}")
    return [EnsembleSpec(combo) for k in sizes
            for combo in itertools.combinations(METHOD_ORDER, k)]


# --- regression -----------------------------------------------------------

@dataclass(frozen=True)
class LineModel:
    slope: float
    intercept: float

    def __call__(self, x):
        return self.slope * np.asarray(x, dtype=np.float64) + self.intercept


def fit_line(pairs: Sequence[tuple[float, float]]) -> LineModel:
    """Ordinary least squares fit of ``y = slope * x + intercept``."""
    xy = np.asarray(pairs, dtype=np.float64).reshape(-1, 2)
    x, y = xy[:, 0], xy[:, 1]
    if x.size < 2 or np.all(x == x[0]):
        raise DegenerateFit("need at least two distinct x values")
    xm = math.fsum(x) / x.size
    ym = math.fsum(y) / y.size
    dx = x - xm
    slope = math.fsum(dx * (y - ym)) / math.fsum(dx * dx)
    return LineModel(slope, ym - slope * xm)


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    n = len(values)
    if n == 0:
        return math.nan, math.nan
    mu = math.fsum(values) / n
    return mu, math.sqrt(math.fsum((v - mu) ** 2 for v in values) / n)


def area_estimate_errors(model: LineModel, pairs: Sequence[tuple[float, float]]) -> dict:
    """Mean and population std of ``|model(x) - y| / y * 100`` over the pairs."""
    errs = []
    for x, y in pairs:
        if y <= 0:
            raise ValueError("actual areas must be positive")
        errs.append(abs(model.slope * x + model.intercept - y) / y * 100.0)
    mu, sd = _mean_std(errs)
    return {"mean_pct": mu, "std_pct": sd}


# --- sweep ----------------------------------------------------------------

@dataclass
class EvalRecord:
    image_id: str
    ensemble: str
    expansion: str
    epsilon_initial: float
    epsilon_expanded: float
    size_stat: float
    areas: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class SweepRow:
    ensemble: str
    expansion: str
    mu_ei: float
    sigma_ei: float
    mu_ex: float
    sigma_ex: float
    mu_s: float
    sigma_s: float
    failures: int
    n: int

    def to_dict(self) -> dict:
        return asdict(self)

    def csv_fields(self) -> list[str]:
        nums = (self.mu_ei, self.sigma_ei, self.mu_ex, self.sigma_ex, self.mu_s, self.sigma_s)
        return [self.ensemble, self.expansion, *(f"{v:.2f}" for v in nums), str(self.failures)]


@dataclass
class SweepResult:
    rows: list[SweepRow]
    records: list[EvalRecord]
    failures: list[dict]

    def sorted_rows(self) -> list[SweepRow]:
        return sorted(self.rows, key=lambda r: (math.isnan(r.mu_ex), r.mu_ex))

    def to_dict(self) -> dict:
        return {
            "rows": [r.to_dict() for r in self.rows],
            "records": [r.to_dict() for r in self.records],
            "failures": self.failures,
        }


@dataclass(frozen=True)
class SweepConfig:
    frame: FrameParams = FrameParams()
    fusion: FusionParams = FusionParams()
    policy: BoxPolicy = BoxPolicy()


class _VoteCache:
    """Per-image cache of vote fields keyed by threshold value.

    The alpha column of a method depends only on its threshold, so every
    ensemble sharing a threshold can reuse the same windowed votes.
    """

    def __init__(self, blue: np.ndarray, fusion: FusionParams):
        self.blue = blue
        self.fusion = fusion
        self._fields: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def fields(self, t: int):
        if t not in self._fields:
            mask = binarize(self.blue, t)
            self._fields[t] = vote_fields(self.blue, mask, alpha_column(t, self.fusion.gamma),
                                          self.fusion.neighborhood)
        return self._fields[t]

    def fuse(self, thresholds: Sequence[int]) -> np.ndarray:
        if self.fusion.k_max >= 1:
            return fuse_thresholds(self.blue, thresholds, self.fusion)
        tables = build_weight_tables(thresholds, self.fusion.gamma)
        return decide(*combine_votes([self.fields(t) for t in thresholds], tables.beta))


def evaluate_image(entry: ManifestEntry, ensembles: Sequence[EnsembleSpec],
                   expansions: Sequence[ExpansionSpec], config: SweepConfig
                   ) -> tuple[list[EvalRecord], list[dict]]:
    """All (ensemble, expansion) records for one manifest entry, plus failures."""
    image_id = entry.image
    records: list[EvalRecord] = []
    failures: list[dict] = []

    def fail_all(ens_list, stage, exc):
        for ens in ens_list:
            for exp in expansions:
                failures.append({"image": image_id, "ensemble": ens.name, "expansion": str(exp),
                                 "stage": stage, "error": f"{type(exc).__name__}: {exc}"})

    img = read_rgb(entry.image_path)
    height, width = img.shape[:2]
    gt = load_ground_truth(entry.ground_truth_path, (width, height), entry.kind)
    f = config.frame
    try:
        cropped, crop = remove_black_frame(img, f.black_lightness_threshold,
                                           f.black_row_fraction, f.max_frame_fraction)
    except LesionLocusError as exc:
        fail_all(ensembles, "frame", exc)
        return records, failures
    blue = extract_blue_channel(cropped)
    hist = histogram(blue)
    method_t: dict = {}
    method_err: dict = {}
    for m in {m for ens in ensembles for m in ens}:
        try:
            method_t[m] = threshold(hist, m)
        except LesionLocusError as exc:
            method_err[m] = exc
    cache = _VoteCache(blue, config.fusion)
    crop_dims = (crop.width, crop.height)
    manual_area = int(gt.manual_border.sum())

    for ens in ensembles:
        bad = [m for m in ens if m in method_err]
        if bad:
            fail_all([ens], "fuse", method_err[bad[0]])
            continue
        results: list[ThresholdResult] = [method_t[m] for m in ens]
        ts = [r.threshold for r in results]
        fused = cache.fuse(ts)
        try:
            box = bounding_box(fused, config.policy)
        except LesionLocusError as exc:
            fail_all([ens], "box", exc)
            continue
        init = box.shift(crop.left, crop.top)
        eps_i = hance_error(init, gt.manual_box)
        for exp in expansions:
            try:
                if exp.mode == "nonadaptive":
                    grown = expand_nonadaptive(box, exp.amount, crop_dims)
                elif exp.mode == "adaptive":
                    raised = [min(t + exp.amount, 255) for t in ts]
                    g = bounding_box(cache.fuse(raised), config.policy)
                    grown = BoundingBox(min(g.left, box.left), min(g.top, box.top),
                                        max(g.right, box.right), max(g.bottom, box.bottom))
                else:
                    grown = box
            except LesionLocusError as exc:
                failures.append({"image": image_id, "ensemble": ens.name, "expansion": str(exp),
                                 "stage": "expand", "error": f"{type(exc).__name__}: {exc}"})
                continue
            grown = grown.shift(crop.left, crop.top)
            records.append(EvalRecord(
                image_id=image_id,
                ensemble=ens.name,
                expansion=str(exp),
                epsilon_initial=eps_i,
                epsilon_expanded=hance_error(grown, gt.manual_box),
                size_stat=size_stat(grown, (width, height)),
                areas={
                    "automatic_box": init.area,
                    "expanded_box": grown.area,
                    "manual_box": gt.manual_box.area,
                    "manual_border": manual_area,
                    "fusion_output": int(fused.sum()),
                },
            ))
    return records, failures


def _evaluate_safely(args):
    entry, ensembles, expansions, config = args
    try:
        return evaluate_image(entry, ensembles, expansions, config), None
    except (OSError, LesionLocusError, ValueError) as exc:
        return ([], []), f"{entry.image}: {type(exc).__name__}: {exc}"


def aggregate(records: Sequence[EvalRecord], failures: Sequence[dict],
              ensembles: Sequence[EnsembleSpec], expansions: Sequence[ExpansionSpec]) -> list[SweepRow]:
    cells: dict[tuple[str, str], list[EvalRecord]] = {}
    for r in records:
        cells.setdefault((r.ensemble, r.expansion), []).append(r)
    fail_count: dict[tuple[str, str], int] = {}
    for f in failures:
        key = (f["ensemble"], f["expansion"])
        fail_count[key] = fail_count.get(key, 0) + 1
    rows = []
    for ens in ensembles:
        for exp in expansions:
            key = (ens.name, str(exp))
            recs = cells.get(key, [])
            mu_ei, sd_ei = _mean_std([r.epsilon_initial for r in recs])
            mu_ex, sd_ex = _mean_std([r.epsilon_expanded for r in recs])
            mu_s, sd_s = _mean_std([r.size_stat for r in recs])
            rows.append(SweepRow(ens.name, str(exp), mu_ei, sd_ei, mu_ex, sd_ex, mu_s, sd_s,
                                 fail_count.get(key, 0), len(recs)))
    return rows


def sweep(manifest: Manifest, ensembles: Sequence[EnsembleSpec],
          expansions: Sequence[ExpansionSpec] = DEFAULT_EXPANSIONS,
          config: SweepConfig = SweepConfig(), jobs: int = 1) -> SweepResult:
    """Evaluate every (ensemble, expansion) cell over the manifest.

    Images that cannot be loaded abort the sweep with :class:`ManifestError`;
    pipeline failures on individual images are recorded and excluded from the
    cell statistics.
    """
    tasks = [(e, list(ensembles), list(expansions), config) for e in manifest.entries]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_evaluate_safely, tasks))
    else:
        outcomes = [_evaluate_safely(t) for t in tasks]
    problems = [err for _, err in outcomes if err]
    if problems:
        raise ManifestError("some manifest entries could not be loaded", problems)
    records = [r for (recs, _), _ in outcomes for r in recs]
    failures = [f for (_, fails), _ in outcomes for f in fails]
    for f in failures:
        log.warning("excluded %s / %s / %s: %s", f["image"], f["ensemble"], f["expansion"], f["error"])
    return SweepResult(aggregate(records, failures, ensembles, expansions), records, failures)


def area_pairs(records: Iterable[dict | EvalRecord], predictor: str) -> list[tuple[float, float]]:
    """``(predictor area, manual border area)`` per distinct image."""
    seen = {}
    for r in records:
        r = r.to_dict() if isinstance(r, EvalRecord) else r
        seen.setdefault(r["image_id"], (float(r["areas"][predictor]),
                                        float(r["areas"]["manual_border"])))
    return list(seen.values())
