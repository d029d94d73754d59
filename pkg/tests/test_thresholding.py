import numpy as np
import pytest

from lesion_locus.errors import DegenerateHistogram
from lesion_locus.thresholding import (METHOD_ORDER, EnsembleSpec, ThresholdMethod, compute_ensemble,
                                       cross_entropy_scores, huang_wang, kapur, li_tam,
                                       li_tam_iterations, otsu, renyi_threshold, sahoo,
                                       sahoo_weights, threshold, yen)

import oracles
from corpora import histogram_corpus

ALL = [otsu, kapur, huang_wang, yen, sahoo, li_tam]


def hist(**levels):
    h = np.zeros(256, np.int64)
    for k, v in levels.items():
        h[int(k[1:])] = v
    return h


BIMODAL = hist(l50=100, l200=100)
ADJACENT = hist(l10=50, l11=50)
SYMMETRIC = hist(l60=100, l190=100)
UNIFORM = np.ones(256, np.int64)


@pytest.mark.parametrize("fn", ALL, ids=lambda f: f.__name__)
def test_single_level_is_degenerate(fn):
    with pytest.raises(DegenerateHistogram):
        fn(hist(l77=1000))
    with pytest.raises(DegenerateHistogram):
        fn(np.zeros(256, np.int64))


@pytest.mark.parametrize("fn", ALL, ids=lambda f: f.__name__)
def test_far_bimodal_and_adjacent(fn):
    # every criterion is flat between the two spikes; smallest T wins
    assert fn(BIMODAL).threshold == 50
    assert fn(ADJACENT).threshold == 10
    assert fn(SYMMETRIC).threshold == 60


def test_examples_match_exhaustive_oracles():
    for h in (BIMODAL, ADJACENT, SYMMETRIC, UNIFORM):
        for m in METHOD_ORDER:
            assert threshold(h, m).threshold == oracles.THRESHOLD_ORACLES[m.value](list(h))


def test_kapur_uniform_histogram():
    assert kapur(UNIFORM).threshold == 127


def test_huang_far_peaks_lower_peak():
    h = hist(l30=400, l31=50, l220=300, l221=80)
    assert huang_wang(h).threshold == oracles.huang_oracle(list(h)) == 31


def test_sahoo_coincident_thresholds():
    t = [renyi_threshold(SYMMETRIC, o) for o in (0.5, 1.0, 2.0)]
    assert t == [60, 60, 60]
    assert sahoo(SYMMETRIC).threshold == 60


@pytest.mark.parametrize("ts, w", [((10, 12, 14), (1, 2, 1)), ((10, 12, 40), (0, 1, 3)),
                                   ((10, 38, 40), (3, 1, 0)), ((10, 30, 60), (1, 2, 1)),
                                   ((10, 15, 20), (1, 2, 1)), ((10, 16, 21), (3, 1, 0))])
def test_sahoo_weights(ts, w):
    assert sahoo_weights(*ts) == w
    assert sum(w) == 4


def test_sahoo_dual_implementation():
    rng = np.random.default_rng(5)
    for _ in range(30):
        h = np.zeros(256, np.int64)
        for mu in rng.uniform(30, 220, size=2):
            v = np.clip(np.round(rng.normal(mu, rng.uniform(5, 25), 3000)), 0, 255).astype(int)
            h += np.bincount(v, minlength=256)
        t1, t2, t3 = (renyi_threshold(h, o) for o in (0.5, 1.0, 2.0))
        assert sahoo(h).threshold == oracles.sahoo_combine(list(h), t1, t2, t3)
        lo, hi = sorted((t1, t2, t3))[::2]
        assert lo <= sahoo(h).threshold <= hi


def test_li_extreme_levels():
    h = hist(l0=100, l255=100)
    path = li_tam_iterations(h)
    assert path[-1] == 0
    assert li_tam(h).threshold == oracles.li_oracle(list(h)) == 0


def test_li_adjacent_pair_converges_fast():
    h = hist(l100=7, l101=9)
    assert len(li_tam_iterations(h)) - 1 <= 2
    assert li_tam(h).threshold == 100


@pytest.fixture(scope="module")
def corpus():
    return histogram_corpus(48, seed=11)


@pytest.mark.parametrize("method", METHOD_ORDER, ids=lambda m: m.value)
def test_oracle_equivalence(method, corpus):
    oracle = oracles.THRESHOLD_ORACLES[method.value]
    for h in corpus:
        assert threshold(h, method).threshold == oracle(list(h))


def test_li_fixed_point_is_local_minimum(corpus):
    for h in corpus:
        t = li_tam(h, global_check=False).threshold
        levels = np.flatnonzero(h)
        lo, hi = int(levels[0]), int(levels[-1]) - 1
        e = oracles.cross_entropy(list(h), t)
        tol = 1e-9 * max(1.0, abs(e))
        for u in (t - 1, t + 1):
            if lo <= u <= hi:
                assert oracles.cross_entropy(list(h), u) >= e - tol


def test_li_scores_match_oracle(corpus):
    for h in corpus[:8]:
        s = cross_entropy_scores(h)
        levels = np.flatnonzero(h)
        for t in range(int(levels[0]), int(levels[-1])):
            assert s[t] == pytest.approx(oracles.cross_entropy(list(h), t), rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("fn", [otsu, kapur], ids=lambda f: f.__name__)
def test_shift_covariance(fn, corpus):
    for h in corpus:
        levels = np.flatnonzero(h)
        room = 255 - int(levels[-1])
        for k in {1, min(7, room), room}:
            if not 0 < k <= room:
                continue
            shifted = np.roll(h, k)
            assert fn(shifted).threshold == fn(h).threshold + k


def test_threshold_within_populated_range(corpus):
    for h in corpus:
        levels = np.flatnonzero(h)
        for m in METHOD_ORDER:
            t = threshold(h, m).threshold
            assert levels[0] <= t < levels[-1]


def test_compute_ensemble_order():
    res = compute_ensemble(BIMODAL, EnsembleSpec.parse("otsu"))
    assert len(res) == 1 and res[0].method is ThresholdMethod.OTSU
    spec = EnsembleSpec(tuple(reversed(METHOD_ORDER)))
    res = compute_ensemble(BIMODAL, spec)
    assert [r.method for r in res] == list(spec.methods)


def test_ensemble_spec_validation():
    with pytest.raises(ValueError):
        EnsembleSpec.parse("otsu,kapur,otsu")
    with pytest.raises(ValueError):
        EnsembleSpec(())
    with pytest.raises(ValueError):
        EnsembleSpec.parse("otsu,bogus")
    spec = EnsembleSpec.parse("Otsu-Kapur-Huang-Sahoo")
    assert spec.name == "Otsu-Kapur-Huang-Sahoo"
    assert EnsembleSpec.parse("otsu,kapur,huang_wang,sahoo") == spec


def test_histogram_shape_checked():
    with pytest.raises(ValueError):
        otsu(np.ones(10))
