import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lesion_locus.errors import DegenerateHistogram, EmptyMask
from lesion_locus.evaluation import hance_error
from lesion_locus.frame import CropRect
from lesion_locus.fusion import FusionParams, fuse_thresholds
from lesion_locus.imaging import BoundingBox, connected_components, extract_blue_channel
from lesion_locus.localization import (ALL_FOREGROUND, LARGEST_COMPONENT, BoxPolicy, ExpansionSpec,
                                       LocalizeConfig, bounding_box, expand_adaptive,
                                       expand_nonadaptive, localize)
from lesion_locus.synthetic import add_black_frame, make_case, make_suite
from lesion_locus.thresholding import EnsembleSpec, ThresholdMethod, ThresholdResult

OTSU = EnsembleSpec.parse("otsu")


def test_bounding_box_single_pixel():
    m = np.zeros((8, 8), np.uint8)
    m[4, 3] = 1
    assert bounding_box(m) == BoundingBox(3, 4, 3, 4)


def test_bounding_box_empty():
    with pytest.raises(EmptyMask):
        bounding_box(np.zeros((4, 4), np.uint8))
    with pytest.raises(EmptyMask):
        bounding_box(np.zeros((4, 4), np.uint8), ALL_FOREGROUND)


def test_speck_filtered_by_fraction_policy():
    m = np.zeros((30, 30), np.uint8)
    m[5:15, 5:15] = 1   # area 100
    m[25, 27] = 1       # area 1
    assert bounding_box(m, BoxPolicy("fraction", 0.05)) == BoundingBox(5, 5, 14, 14)
    assert bounding_box(m, ALL_FOREGROUND) == BoundingBox(5, 5, 27, 25)
    assert bounding_box(m, LARGEST_COMPONENT) == BoundingBox(5, 5, 14, 14)
    # oracle: filter components by area, then scan min/max
    kept = [c for c in connected_components(m) if c.area >= 0.05 * 100]
    assert len(kept) == 1 and kept[0].box == BoundingBox(5, 5, 14, 14)


def test_fraction_policy_keeps_multi_part_lesion():
    m = np.zeros((30, 30), np.uint8)
    m[2:10, 2:10] = 1
    m[20:26, 20:26] = 1
    assert bounding_box(m) == BoundingBox(2, 2, 25, 25)


def test_policy_parse_round_trip():
    for text in ("all", "largest", "fraction:0.1"):
        assert str(BoxPolicy.parse(text)) == text
    with pytest.raises(ValueError):
        BoxPolicy.parse("biggest")


def test_nonadaptive_examples():
    box = BoundingBox(100, 100, 199, 149)  # 100 x 50
    assert expand_nonadaptive(box, 2, (400, 400)) == BoundingBox(98, 99, 201, 150)
    flush = BoundingBox(0, 10, 99, 59)
    assert expand_nonadaptive(flush, 2, (400, 400)) == BoundingBox(0, 9, 101, 60)
    sq = BoundingBox(50, 50, 74, 74)  # 25 x 25, 4% = 1.0 px
    assert expand_nonadaptive(sq, 4, (200, 200)) == BoundingBox(49, 49, 75, 75)


def test_nonadaptive_round_half_up():
    box = BoundingBox(10, 10, 34, 34)  # 25 px: 2% = 0.5 -> 1
    assert expand_nonadaptive(box, 2, (100, 100)) == BoundingBox(9, 9, 35, 35)
    small = BoundingBox(10, 10, 19, 19)  # 10 px: 2% = 0.2 -> 0
    assert expand_nonadaptive(small, 2, (100, 100)) == small


@settings(max_examples=200)
@given(st.integers(1, 300), st.integers(1, 300), st.data(), st.sampled_from([2, 4, 6, 8, 50]))
def test_nonadaptive_enlarges(w, h, data, p):
    left = data.draw(st.integers(0, w - 1))
    right = data.draw(st.integers(left, w - 1))
    top = data.draw(st.integers(0, h - 1))
    bottom = data.draw(st.integers(top, h - 1))
    box = BoundingBox(left, top, right, bottom)
    out = expand_nonadaptive(box, p, (w, h))
    assert out.contains(box) and out.fits(w, h)
    dx = int(box.width * p / 100 + 0.5 + 1e-12)
    dy = int(box.height * p / 100 + 0.5 + 1e-12)
    room = (dx and (left > 0 or right < w - 1)) or (dy and (top > 0 or bottom < h - 1))
    assert (out.area > box.area) == bool(room)


def test_expansion_spec_validation():
    assert str(ExpansionSpec.parse("nonadaptive:2")) == "nonadaptive:2"
    assert str(ExpansionSpec.parse("adaptive:6")) == "adaptive:6"
    assert str(ExpansionSpec.parse("none")) == "none"
    for bad in ("nonadaptive:0", "nonadaptive:51", "adaptive:0", "adaptive:65", "adaptive:2.5",
                "grow:3", "adaptive"):
        with pytest.raises(ValueError):
            ExpansionSpec.parse(bad)


def radial_image(size=301, r0=40, base=40, top=230):
    """Dark disc with a linear ramp of one gray level per pixel of radius."""
    c = size // 2
    ys, xs = np.mgrid[0:size, 0:size]
    r = np.hypot(xs - c, ys - c)
    g = np.where(r <= r0, base, base + (r - r0))
    return np.clip(np.rint(g), 0, top).astype(np.uint8)


def test_adaptive_zero_levels_is_identity():
    x = radial_image()
    t = [ThresholdResult(ThresholdMethod.OTSU, 100)]
    box0 = bounding_box(fuse_thresholds(x, t), ALL_FOREGROUND)
    assert expand_adaptive(x, OTSU, FusionParams(), 0, ALL_FOREGROUND, t) == box0


def test_adaptive_penumbra_ring():
    # levels in (T, T+G] occupy a ring exactly G px wide on the ramp
    x = radial_image()
    t = [ThresholdResult(ThresholdMethod.OTSU, 100)]
    b0 = expand_adaptive(x, OTSU, FusionParams(), 0, ALL_FOREGROUND, t)
    b6 = expand_adaptive(x, OTSU, FusionParams(), 6, ALL_FOREGROUND, t)
    growth = (b0.left - b6.left, b0.top - b6.top, b6.right - b0.right, b6.bottom - b0.bottom)
    for g in growth:
        assert 5 <= g <= 7
    # analytic radius of the thresholded disc: r0 + (T - base) = 100
    assert abs((b0.right - b0.left) / 2 - 100) <= 1.5


def test_adaptive_large_g_covers_image():
    x = radial_image(top=150)
    t = [ThresholdResult(ThresholdMethod.OTSU, 100)]
    box = expand_adaptive(x, OTSU, FusionParams(), 64, ALL_FOREGROUND, t)
    assert box == BoundingBox(0, 0, 300, 300)


@pytest.fixture(scope="module")
def small_suite():
    return make_suite(4, seed=3, width=256, height=192, frame=8, edge_sigma=2.0)


def test_adaptive_monotone_in_levels(small_suite):
    spec = EnsembleSpec.parse("otsu,kapur,huang,sahoo")
    for case in small_suite:
        blue = extract_blue_channel(case.image[8:-8, 8:-8])
        boxes = [expand_adaptive(blue, spec, FusionParams(), g, ALL_FOREGROUND)
                 for g in (1, 4, 6, 8, 10, 30)]
        for a, b in zip(boxes, boxes[1:]):
            assert b.contains(a)


def test_localize_sharp_ellipse_close_to_analytic_box():
    rng = np.random.default_rng(0)
    for _ in range(3):
        case = make_case(rng, edge_sigma=0.5)
        res = localize(case.image)
        assert hance_error(res.initial_box, case.gt_box) <= 5.0


def test_localize_frameless_keeps_full_crop():
    case = make_case(np.random.default_rng(4), 256, 192, frame=0, edge_sigma=2.0)
    res = localize(case.image)
    assert res.crop == CropRect.full(256, 192)


def test_localize_uniform_gray_fails_at_fuse():
    with pytest.raises(DegenerateHistogram) as info:
        localize(np.full((40, 40, 3), 128, np.uint8))
    assert info.value.stage == "fuse"


def test_localize_all_black_fails_at_frame():
    from lesion_locus.errors import FrameConsumesImage
    with pytest.raises(FrameConsumesImage) as info:
        localize(np.zeros((40, 40, 3), np.uint8))
    assert info.value.stage == "frame"


@pytest.mark.parametrize("expansion", ["none", "nonadaptive:4", "adaptive:6"])
def test_containment_chain(small_suite, expansion):
    cfg = LocalizeConfig(expansion=ExpansionSpec.parse(expansion), policy=ALL_FOREGROUND)
    for case in small_suite:
        res = localize(case.image, cfg)
        h, w = case.image.shape[:2]
        ys, xs = np.nonzero(res.fused)
        assert res.initial_box.left <= xs.min() and xs.max() <= res.initial_box.right
        assert res.initial_box.top <= ys.min() and ys.max() <= res.initial_box.bottom
        assert res.expanded_box.contains(res.initial_box)
        assert res.expanded_box.fits(w, h)
        c = res.crop
        assert BoundingBox(c.left, c.top, c.right, c.bottom).contains(res.expanded_box)


def test_black_frame_invariance():
    case = make_case(np.random.default_rng(6), 256, 192, frame=0, edge_sigma=2.0)
    cfg = LocalizeConfig(expansion=ExpansionSpec("nonadaptive", 4))
    base = localize(case.image, cfg)
    framed = localize(add_black_frame(case.image, 20), cfg)
    assert framed.crop == CropRect(20, 211, 20, 275)
    assert framed.initial_box == base.initial_box.shift(20, 20)
    assert framed.expanded_box == base.expanded_box.shift(20, 20)
    assert [t.threshold for t in framed.thresholds] == [t.threshold for t in base.thresholds]


def test_result_dict():
    case = make_case(np.random.default_rng(1), 256, 192, frame=8, edge_sigma=2.0)
    d = localize(case.image).to_dict()
    assert set(d) == {"image_size", "crop", "thresholds", "initial_box", "expanded_box", "fusion_area"}
    assert set(d["thresholds"]) == {"Otsu", "Kapur", "Huang", "Sahoo"}
