import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from melaseg import synthetic
from melaseg.errors import NoLesionError
from melaseg.shape_features import (
    ShapeFeatures,
    chain_length,
    compute_shape_features,
    convex_hull,
    polygon_area,
    trace_contour,
)

from conftest import disk, rotate90

ROTATION_STABLE = ("area", "perimeter", "compactness", "asymmetry", "eccentricity",
                   "hu_1", "hu_2", "hu_3", "solidity")


def notched_disk(angle, r=60, notch=30, size=None):
    """Disk with a circular bite centred on its rim, rasterised at ``angle``."""
    size = size or 2 * r + 40
    yy, xx = np.mgrid[0:size, 0:size].astype(float)
    c = (size - 1) / 2
    dx, dy = xx - c, yy - c
    u = np.cos(angle) * dx + np.sin(angle) * dy
    v = -np.sin(angle) * dx + np.cos(angle) * dy
    return (np.hypot(u, v) <= r) & ~(np.hypot(u - r, v) <= notch)


def crescent(size=200):
    yy, xx = np.mgrid[0:size, 0:size].astype(float)
    return (np.hypot(xx - 100, yy - 100) <= 60) & ~(np.hypot(xx - 130, yy - 100) <= 50)


def rel(a, b):
    return abs(a - b) / max(abs(a), 1e-300)


# -- contour ---------------------------------------------------------------


def test_single_pixel_contour():
    m = np.zeros((5, 5), bool)
    m[2, 3] = True
    assert trace_contour(m).tolist() == [[3, 2]]


def test_square_contour_has_eight_points():
    m = np.zeros((6, 6), bool)
    m[1:4, 2:5] = True
    c = trace_contour(m)
    assert len(c) == 8
    assert {tuple(p) for p in c} == {(x, y) for y in range(1, 4) for x in range(2, 5)} - {(3, 2)}


def test_contour_is_closed_and_positively_oriented():
    c = trace_contour(disk(20))
    steps = np.abs(np.diff(np.vstack([c, c[:1]]), axis=0))
    assert steps.max() == 1 and np.all(steps.sum(axis=1) >= 1)
    x, y = c[:, 0].astype(float), c[:, 1].astype(float)
    assert np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)) > 0


def test_disk_contour_length():
    c = trace_contour(disk(50))
    assert abs(chain_length(c) - 2 * math.pi * 50) / (2 * math.pi * 50) < 0.05


def test_line_contour_walks_both_sides():
    m = np.zeros((3, 7), bool)
    m[1, 1:6] = True
    c = trace_contour(m)
    assert [p[0] for p in c] == [1, 2, 3, 4, 5, 4, 3, 2]
    assert chain_length(c) == 8.0


def test_empty_mask_raises():
    with pytest.raises(NoLesionError):
        trace_contour(np.zeros((4, 4), bool))
    with pytest.raises(NoLesionError):
        compute_shape_features(np.zeros((4, 4), bool))


# -- hull helpers ------------------------------------------------------------


def test_hull_of_square_points():
    pts = np.array([[0, 0], [2, 0], [2, 2], [0, 2], [1, 1], [1, 0]])
    hull = convex_hull(pts)
    assert len(hull) == 4 and polygon_area(hull) == 4.0


# -- features ---------------------------------------------------------------


def test_solid_square():
    m = np.zeros((140, 140), bool)
    m[20:120, 20:120] = True
    f = compute_shape_features(m)
    assert f.area == 10000
    assert f.asymmetry == 0
    assert 0.98 <= f.solidity <= 1.01
    assert f.aspect_ratio == pytest.approx(1.0) and f.eccentricity == pytest.approx(0.0, abs=1e-7)


def test_disk_analytics():
    f = compute_shape_features(disk(50))
    assert 0.95 <= f.compactness <= 1.15
    assert f.eccentricity < 0.1
    assert f.hu_2 < 1e-3
    # Continuous disk: phi1 = 1 / (2 pi).
    assert f.hu_1 == pytest.approx(1 / (2 * math.pi), rel=1e-3)


def test_two_to_one_ellipse():
    m = synthetic.ellipse_mask((220, 220), (109.5, 109.5), (80, 40))
    f = compute_shape_features(m)
    assert abs(f.eccentricity - math.sqrt(3) / 2) < 0.02
    assert abs(f.aspect_ratio - 2) < 0.05


def test_single_pixel_conventions():
    m = np.zeros((5, 5), bool)
    m[2, 2] = True
    f = compute_shape_features(m)
    assert f.area == 1 and f.aspect_ratio == 1 and f.eccentricity == 0
    assert f.solidity == 1.0 and f.hull_area == 1.0


def test_straight_line_conventions():
    m = np.zeros((5, 20), bool)
    m[2, 3:15] = True
    f = compute_shape_features(m)
    assert f.aspect_ratio == 1.0 and f.eccentricity == 0.0


def test_translation_is_exact():
    base = np.zeros((200, 200), bool)
    base[:150, :150] = notched_disk(0.4, r=55, notch=25, size=150)
    ref = compute_shape_features(base)
    for dy, dx in [(3, 7), (40, 1), (0, 45)]:
        moved = np.roll(np.roll(base, dy, axis=0), dx, axis=1)
        assert compute_shape_features(moved) == ref


@pytest.mark.parametrize("k", [1, 2, 3])
def test_quarter_turn_invariance(k):
    m = notched_disk(0.4, r=55, notch=25)
    a = compute_shape_features(m).as_dict()
    b = compute_shape_features(rotate90(m, k)).as_dict()
    for name in ROTATION_STABLE:
        assert rel(a[name], b[name]) <= 1e-6 or abs(a[name] - b[name]) < 1e-12, name


@pytest.mark.parametrize("r, notch", [(50, 25), (60, 30)])
def test_hu_stable_under_thirty_degrees(r, notch):
    a = compute_shape_features(notched_disk(0.0, r, notch))
    b = compute_shape_features(notched_disk(math.pi / 6, r, notch))
    for name in ("hu_1", "hu_2", "hu_3"):
        assert rel(getattr(a, name), getattr(b, name)) < 0.02


def test_solidity_of_large_convex_shapes():
    shapes = [
        disk(150),
        synthetic.ellipse_mask((320, 320), (160, 160), (140, 90), 0.7),
        np.pad(np.ones((120, 60), bool), 10),
    ]
    for m in shapes:
        assert abs(compute_shape_features(m).solidity - 1) < 1e-2


def test_crescent_is_not_solid():
    f = compute_shape_features(crescent())
    assert f.solidity < 0.9
    assert f.convexity < 1.0


@settings(max_examples=25, deadline=None)
@given(
    a=st.floats(8, 40),
    ratio=st.floats(0.3, 1.0),
    angle=st.floats(0, math.pi),
)
def test_invariants_on_ellipses(a, ratio, angle):
    m = synthetic.ellipse_mask((100, 100), (49.5, 49.7), (a, max(a * ratio, 3.0)), angle)
    f = compute_shape_features(m)
    values = np.array(list(f.as_dict().values()))
    assert np.all(np.isfinite(values))
    assert f.area > 0 and f.perimeter > 0
    assert f.solidity <= 1 + 1e-6
    assert 0 <= f.asymmetry <= 1 and 0 <= f.eccentricity < 1 and f.aspect_ratio >= 1
    if f.area >= 100:
        assert f.compactness >= 0.9


def test_field_order_and_count():
    assert ShapeFeatures.names()[:3] == ["area", "perimeter", "compactness"]
    assert len(ShapeFeatures.names()) == 17
