import math

import bicount
import numpy as np
import pytest
from bicount.exceptions import NonSmooth, SelfIntersectingBoundary
from bicount.geometry import (
    BoundaryCurve,
    ConformalMapSpec,
    DiskSpec,
    EllipseSpec,
    build_curve,
    geometric_invariants,
    total_curvature,
)
from scipy import special


def test_disk_invariants(disk):
    L, A = geometric_invariants(disk)
    assert L == pytest.approx(2 * math.pi, rel=1e-12)
    assert A == pytest.approx(math.pi, rel=1e-12)
    assert total_curvature(disk) == pytest.approx(2 * math.pi, rel=1e-10)
    data = disk.point_data(np.linspace(0, L, 7))
    np.testing.assert_allclose(data.kappa, 1.0, rtol=1e-10)
    # inward normal points at the center
    np.testing.assert_allclose(data.normal, -data.r, atol=1e-10)


def test_ellipse_invariants(ellipse):
    a, b = 2.0, 1.0
    expected = 4 * a * special.ellipe(1 - b ** 2 / a ** 2)
    assert ellipse.perimeter == pytest.approx(expected, rel=1e-10)
    assert ellipse.area == pytest.approx(math.pi * a * b, rel=1e-12)
    assert ellipse.total_curvature() == pytest.approx(2 * math.pi, rel=1e-10)
    data = ellipse.point_data([0.0, ellipse.perimeter / 4])
    np.testing.assert_allclose(data.kappa, [a / b ** 2, b / a ** 2], rtol=1e-8)


def test_conformal_area(africa):
    spec = africa.spec
    assert africa.area == pytest.approx(spec.analytic_area(), rel=1e-10)
    assert africa.family == "conformal"
    assert africa.total_curvature() == pytest.approx(2 * math.pi, rel=1e-10)
    bigger = africa.scaled(2.0)
    assert bigger.area == pytest.approx(4 * africa.area, rel=1e-10)
    assert bigger.perimeter == pytest.approx(2 * africa.perimeter, rel=1e-10)


def test_arclength_round_trip(africa):
    s = np.linspace(0, africa.perimeter, 37, endpoint=False)
    t = africa.t_of_s(s)
    np.testing.assert_allclose(africa.s_of_t(t), s, atol=1e-10)
    # s is taken modulo the perimeter
    np.testing.assert_allclose(africa.t_of_s(s + africa.perimeter), t, atol=1e-12)


def test_sample(ellipse):
    sample = ellipse.sample(200)
    assert len(sample) == 200
    assert sample.ds == pytest.approx(ellipse.perimeter / 200)
    steps = np.abs(np.diff(sample.r))
    np.testing.assert_allclose(steps, sample.ds, rtol=5e-3)
    np.testing.assert_allclose(np.abs(sample.tangent), 1.0)
    np.testing.assert_allclose(sample.normal, 1j * sample.tangent)


def test_contains(ellipse):
    points = np.array([[0.0, 0.0], [1.9, 0.0], [2.1, 0.0], [0.0, 0.99], [0.0, -1.01]])
    np.testing.assert_array_equal(ellipse.contains(points), [True, True, False, True, False])
    assert ellipse.contains(np.zeros((3, 4, 2))).shape == (3, 4)


def test_to_frame(disk):
    frame = disk.to_frame(16)
    assert list(frame.columns) == ["s", "x", "y", "kappa"]
    assert len(frame) == 16
    np.testing.assert_allclose(frame["x"] ** 2 + frame["y"] ** 2, 1.0)


def test_bad_curves():
    with pytest.raises(NonSmooth, match="cusp"):
        BoundaryCurve(ConformalMapSpec(a=0.5, b=0.0))
    with pytest.raises(SelfIntersectingBoundary, match="crosses itself"):
        BoundaryCurve(ConformalMapSpec(a=0.0, b=0.9, delta=0.0))
    with pytest.raises(ValueError, match="resolution"):
        BoundaryCurve(DiskSpec(), resolution=16)
    with pytest.raises(ValueError, match="positive"):
        DiskSpec(-1.0)
    with pytest.raises(ValueError, match="positive"):
        EllipseSpec(1.0, 0.0)


def test_build_curve():
    assert build_curve(2.0).area == pytest.approx(4 * math.pi)
    assert build_curve((3.0, 1.0)).family == "ellipse"
    assert build_curve(DiskSpec()) == build_curve(1.0)
    assert build_curve(np.float64(2.0)).area == pytest.approx(4 * math.pi)
    for bad in ["disk", "2.0", None]:
        with pytest.raises(TypeError, match="spec must be"):
            build_curve(bad)
    assert isinstance(bicount.BoundaryCurve(DiskSpec()), BoundaryCurve)
