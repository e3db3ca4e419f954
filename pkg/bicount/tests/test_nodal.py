import math
import warnings

import numpy as np
import pytest
from scipy import special
from bicount.bim import EigenMode, solve_spectrum
from bicount.exceptions import IncompleteSequence, SuspectTangency, UnderResolved, WindowOutOfRange
from bicount.nodal import (
    BICountSequence,
    BoundarySubset,
    GaussianWindow,
    count_BI,
    count_BI_partial,
    count_sequence,
    smoothed_density,
    unfold,
    windowed_fluctuation,
    windowed_mean,
)

L = 2 * math.pi


def cosine_mode(m, n=256, phase=0.0):
    s = np.arange(n) * (L / n)
    return EigenMode(max(m, 1), np.cos(m * s + phase), 0.0, L)


@pytest.mark.parametrize("m", [0, 1, 3, 7])
def test_count_cosine(m):
    result = count_BI(cosine_mode(m, phase=0.3))
    assert result.eta == 2 * m
    assert not result.suspect_tangency
    expected = np.sort(np.mod((np.pi / 2 - 0.3 + np.pi * np.arange(2 * m)) / max(m, 1), L))
    np.testing.assert_allclose(result.zeros, expected, atol=1e-10)


def test_count_under_resolved():
    with pytest.raises(UnderResolved, match="per boundary wavelength"):
        count_BI(cosine_mode(50, n=256))


def test_count_flat_stretch():
    n = 1024
    s = np.arange(n) * (L / n)
    mode = EigenMode(150.0, np.sin(s) ** 7, 0.0, L)
    with pytest.warns(SuspectTangency, match="flat"):
        result = count_BI(mode)
    assert result.suspect_tangency
    assert result.eta == 2
    assert result.zeros[0] < 1e-2
    assert result.zeros[1] == pytest.approx(np.pi, abs=1e-2)

    # touching zero without a sign change is not a crossing
    touching = EigenMode(150.0, (1 + np.cos(s)) ** 3 / 8, 0.0, L)
    with pytest.warns(SuspectTangency):
        assert count_BI(touching).eta == 0


def test_count_shallow_dip():
    # a double zero pushed just below zero: two sign changes 1e-4 apart at s = pi
    n = 256
    s = np.arange(n) * (L / n)
    dip = EigenMode(10.0, 1 + np.cos(s) - 1e-9, 0.0, L)
    with pytest.warns(SuspectTangency, match="counted as 0 crossing"):
        result = count_BI(dip)
    assert result.eta == 0
    assert result.suspect_tangency
    # the same dip is resolved as two crossings once the tolerance is below it
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert count_BI(dip, tolerance=1e-12).eta == 2


def test_boundary_subset():
    full = BoundarySubset.parse("all", L)
    assert full.is_full
    assert full.measure == pytest.approx(L)
    empty = BoundarySubset.parse("", L)
    assert empty.intervals == ()
    assert empty.complement() == full
    wrapped = BoundarySubset.parse("0.9:0.1", L)
    assert wrapped.measure == pytest.approx(0.2 * L)
    np.testing.assert_array_equal(
        wrapped.contains([0.95 * L, 0.05 * L, 0.5 * L, 1.05 * L]), [True, True, False, True]
    )
    comp = wrapped.complement()
    assert comp.measure == pytest.approx(0.8 * L)
    np.testing.assert_allclose(comp.complement().intervals, wrapped.intervals, rtol=1e-14)
    merged = BoundarySubset.from_fractions([(0.1, 0.3), (0.2, 0.4)], L)
    assert merged.to_fractions() == "0.1:0.4"
    with pytest.raises(ValueError, match="start:stop"):
        BoundarySubset.parse("0.1-0.2", L)
    with pytest.raises(ValueError, match="perimeter"):
        BoundarySubset([], 0.0)


def test_partial_counts_add_up():
    mode = cosine_mode(5, phase=0.1)
    result = count_BI(mode)
    gamma = BoundarySubset.parse("0.05:0.4,0.7:0.8", L)
    inside = count_BI_partial(result, gamma)
    outside = count_BI_partial(result, gamma.complement())
    assert inside + outside == result.eta
    assert count_BI_partial(mode, gamma) == inside
    assert count_BI_partial(result, None) == result.eta


def test_sequence_errors():
    with pytest.raises(ValueError, match="even"):
        BICountSequence([1, 2], [2.0, 3.0], [0, 3], area=1.0, perimeter=4.0)
    with pytest.raises(ValueError, match="exceed"):
        BICountSequence([1], [2.0], [2], eta_gamma=[4], area=1.0, perimeter=4.0)
    with pytest.raises(ValueError, match="same length"):
        BICountSequence([1, 2], [2.0], [0, 2], area=1.0, perimeter=4.0)


def test_sequence():
    seq = BICountSequence(
        [1, 2, 3], [2.0, 3.0, 3.5], [0, 2, 4], eta_gamma=[0, 2, 2], area=math.pi, perimeter=L
    )
    assert len(seq) == 3
    assert seq.is_contiguous
    np.testing.assert_allclose(seq.q, unfold([1, 2, 3], math.pi))
    np.testing.assert_allclose(seq.q, 2 * np.sqrt([1, 2, 3]))
    frame = seq.to_frame()
    assert list(frame.columns) == ["n", "k", "eta", "eta_gamma"]
    assert seq.sqrt_ratio() == pytest.approx(4 / math.sqrt(3))
    with pytest.raises(ValueError, match="no partial counts"):
        BICountSequence([1], [2.0], [2], area=1.0, perimeter=4.0).restricted()
    gapped = BICountSequence([1, 3], [2.0, 3.0], [0, 2], area=math.pi, perimeter=L)
    assert not gapped.is_contiguous
    with pytest.raises(IncompleteSequence, match="not contiguous"):
        smoothed_density(gapped)


def test_disk_counts(disk):
    spectrum = solve_spectrum(disk, 6.0)
    gamma = BoundarySubset.parse("0:0.5", disk.perimeter)
    seq = count_sequence(spectrum, gamma)
    np.testing.assert_array_equal(seq.eta, [0, 2, 2, 4, 4, 0])
    assert np.all(seq.eta_gamma <= seq.eta)
    assert seq.meta["family"] == "disk"
    # a half circle holds half of the equally spaced zeros, give or take one at its ends
    assert np.all(np.abs(seq.eta_gamma - seq.eta // 2) <= 1)
    assert seq.eta_gamma[0] == seq.eta_gamma[-1] == 0
    restricted = seq.restricted()
    assert restricted.partial
    np.testing.assert_array_equal(restricted.eta, seq.eta_gamma)
    assert "partial" in repr(restricted)


@pytest.mark.slow
def test_disk_counts_through_m25(disk):
    # j_{25,1} is about 30.6 and j_{26,1} about 31.7
    k_max = 31.0
    oracle = sorted((z, m) for m in range(27) for z in special.jn_zeros(m, 12) if z < k_max)
    levels = [z for z, m in oracle for _ in range(1 if m == 0 else 2)]
    eta = [2 * m for z, m in oracle for _ in range(1 if m == 0 else 2)]
    assert max(eta) == 50
    seq = count_sequence(solve_spectrum(disk, k_max))
    assert len(seq) == len(levels)
    np.testing.assert_allclose(seq.k, levels, rtol=1e-6)
    np.testing.assert_array_equal(seq.eta, eta)


def test_partial_counts_may_be_odd():
    odd = BICountSequence([1, 2], [2.0, 3.0], [1, 3], area=1.0, perimeter=4.0, partial=True)
    np.testing.assert_array_equal(odd.eta, [1, 3])
    with pytest.raises(ValueError, match="even"):
        BICountSequence([1, 2], [2.0, 3.0], [1, 3], area=1.0, perimeter=4.0)


def long_sequence(count=400):
    n = np.arange(1, count + 1)
    eta = 2 * np.round(np.sqrt(n)).astype(int)
    return BICountSequence(n, np.sqrt(n), eta, area=math.pi, perimeter=L)


def test_smoothed_density_mass():
    seq = long_sequence(50)
    in_n = smoothed_density(seq, "n")
    assert np.sum(in_n.values) * in_n.step == pytest.approx(seq.eta.sum(), rel=1e-3)
    in_q = smoothed_density(seq, "q")
    weights = seq.eta * 2 * np.pi / (seq.area * seq.q)
    assert np.sum(in_q.values) * in_q.step == pytest.approx(weights.sum(), rel=1e-3)
    with pytest.raises(ValueError, match="twice the grid step"):
        smoothed_density(seq, "n", 0.1, grid_step=0.1)
    with pytest.raises(ValueError, match="variable"):
        smoothed_density(seq, "k")


def test_gaussian_window():
    window = GaussianWindow(10.0, 2.0)
    q = np.linspace(-20, 40, 60001)
    for x in [0.0, 0.3, 1.1]:
        numeric = np.sum(window(q) * np.exp(-1j * q * x)) * (q[1] - q[0])
        assert window.transform(x) == pytest.approx(numeric, rel=1e-8, abs=1e-12)
    assert window.integral == pytest.approx(2 * math.sqrt(2 * math.pi))
    centered = GaussianWindow.centered(4.0, 16.0)
    assert centered == GaussianWindow(10.0, 2.0)
    with pytest.raises(ValueError, match="positive"):
        GaussianWindow(1.0, 0.0)
    assert windowed_mean(np.full(q.size, 3.0), q, window) == pytest.approx(3.0)


def test_windowed_fluctuation():
    seq = long_sequence()
    density = smoothed_density(seq, "q")
    lo, hi = density.support
    window = GaussianWindow.centered(lo, hi)
    # subtracting the density itself leaves nothing
    fluct = windowed_fluctuation(density, density.values, window)
    np.testing.assert_allclose(fluct.f, 0.0)
    assert fluct.q[0] >= lo and fluct.q[-1] <= hi
    fitted = windowed_fluctuation(density, "fit", window)
    assert fitted.f.shape == fluct.q.shape
    smooth = windowed_fluctuation(density, lambda q: np.ones_like(q), window)
    assert smooth.window is window
    with pytest.raises(WindowOutOfRange, match="inside the computed range"):
        windowed_fluctuation(density, "fit", GaussianWindow(hi, 1.0))
    # 2.6 sigma of room below the center is not enough
    tight = GaussianWindow(lo + 2.6, 1.0)
    assert tight.q0 + 3 * tight.sigma < hi
    with pytest.raises(WindowOutOfRange, match="needs"):
        windowed_fluctuation(density, "fit", tight)
    windowed_fluctuation(density, "fit", tight, margin=2.5)
    with pytest.raises(ValueError, match="fit"):
        windowed_fluctuation(density, "weyl", window)
    with pytest.raises(ValueError, match="q variable"):
        windowed_fluctuation(smoothed_density(seq, "n"), "fit", window)
