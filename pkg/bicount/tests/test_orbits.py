import math

import numpy as np
import pytest
from bicount.exceptions import TangentLaunch
from bicount.orbits import (
    PeriodicOrbit,
    _same_orbit,
    billiard_map,
    find_all_orbits,
    find_periodic_orbits,
    maslov_index,
    monodromy,
    trig_factor,
)


def test_billiard_map_disk(disk):
    s, p = billiard_map(disk, 0.0, 0.0)
    assert s == pytest.approx(math.pi, abs=1e-10)
    assert p == pytest.approx(0.0, abs=1e-10)
    # a chord at 60 degrees to the tangent subtends 120 degrees
    s, p = billiard_map(disk, 0.0, 0.5)
    assert s == pytest.approx(2 * math.pi / 3, abs=1e-10)
    assert p == pytest.approx(0.5, abs=1e-10)
    with pytest.raises(TangentLaunch, match="tangential"):
        billiard_map(disk, 0.0, 1.0)


def test_disk_diameter(disk):
    orbit = PeriodicOrbit.from_bounces(disk, [0.0, math.pi])
    assert orbit.length == pytest.approx(4.0)
    assert orbit.trace == pytest.approx(2.0)
    assert orbit.is_marginal
    assert not orbit.is_isolated
    assert orbit.conjugate_points == 1
    assert orbit.maslov == 5
    assert maslov_index(disk, orbit) == 5
    np.testing.assert_allclose(np.degrees(orbit.psi), 90.0)
    assert orbit.phi == pytest.approx(-4.0)


def test_flat_walls():
    # two parallel walls a unit apart, bounced on at normal incidence
    orbit = PeriodicOrbit([0.0, 1.0], [0, 1j], [1, -1], [1j, -1j], [0.0, 0.0])
    np.testing.assert_allclose(orbit.monodromy, [[1.0, 2.0], [0.0, 1.0]])
    assert orbit.conjugate_points == 0
    assert orbit.maslov == 4


def test_ellipse_axes(ellipse):
    L = ellipse.perimeter
    major = PeriodicOrbit.from_bounces(ellipse, [0.0, L / 2])
    # two bounces, so the length is the round trip
    assert major.length == pytest.approx(8.0, rel=1e-10)
    assert major.trace == pytest.approx(194.0, rel=1e-8)
    assert major.is_isolated
    assert major.conjugate_points == 2
    assert major.maslov == 6
    minor = PeriodicOrbit.from_bounces(ellipse, [L / 4, 3 * L / 4])
    assert minor.length == pytest.approx(4.0, rel=1e-10)
    assert minor.trace == pytest.approx(-1.0, abs=1e-8)
    assert not minor.is_isolated and not minor.is_marginal
    for orbit in [major, minor]:
        assert np.linalg.det(orbit.monodromy) == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(monodromy(ellipse, major), major.monodromy)


def test_orbit_relabelling(africa):
    orbits = find_periodic_orbits(africa, 3)
    assert orbits
    orbit = orbits[-1]
    for other in [orbit.shifted(1), orbit.shifted(2), orbit.reversed()]:
        assert other.length == pytest.approx(orbit.length)
        assert other.trace == pytest.approx(orbit.trace, rel=1e-8, abs=1e-8)
    twice = orbit.repeat(2)
    assert twice.n_bounces == 6
    assert "repetition" in twice.flags
    assert twice.length == pytest.approx(2 * orbit.length)
    np.testing.assert_allclose(
        twice.monodromy, orbit.monodromy @ orbit.monodromy, rtol=1e-8, atol=1e-8
    )
    with pytest.raises(ValueError, match="repetition"):
        orbit.repeat(0)


def test_trig_factor():
    assert trig_factor(np.radians([60.0, 60.0, 60.0])) == pytest.approx(0.0, abs=1e-12)
    assert trig_factor(np.radians([90.0])) == pytest.approx(-2.0)
    psi = 0.4
    assert trig_factor([psi]) == pytest.approx((4 * math.cos(psi) ** 2 - 1) * 2 * math.sin(psi))


def test_find_ellipse_two_bounce(ellipse):
    orbits = find_periodic_orbits(ellipse, 2)
    assert len(orbits) == 2
    minor, major = orbits
    assert minor.length == pytest.approx(4.0, rel=1e-9)
    assert major.length == pytest.approx(8.0, rel=1e-9)
    assert "stable" in minor.flags
    assert major.is_self_retracing
    assert major.weight == 1
    assert major.maslov is not None
    for orbit in orbits:
        assert orbit.gradient_norm < 1e-9


def test_find_disk_triangle(disk):
    orbits = find_periodic_orbits(disk, 3)
    assert len(orbits) == 1
    (triangle,) = orbits
    assert triangle.length == pytest.approx(3 * math.sqrt(3), rel=1e-9)
    assert "marginal" in triangle.flags
    np.testing.assert_allclose(np.degrees(triangle.psi), 60.0, atol=1e-6)
    assert triangle.phi == pytest.approx(0.0, abs=1e-6)


def test_find_all_africa(africa):
    orbits = find_all_orbits(africa, 3, seed=1)
    assert [orbit.id for orbit in orbits] == list(range(1, len(orbits) + 1))
    lengths = [orbit.length for orbit in orbits]
    assert lengths == sorted(lengths)
    assert sum(orbit.n_bounces == 2 for orbit in orbits) >= 2
    for orbit in orbits:
        assert orbit.gradient_norm < 1e-9
        assert np.linalg.det(orbit.monodromy) == pytest.approx(1.0, abs=1e-8)
    # same seed, same orbits
    again = find_all_orbits(africa, 3, seed=1)
    np.testing.assert_array_equal([o.length for o in again], lengths)


@pytest.mark.parametrize("seed", range(4))
def test_ellipse_axes_found_once(ellipse, seed):
    orbits = find_periodic_orbits(ellipse, 2, n_random=200, seed=seed)
    lengths = sorted(orbit.length for orbit in orbits)
    np.testing.assert_allclose(lengths, [4.0, 8.0], rtol=1e-9)


def test_same_orbit_across_the_seam(ellipse):
    L = ellipse.perimeter
    a = PeriodicOrbit.from_bounces(ellipse, [0.0, L / 2], flags={"self_retracing"})
    b = PeriodicOrbit.from_bounces(ellipse, [L - 1e-12, L / 2 - 1e-12], flags={"self_retracing"})
    assert _same_orbit(a, b, L, 1e-6)
    assert _same_orbit(a, b.shifted(1), L, 1e-6)
    c = PeriodicOrbit.from_bounces(ellipse, [L / 4, 3 * L / 4])
    assert not _same_orbit(a, c, L, 1e-6)


def test_maslov_independent_of_start(africa):
    orbits = [orbit for orbit in find_all_orbits(africa, 4, seed=1) if orbit.is_isolated]
    assert orbits
    for orbit in orbits:
        if orbit.maslov is None:
            continue
        for j in range(1, orbit.n_bounces):
            shifted = orbit.shifted(j)
            assert shifted.maslov == orbit.maslov
            assert shifted.conjugate_points == orbit.conjugate_points
        assert orbit.maslov - 2 * orbit.n_bounces == orbit.conjugate_points
        # every bounce and every focus flips the sign of the transverse offset
        flips = orbit.conjugate_points + orbit.n_bounces
        assert flips % 2 == (0 if orbit.trace > 0 else 1)
