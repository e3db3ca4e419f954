"""Classical periodic orbits of a billiard and their stability data.

Periodic orbits are critical points of the total chord length over bounce positions.
Stability matrices act on (transverse position, transverse direction) deviations: free
flight over a chord of length l is [[1, l], [0, 1]] and a reflection at a bounce with
curvature kappa (positive where the boundary is convex) and bounce angle psi is
[[-1, 0], [2 kappa / sin(psi), -1]].
"""
import logging
import math
from math import gcd

import numpy as np
from scipy import optimize

from .exceptions import AmbiguousConjugatePoint, DegenerateBounce, RayEscapes, TangentLaunch
from .utils import float_array, parallel_map, wrap

logger = logging.getLogger(__name__)

_MARGINAL_TOL = 1e-6


def _dot(a, b):
    return (np.conj(a) * b).real


def _bounce_frames(curve, s):
    t = curve.t_of_s(s)
    r, tangent, normal, kappa, _ = curve.frame_at_t(t)
    return r, tangent, normal, kappa


def billiard_map(curve, s, p):
    """Follow the ray leaving r(s) with tangential momentum ``p`` = cos(psi) to its next bounce.

    Returns ``(s_next, p_next)``, where ``p_next`` is the tangential momentum after the
    specular reflection at ``s_next``.
    """
    if abs(p) >= 1 - 1e-12:
        raise TangentLaunch(f"|p| = {abs(p):.15g} is a tangential launch")
    r0, tangent, normal, _ = (np.asarray(x).item() for x in _bounce_frames(curve, [s]))
    direction = p * tangent + math.sqrt(1 - p * p) * normal

    def offset(t):
        return (np.conj(direction) * (curve.spec.derivatives(t)[0] - r0)).imag

    n = max(4096, 16 * curve.resolution)
    t_grid = np.arange(n + 1) / n
    values = offset(t_grid)
    brackets = np.flatnonzero(np.sign(values[:-1]) * np.sign(values[1:]) <= 0)
    best = None
    scale = 1e-9 * curve.perimeter
    for i in brackets:
        a, b = t_grid[i], t_grid[i + 1]
        if values[i] == 0:
            t = a
        elif values[i + 1] == 0:
            t = b
        else:
            t = optimize.brentq(offset, a, b, xtol=1e-15)
        distance = _dot(direction, curve.spec.derivatives(t)[0] - r0)
        if distance > scale and (best is None or distance < best[1]):
            best = (t, distance)
    if best is None:
        raise RayEscapes(f"ray from s={s:.10g} with p={p:.10g} does not meet the boundary")
    t_next = best[0] % 1.0
    s_next = float(curve.s_of_t(np.array([t_next]))[0])
    _, tangent_next, _, _, _ = curve.frame_at_t(t_next)
    p_next = float(_dot(tangent_next, direction))
    return float(wrap(s_next, curve.perimeter)), p_next


def _length_derivatives(curve, s):
    """Total length, its gradient and Hessian with respect to the bounce arclengths"""
    r, tangent, normal, kappa = _bounce_frames(curve, s)
    n = s.size
    chords = np.roll(r, -1) - r
    lengths = np.abs(chords)
    units = chords / lengths
    grad = _dot(tangent, np.roll(units, 1) - units)
    hess = np.zeros((n, n))
    for i in range(n):
        a, b = i, (i + 1) % n
        u = units[i]
        ta = _dot(tangent[a], u)
        tb = _dot(tangent[b], u)
        hess[b, b] += kappa[b] * _dot(normal[b], u) + (1 - tb * tb) / lengths[i]
        hess[a, a] += -kappa[a] * _dot(normal[a], u) + (1 - ta * ta) / lengths[i]
        mixed = -(_dot(tangent[a], tangent[b]) - ta * tb) / lengths[i]
        hess[a, b] += mixed
        hess[b, a] += mixed
    return lengths.sum(), grad, hess, lengths


def _newton(curve, s, *, tol=1e-11, max_iter=60):
    """Newton iterations on the length gradient; returns (s, gradient max-norm) or None"""
    perimeter = curve.perimeter
    min_chord = 1e-6 * perimeter
    _, grad, hess, lengths = _length_derivatives(curve, s)
    for _ in range(max_iter):
        if lengths.min() < min_chord:
            return None
        norm = np.abs(grad).max()
        if norm < tol:
            return s, norm
        step = np.linalg.lstsq(hess, -grad, rcond=1e-12)[0]
        merit = 0.5 * grad @ grad
        alpha = 1.0
        while True:
            trial = wrap(s + alpha * step, perimeter)
            _, trial_grad, trial_hess, trial_lengths = _length_derivatives(curve, trial)
            if trial_lengths.min() >= min_chord:
                trial_merit = 0.5 * trial_grad @ trial_grad
                if trial_merit <= (1 - 1e-4 * alpha) * merit:
                    break
            alpha *= 0.5
            if alpha < 1e-8:
                return None
        s, grad, hess, lengths = trial, trial_grad, trial_hess, trial_lengths
    norm = np.abs(grad).max()
    return (s, norm) if norm < tol else None


def _transfer(monodromy_steps):
    total = np.eye(2)
    for step in monodromy_steps:
        total = step @ total
    return total


def _bounce_matrix(kappa, sin_psi):
    return np.array([[-1.0, 0.0], [2 * kappa / sin_psi, -1.0]])


def _flight_matrix(length):
    return np.array([[1.0, length], [0.0, 1.0]])


def _conjugate_points(lengths, kappa, sin_psi, start, rtol=1e-9):
    """Zeros of the (1, 2) entry of the stability matrix inside the flights of one period"""
    n = lengths.size
    current = np.eye(2)
    count = 0
    for j in range(n):
        i = (start + j) % n
        a = current[0, 1]
        b = current[1, 1]
        length = lengths[i]
        if j > 0 and abs(a) <= rtol * length * abs(b):
            raise AmbiguousConjugatePoint(f"conjugate point at bounce {i} of the orbit")
        if b != 0:
            x = -a / b
            if abs(x - length) <= rtol * length:
                raise AmbiguousConjugatePoint(
                    f"conjugate point at the end of flight {i} (x={x:.15g}, l={length:.15g})"
                )
            if 0 < x < length and not (j == 0 and a == 0):
                count += 1
        current = _flight_matrix(length) @ current
        nxt = (i + 1) % n
        current = _bounce_matrix(kappa[nxt], sin_psi[nxt]) @ current
    return count


def _manifold_zeros(monodromy, lengths, kappa, sin_psi, rtol=1e-9):
    """Zeros of the transverse position along the unstable direction over one period.

    The unstable direction of a hyperbolic orbit is carried back onto itself by one period,
    so the count is the same for every start bounce.
    """
    values, vectors = np.linalg.eig(monodromy)
    v = vectors[:, int(np.argmax(np.abs(values)))].real
    n = lengths.size
    count = 0
    for i in range(n):
        q, p = v / np.hypot(*v)
        length = lengths[i]
        if abs(q) <= rtol * length * abs(p):
            raise AmbiguousConjugatePoint(f"unstable direction focuses on bounce {i}")
        if p != 0:
            x = -q / p
            if abs(x - length) <= rtol * length:
                raise AmbiguousConjugatePoint(
                    f"unstable direction focuses at the end of flight {i} (l={length:.15g})"
                )
            if 0 < x < length:
                count += 1
        nxt = (i + 1) % n
        v = _bounce_matrix(kappa[nxt], sin_psi[nxt]) @ (_flight_matrix(length) @ np.array([q, p]))
    return count


class PeriodicOrbit:
    """A periodic billiard orbit with n bounces, starting at its first bounce.

    Per-bounce arrays are ordered along the orbit.  ``psi[i]`` is the angle between the
    outgoing chord at bounce i and the boundary tangent.  ``weight`` is 2 for an orbit
    whose time-reversed partner is distinct, otherwise 1.
    """

    __slots__ = (
        "s",
        "r",
        "tangent",
        "normal",
        "kappa",
        "psi",
        "chord_lengths",
        "length",
        "monodromy",
        "conjugate_points",
        "maslov",
        "phi",
        "gradient_norm",
        "flags",
        "id",
    )

    def __init__(
        self,
        s,
        r,
        tangent,
        normal,
        kappa,
        *,
        gradient_norm=float("nan"),
        flags=(),
        id=None,
        strict=True,
    ):
        self.s = np.asarray(s, np.float64)
        self.r = np.asarray(r, np.complex128)
        self.tangent = np.asarray(tangent, np.complex128)
        self.normal = np.asarray(normal, np.complex128)
        self.kappa = np.asarray(kappa, np.float64)
        chords = np.roll(self.r, -1) - self.r
        self.chord_lengths = np.abs(chords)
        self.length = float(self.chord_lengths.sum())
        units = chords / self.chord_lengths
        cos_psi = np.clip(_dot(self.tangent, units), -1.0, 1.0)
        sin_psi = _dot(self.normal, units)
        if np.any(sin_psi < 1e-8):
            i = int(np.argmin(sin_psi))
            raise DegenerateBounce(
                f"bounce {i} at s={self.s[i]:.10g} is grazing or exits "
                f"(sin psi = {sin_psi[i]:.3g})"
            )
        # acute angle to the tangent; independent of the direction of travel
        self.psi = np.arccos(np.abs(cos_psi))
        steps = []
        n = self.s.size
        for i in range(n):
            steps.append(_flight_matrix(self.chord_lengths[i]))
            nxt = (i + 1) % n
            steps.append(_bounce_matrix(self.kappa[nxt], sin_psi[nxt]))
        self.monodromy = _transfer(steps)
        self.phi = trig_factor(self.psi)
        self.gradient_norm = gradient_norm
        self.id = id
        flags = set(flags)
        try:
            self.conjugate_points, self.maslov = self._maslov(sin_psi)
        except AmbiguousConjugatePoint:
            if strict:
                raise
            self.conjugate_points = self.maslov = None
            flags.add("ambiguous_maslov")
        self.flags = frozenset(flags)

    def _maslov(self, sin_psi):
        n = self.s.size
        lengths = self.chord_lengths
        if abs(np.trace(self.monodromy)) > 2 + _MARGINAL_TOL:
            conj = _manifold_zeros(self.monodromy, lengths, self.kappa, sin_psi)
            return conj, conj + 2 * n
        # no invariant real direction; take the smallest count over the start bounces
        counts = {_conjugate_points(lengths, self.kappa, sin_psi, j) for j in range(n)}
        conj = min(counts)
        if len(counts) > 1:
            logger.debug("conjugate point count depends on the start bounce: %s", sorted(counts))
        return conj, conj + 2 * n

    @classmethod
    def from_bounces(cls, curve, s, **kwargs):
        s = wrap(float_array(s, name="s", ndim=1), curve.perimeter)
        r, tangent, normal, kappa = _bounce_frames(curve, s)
        return cls(s, r, tangent, normal, kappa, **kwargs)

    def _reordered(self, index, **kwargs):
        kwargs.setdefault("gradient_norm", self.gradient_norm)
        kwargs.setdefault("flags", self.flags)
        kwargs.setdefault("id", self.id)
        kwargs.setdefault("strict", False)
        return PeriodicOrbit(
            self.s[index],
            self.r[index],
            self.tangent[index],
            self.normal[index],
            self.kappa[index],
            **kwargs,
        )

    def shifted(self, j):
        """The same orbit starting at bounce ``j``"""
        return self._reordered(np.roll(np.arange(self.s.size), -j))

    def reversed(self):
        """The time-reversed orbit"""
        return self._reordered(np.arange(self.s.size)[::-1])

    def repeat(self, r):
        """The r-fold traversal of the orbit"""
        if r < 1:
            raise ValueError(f"repetition must be at least 1, not {r}")
        index = np.tile(np.arange(self.s.size), r)
        flags = self.flags if r == 1 else self.flags | {"repetition"}
        return self._reordered(index, flags=flags)

    def with_id(self, id):
        return self._reordered(np.arange(self.s.size), id=id)

    @property
    def n_bounces(self):
        return self.s.size

    @property
    def trace(self):
        return float(np.trace(self.monodromy))

    @property
    def is_marginal(self):
        return abs(abs(self.trace) - 2) <= _MARGINAL_TOL

    @property
    def is_isolated(self):
        """Unstable and isolated, as needed in the trace formula"""
        return abs(self.trace) > 2 + _MARGINAL_TOL

    @property
    def is_self_retracing(self):
        return "self_retracing" in self.flags

    @property
    def weight(self):
        return 1 if self.is_self_retracing else 2

    def __repr__(self):
        ident = "" if self.id is None else f"id={self.id}, "
        return (
            f"PeriodicOrbit({ident}n={self.n_bounces}, L={self.length:.10g}, "
            f"trM={self.trace:.6g}, maslov={self.maslov}, phi={self.phi:.6g})"
        )


def monodromy(curve, orbit):
    """Monodromy matrix of ``orbit`` on ``curve``, starting just after its first bounce"""
    return PeriodicOrbit.from_bounces(curve, orbit.s, strict=False).monodromy


def maslov_index(curve, orbit):
    """Conjugate points along one period plus twice the number of bounces"""
    return PeriodicOrbit.from_bounces(curve, orbit.s).maslov


def trig_factor(orbit):
    """sum_i (4 cos(psi_i)**2 - 1) * 2 sin(psi_i) over the bounce angles

    ``orbit`` is a PeriodicOrbit or an array of bounce angles.
    """
    psi = orbit.psi if isinstance(orbit, PeriodicOrbit) else np.asarray(orbit, np.float64)
    return float(np.sum((4 * np.cos(psi) ** 2 - 1) * 2 * np.sin(psi)))


def partial_trig_factor(orbit, gamma):
    """Trig factor restricted to the bounces that lie in the boundary subset ``gamma``"""
    if gamma is None:
        return orbit.phi
    inside = gamma.contains(orbit.s)
    return trig_factor(orbit.psi[inside])


def _circular_close(a, b, period, tol):
    d = np.abs(a - b) % period
    return np.all(np.minimum(d, period - d) <= tol)


def _repetition_period(s, period, tol):
    n = s.size
    for d in range(1, n):
        if n % d == 0 and _circular_close(np.roll(s, -d), s, period, tol):
            return d
    return n


def _same_cycle(a, b, period, tol):
    """Whether bounce sequence ``b`` is ``a`` up to cyclic shift and reversal, modulo ``period``"""
    if a.size != b.size:
        return False
    return any(
        _circular_close(np.roll(candidate, j), a, period, tol)
        for candidate in (b, b[::-1])
        for j in range(b.size)
    )


def _is_self_retracing(s, period, tol):
    back = s[::-1]
    return any(_circular_close(np.roll(back, j), s, period, tol) for j in range(s.size))


def _chords_inside(curve, r, fractions=np.linspace(0.05, 0.95, 19)):
    ends = np.roll(r, -1)
    points = r[:, None] + (ends - r)[:, None] * fractions
    return bool(np.all(curve.contains(np.stack([points.real, points.imag], axis=-1))))


def _same_orbit(a, b, perimeter, tol):
    if a.n_bounces != b.n_bounces or abs(a.length - b.length) > tol * max(1.0, a.length):
        return False
    if a.is_marginal and b.is_marginal:
        psi_a = np.sort(np.minimum(a.psi, np.pi - a.psi))
        psi_b = np.sort(np.minimum(b.psi, np.pi - b.psi))
        return np.allclose(psi_a, psi_b, atol=tol)
    return _same_cycle(a.s, b.s, perimeter, tol * perimeter)


def _seeds(perimeter, n_bounces, n_random, n_offsets, rng):
    seeds = [rng.uniform(0, perimeter, n_bounces) for _ in range(n_random)]
    for w in range(1, n_bounces // 2 + 1):
        if gcd(w, n_bounces) != 1:
            continue
        for j in range(n_offsets):
            offset = perimeter * j / (n_offsets * n_bounces)
            seeds.append(wrap(offset + perimeter * w * np.arange(n_bounces) / n_bounces, perimeter))
    return seeds


def find_periodic_orbits(
    curve,
    n_bounces,
    *,
    n_random=None,
    n_offsets=8,
    seed=0,
    tol=1e-11,
    accept=1e-9,
    dedupe_tol=1e-6,
):
    """Periodic orbits with ``n_bounces`` bounces, by multi-start Newton on the length.

    Starts are ``n_random`` uniform random configurations (default 40 per bounce) drawn
    from ``numpy.random.default_rng(seed)`` plus regular-polygon configurations of every
    winding coprime to ``n_bounces`` at ``n_offsets`` rotations.  Converged solutions
    with a gradient below ``accept``, interior chords and transversal bounces are kept;
    repeated traversals of shorter orbits are dropped and duplicates under cyclic shift
    and reversal are merged.  Orbits are returned sorted by length.
    """
    if n_bounces < 2:
        raise ValueError(f"n_bounces must be at least 2, not {n_bounces}")
    if n_random is None:
        n_random = 40 * n_bounces
    perimeter = curve.perimeter
    rng = np.random.default_rng(seed)
    seeds = _seeds(perimeter, n_bounces, n_random, n_offsets, rng)

    def attempt(start):
        result = _newton(curve, np.asarray(start, np.float64), tol=tol)
        if result is None:
            return None
        s, norm = result
        if norm >= accept:
            return None
        if _repetition_period(s, perimeter, dedupe_tol * perimeter) < n_bounces:
            return "repetition"
        flags = set()
        if _is_self_retracing(s, perimeter, dedupe_tol * perimeter):
            flags.add("self_retracing")
        try:
            orbit = PeriodicOrbit.from_bounces(
                curve, s, gradient_norm=norm, flags=flags, strict=False
            )
        except DegenerateBounce:
            return None
        if not _chords_inside(curve, orbit.r):
            return None
        kept = set(orbit.flags)
        if orbit.is_marginal:
            kept.add("marginal")
        elif not orbit.is_isolated:
            kept.add("stable")
        return orbit._reordered(np.arange(n_bounces), flags=kept)

    results = parallel_map(attempt, seeds)
    repetitions = sum(1 for x in results if x == "repetition")
    orbits = []
    for orbit in results:
        if orbit is None or isinstance(orbit, str):
            continue
        if not any(_same_orbit(orbit, other, perimeter, dedupe_tol) for other in orbits):
            orbits.append(orbit)
    orbits.sort(key=lambda o: (o.length, tuple(np.sort(o.s))))
    logger.info(
        "%d-bounce search: %d starts, %d distinct orbits, %d repetitions dropped",
        n_bounces,
        len(seeds),
        len(orbits),
        repetitions,
    )
    return orbits


def find_all_orbits(curve, max_bounces, *, seed=0, **kwargs):
    """Orbits with 2 to ``max_bounces`` bounces, sorted by length and numbered from 1"""
    orbits = []
    for n in range(2, max_bounces + 1):
        orbits.extend(find_periodic_orbits(curve, n, seed=seed + n, **kwargs))
    orbits.sort(key=lambda o: (o.length, o.n_bounces))
    return [orbit.with_id(i) for i, orbit in enumerate(orbits, 1)]
