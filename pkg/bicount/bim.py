"""Dirichlet eigenvalues and boundary functions by the boundary integral method.

The boundary function u(s) (the normal derivative of the eigenfunction divided by k)
satisfies u = D u, where D is the double-layer operator with kernel

    Q(s, s') = -(i k / 2) [n_out(s) . (r(s) - r(s'))] H1(k rho) / rho,   rho = |r(s) - r(s')|

and the diagonal limit Q(s, s) = -kappa(s) / (2 pi).  The operator is discretized on
points equally spaced in arclength with the Kress product quadrature for the
logarithmic part of H1, which converges spectrally on smooth boundaries.  Eigenvalues
are the wavenumbers at which the smallest singular value of I - D vanishes.
"""
import logging
import math
from functools import lru_cache

import numpy as np
from scipy import linalg, optimize, signal, special

from .exceptions import MissedLevelSuspected, NoConvergence, SpuriousMinimum, UnderResolved
from .utils import parallel_map

logger = logging.getLogger(__name__)


def required_points(k, perimeter, points_per_wavelength, minimum=64):
    """Smallest even sample count resolving wavenumber ``k`` on the boundary"""
    n = max(minimum, math.ceil(points_per_wavelength * k * perimeter / (2 * math.pi)))
    return n + (n % 2)


def mean_level_spacing(k, area):
    """Mean spacing of Dirichlet levels in k near ``k``: 2 pi / (A k)"""
    return 2 * math.pi / (area * k)


def weyl_count(k, area, perimeter):
    """Smooth counting function (A k**2 - L k) / (4 pi)"""
    k = np.asarray(k, np.float64)
    return (area * k ** 2 - perimeter * k) / (4 * np.pi)


def weyl_deviation(ks, area, perimeter):
    """Staircase N(k_n) = n minus the smooth counting function, at each level"""
    ks = np.sort(np.asarray(ks, np.float64))
    return np.arange(1, ks.size + 1) - weyl_count(ks, area, perimeter)


class _Discretization:
    """k-independent parts of the Nystrom matrix for one curve and sample count"""

    __slots__ = "sample", "rho", "normal_dist", "log_term", "weights", "diag", "upper", "n"

    def __init__(self, curve, n_points):
        sample = curve.sample(n_points)
        half = n_points // 2
        diff = sample.r[:, None] - sample.r[None, :]
        rho = np.abs(diff)
        np.fill_diagonal(rho, 1.0)
        n_out = -sample.normal
        normal_dist = (np.conj(n_out)[:, None] * diff).real
        sigma = 2 * np.pi * np.arange(n_points) / n_points
        delta = sigma[:, None] - sigma[None, :]
        with np.errstate(divide="ignore"):
            log_term = np.log(4 * np.sin(0.5 * delta) ** 2)
        np.fill_diagonal(log_term, 0.0)
        m = np.arange(1, half)
        d = np.arange(n_points)
        log_weights = -(2 * np.pi / half) * (np.cos(np.outer(d, m) * np.pi / half) @ (1.0 / m))
        log_weights -= (np.pi / half ** 2) * (-1.0) ** d
        index = np.abs(np.arange(n_points)[:, None] - np.arange(n_points)[None, :])
        self.sample = sample
        self.rho = rho
        self.normal_dist = normal_dist
        self.log_term = log_term
        self.weights = log_weights[index]
        self.diag = -sample.kappa / (2 * np.pi)
        self.upper = np.triu_indices(n_points, 1)
        self.n = n_points

    def matrix(self, k):
        c = self.sample.perimeter / (2 * np.pi)
        h1 = np.empty((self.n, self.n), np.complex128)
        upper = special.hankel1(1, k * self.rho[self.upper])
        h1[self.upper] = upper
        h1.T[self.upper] = upper
        np.fill_diagonal(h1, 0.0)
        scaled = self.normal_dist / self.rho
        kernel = (-0.5j * k * c) * scaled * h1
        smooth_log = (k * c / (2 * np.pi)) * scaled * h1.real
        regular = kernel - smooth_log * self.log_term
        np.fill_diagonal(regular, c * self.diag)
        return self.weights * smooth_log + (np.pi / (self.n // 2)) * regular


@lru_cache(maxsize=16)
def _discretization(curve, n_points):
    return _Discretization(curve, n_points)


class KernelOperator:
    """Nystrom discretization of the double-layer operator at wavenumber ``k``.

    ``matrix`` includes the quadrature weights, so the eigencondition is that
    ``I - matrix`` is singular.
    """

    __slots__ = "k", "s", "matrix", "perimeter"

    def __init__(self, k, s, matrix, perimeter):
        self.k = k
        self.s = s
        self.matrix = matrix
        self.perimeter = perimeter

    @property
    def N(self):
        return self.s.size

    def eigencondition(self):
        return np.eye(self.N) - self.matrix

    def singular_values(self):
        return linalg.svdvals(self.eigencondition(), check_finite=False)

    def __repr__(self):
        return f"KernelOperator(k={self.k:.10g}, N={self.N})"


def build_kernel(curve, k, N, *, points_per_wavelength=6):
    """Discretize the double-layer operator for ``curve`` at wavenumber ``k`` on N points"""
    if not k > 0:
        raise ValueError(f"k must be positive, not {k}")
    if points_per_wavelength < 6:
        raise ValueError(
            f"points_per_wavelength must be at least 6, not {points_per_wavelength}"
        )
    if N % 2:
        raise ValueError(f"N must be even, not {N}")
    needed = math.ceil(points_per_wavelength * k * curve.perimeter / (2 * math.pi))
    if N < needed:
        raise UnderResolved(
            f"N={N} boundary points do not resolve k={k:.6g}: need at least {needed} "
            f"({points_per_wavelength} per wavelength over L={curve.perimeter:.6g})"
        )
    disc = _discretization(curve, N)
    return KernelOperator(k, disc.sample.s, disc.matrix(k), curve.perimeter)


def _smallest_singular_values(disc, k, count):
    values = linalg.svdvals(np.eye(disc.n) - disc.matrix(k), check_finite=False)
    return values[::-1][:count]


class Candidate:
    __slots__ = "k", "multiplicity", "slope"

    def __init__(self, k, multiplicity, slope):
        self.k = k
        self.multiplicity = multiplicity
        self.slope = slope

    def __repr__(self):
        return f"Candidate(k={self.k:.10g}, multiplicity={self.multiplicity})"


class Sweep:
    """Smallest singular values of the eigencondition matrix on a k-grid.

    ``sigma`` has one column per tracked singular value (smallest first).  Iterating
    yields ``(k, sigma_min)`` pairs for the points inside the window.
    """

    __slots__ = "k", "sigma", "flagged", "candidates", "window", "n_points", "step"

    def __init__(self, k, sigma, flagged, candidates, window, n_points, step):
        self.k = k
        self.sigma = sigma
        self.flagged = flagged
        self.candidates = candidates
        self.window = window
        self.n_points = n_points
        self.step = step

    @property
    def sigma_min(self):
        return self.sigma[:, 0]

    def __iter__(self):
        lo, hi = self.window
        inside = (self.k >= lo) & (self.k <= hi)
        yield from zip(self.k[inside], self.sigma_min[inside])

    def __repr__(self):
        return (
            f"Sweep([{self.window[0]:.6g}, {self.window[1]:.6g}], {self.k.size} points, "
            f"{len(self.candidates)} candidates)"
        )


def _local_minima(values):
    interior = (values[1:-1] < values[:-2]) & (values[1:-1] <= values[2:])
    return np.flatnonzero(interior) + 1


def singular_value_sweep(
    curve,
    k_window,
    dk=None,
    *,
    step_factor=0.2,
    points_per_wavelength=8,
    n_points=None,
    candidate_cutoff=0.5,
    tracked=3,
):
    """Sample the smallest singular values of I - D on a uniform k-grid.

    The grid step defaults to ``step_factor`` times the mean level spacing at the top of
    the window and may not exceed a quarter of it.  One ghost point is added on each side
    so that minima at the window edges are detected.  Local minima of the smallest
    singular value below ``candidate_cutoff`` are eigenvalue candidates; a candidate's
    multiplicity is the number of tracked singular values with a minimum there.
    """
    k_lo, k_hi = map(float, k_window)
    if not 0 < k_lo < k_hi:
        raise ValueError(f"k_window must satisfy 0 < k_lo < k_hi, got {k_window}")
    spacing = mean_level_spacing(k_hi, curve.area)
    if dk is None:
        dk = step_factor * spacing
    if dk > spacing / 4:
        raise ValueError(
            f"grid step {dk:.4g} exceeds a quarter of the mean level spacing {spacing:.4g}"
        )
    if n_points is None:
        n_points = required_points(k_hi, curve.perimeter, points_per_wavelength)
    count = max(1, math.ceil((k_hi - k_lo) / dk))
    ks = k_lo + (k_hi - k_lo) * np.arange(-1, count + 2) / count
    ks = ks[ks > 0]
    step = (k_hi - k_lo) / count
    disc = _discretization(curve, n_points)
    logger.debug("sweeping [%.6g, %.6g]: %d points, N=%d", k_lo, k_hi, ks.size, n_points)
    sigma = np.array(parallel_map(lambda k: _smallest_singular_values(disc, k, tracked), ks))
    flagged = np.zeros(ks.size, bool)
    candidates = []
    for i in _local_minima(sigma[:, 0]):
        if not (k_lo <= ks[i] <= k_hi) or sigma[i, 0] > candidate_cutoff:
            continue
        flagged[i] = True
        multiplicity = 1
        for j in range(1, sigma.shape[1]):
            column = sigma[:, j]
            dips = np.isin(_local_minima(column), [i - 1, i, i + 1]).any()
            if column[i] > candidate_cutoff or not dips:
                break
            multiplicity += 1
        slope = max(abs(sigma[i - 1, 0] - sigma[i, 0]), abs(sigma[i + 1, 0] - sigma[i, 0])) / step
        candidates.append(Candidate(float(ks[i]), multiplicity, slope))
    return Sweep(ks, sigma, flagged, candidates, (k_lo, k_hi), n_points, step)


class EigenMode:
    """A Dirichlet level k with its boundary function sampled uniformly in arclength.

    ``u`` is real and normalized so that sum(u**2) * ds = 1; its first local extremum in
    absolute value is positive.
    """

    __slots__ = "n", "k", "u", "sigma_min", "perimeter"

    def __init__(self, k, u, sigma_min, perimeter, n=None):
        u = np.array(u, np.float64)
        u.flags.writeable = False
        self.n = n
        self.k = float(k)
        self.u = u
        self.sigma_min = float(sigma_min)
        self.perimeter = float(perimeter)

    @property
    def N(self):
        return self.u.size

    @property
    def ds(self):
        return self.perimeter / self.u.size

    @property
    def s(self):
        return np.arange(self.u.size) * self.ds

    def with_index(self, n):
        return EigenMode(self.k, self.u, self.sigma_min, self.perimeter, n=n)

    def __repr__(self):
        index = "" if self.n is None else f"n={self.n}, "
        return f"EigenMode({index}k={self.k:.12g}, N={self.N}, sigma_min={self.sigma_min:.3g})"


def _fix_sign(u):
    mag = np.abs(u)
    peaks = np.flatnonzero((mag >= np.roll(mag, 1)) & (mag >= np.roll(mag, -1)))
    first = peaks[0] if peaks.size else mag.argmax()
    return -u if u[first] < 0 else u


def _real_basis(vectors, ds):
    """Orthonormal real vectors spanning the same space as complex null vectors.

    Each exact null vector is a real function times a phase, so the real and imaginary
    parts of all of them span a space of the same dimension.
    """
    stacked = np.concatenate([vectors.real, vectors.imag], axis=1)
    left, _, _ = linalg.svd(stacked, full_matrices=False)
    basis = left[:, : vectors.shape[1]]
    return [_fix_sign(col / math.sqrt(np.sum(col ** 2) * ds)) for col in basis.T]


def _minimize(disc, lo, hi, k_guess, xatol):
    def objective(k):
        return _smallest_singular_values(disc, k, 1)[0] ** 2

    result = optimize.minimize_scalar(
        objective, bounds=(lo, hi), method="bounded", options={"xatol": xatol, "maxiter": 200}
    )
    if not result.success:
        raise NoConvergence(
            f"minimization of the smallest singular value near k={k_guess:.10g} did not "
            f"converge: {result.message}"
        )
    return float(result.x)


def _modes_at(disc, k, sigma_tol, perimeter):
    matrix = np.eye(disc.n) - disc.matrix(k)
    _, values, vh = linalg.svd(matrix, check_finite=False)
    values = values[::-1]
    vectors = vh[::-1].conj().T
    sigma_min = values[0]
    if sigma_min > sigma_tol:
        raise SpuriousMinimum(
            f"smallest singular value {sigma_min:.3g} at k={k:.10g} exceeds the tolerance "
            f"{sigma_tol:.3g}"
        )
    multiplicity = int(np.count_nonzero(values <= max(sigma_tol, 10 * sigma_min)))
    ds = perimeter / disc.n
    basis = _real_basis(vectors[:, :multiplicity], ds)
    return [EigenMode(k, u, values[i], perimeter) for i, u in enumerate(basis)], values


def refine_eigenvalue(
    curve,
    k_candidate,
    *,
    bracket=None,
    n_points=None,
    points_per_wavelength=8,
    sigma_tol=1e-5,
    rtol=1e-10,
    slope=None,
):
    """Refine a sweep candidate into one or more EigenModes.

    The smallest singular value is minimized over ``bracket`` (default: one mean level
    spacing on each side).  Degenerate levels give one orthonormal real mode per null
    vector.  If the second singular value is small enough that another level may hide
    within the bracket, both sides of the refined level are searched as well.
    """
    k_candidate = float(k_candidate)
    if bracket is None:
        spacing = mean_level_spacing(k_candidate, curve.area)
        bracket = (max(k_candidate - spacing / 4, 1e-3 * k_candidate), k_candidate + spacing / 4)
    lo, hi = bracket
    if n_points is None:
        n_points = required_points(hi, curve.perimeter, points_per_wavelength)
    disc = _discretization(curve, n_points)
    xatol = rtol * k_candidate
    k = _minimize(disc, lo, hi, k_candidate, xatol)
    modes, values = _modes_at(disc, k, sigma_tol, curve.perimeter)
    found = list(modes)
    if slope is not None and len(values) > len(modes):
        nearest = values[len(modes)]
        # the next branch extrapolates to zero within the bracket
        if nearest < slope * (hi - lo):
            margin = max(1e-6 * k, 100 * xatol)
            for side_lo, side_hi in [(lo, k - margin), (k + margin, hi)]:
                if side_hi - side_lo <= 2 * xatol:
                    continue
                k2 = _minimize(disc, side_lo, side_hi, k_candidate, xatol)
                if min(k2 - side_lo, side_hi - k2) <= 10 * xatol:
                    continue
                try:
                    extra, _ = _modes_at(disc, k2, sigma_tol, curve.perimeter)
                except SpuriousMinimum:
                    continue
                logger.debug("close level at k=%.10g next to k=%.10g", k2, k)
                found.extend(extra)
    return found


def _merge_levels(modes, degeneracy_tol):
    """Drop repeated refinements of the same level, keeping distinct degenerate partners"""
    modes = sorted(modes, key=lambda mode: mode.k)
    merged = []
    group = []
    for mode in modes:
        if group and mode.k - group[0].k > degeneracy_tol * mode.k:
            merged.extend(_distinct(group))
            group = []
        group.append(mode)
    if group:
        merged.extend(_distinct(group))
    return merged


def _resampled(u, size):
    return u if u.size == size else signal.resample(u, size)


def _distinct(group):
    """Keep a maximal set of linearly independent boundary functions in a level group"""
    kept = []
    for mode in sorted(group, key=lambda m: m.sigma_min):
        if kept:
            # refinements from neighbouring windows may use different sample counts
            size = kept[0].N
            basis = np.array([_resampled(m.u, size) for m in kept]).T
            u = _resampled(mode.u, size)
            coeffs, *_ = np.linalg.lstsq(basis, u, rcond=None)
            residual = np.linalg.norm(u - basis @ coeffs) / np.linalg.norm(u)
            if residual < 1e-3:
                continue
        kept.append(mode)
    return kept


class Spectrum:
    """Sorted EigenModes of one curve below ``k_max``"""

    __slots__ = "modes", "curve", "k_max", "settings"

    def __init__(self, modes, curve, k_max, settings=None):
        self.modes = [mode.with_index(i) for i, mode in enumerate(modes, 1)]
        self.curve = curve
        self.k_max = k_max
        self.settings = {} if settings is None else dict(settings)

    def __len__(self):
        return len(self.modes)

    def __iter__(self):
        return iter(self.modes)

    def __getitem__(self, index):
        return self.modes[index]

    @property
    def k(self):
        return np.array([mode.k for mode in self.modes])

    def weyl_deviation(self):
        return weyl_deviation(self.k, self.curve.area, self.curve.perimeter)

    def __repr__(self):
        return f"Spectrum({len(self.modes)} modes, k_max={self.k_max:.6g}, {self.curve!r})"


def check_weyl(ks, area, perimeter):
    """Raise MissedLevelSuspected if the staircase strays from the smooth counting function.

    The allowed deviation at level n is 5 + 3 sqrt(n).
    """
    deviation = weyl_deviation(ks, area, perimeter)
    if deviation.size == 0:
        return deviation
    n = np.arange(1, deviation.size + 1)
    excess = np.abs(deviation) - (5 + 3 * np.sqrt(n))
    if np.any(excess > 0):
        i = int(np.argmax(excess))
        raise MissedLevelSuspected(
            f"level count deviates from the Weyl law by {deviation[i]:+.2f} at n={i + 1} "
            f"(k={np.sort(ks)[i]:.8g}); allowed {5 + 3 * math.sqrt(i + 1):.2f}"
        )
    return deviation


def _windows(k_start, k_max, width):
    edges = np.arange(k_start, k_max, width)
    return [(float(lo), float(min(lo + width, k_max))) for lo in edges]


def solve_window(curve, window, settings):
    """Sweep one k-window and refine every candidate; returns unindexed EigenModes"""
    sweep = singular_value_sweep(
        curve,
        window,
        step_factor=settings.sweep_step_factor,
        points_per_wavelength=settings.points_per_wavelength,
        candidate_cutoff=settings.candidate_cutoff,
    )
    spacing = mean_level_spacing(window[1], curve.area)

    def refine(candidate):
        lo = max(candidate.k - sweep.step, 0.5 * candidate.k)
        hi = candidate.k + sweep.step
        try:
            return refine_eigenvalue(
                curve,
                candidate.k,
                bracket=(lo, hi),
                n_points=sweep.n_points,
                sigma_tol=settings.sigma_tol,
                slope=candidate.slope,
            )
        except SpuriousMinimum as exc:
            logger.info("discarding candidate: %s", exc)
            return []

    found = [mode for modes in parallel_map(refine, sweep.candidates) for mode in modes]
    logger.debug(
        "window [%.6g, %.6g): %d candidates, %d modes (spacing %.3g)",
        window[0],
        window[1],
        len(sweep.candidates),
        len(found),
        spacing,
    )
    return found


def solve_spectrum(curve, k_max, config=None, *, k_min=None, cache_dir=None):
    """All Dirichlet levels of ``curve`` below ``k_max``, sorted and indexed from 1.

    The range is split into windows of ``config.window_width``; each window is swept and
    its candidates refined.  With ``cache_dir``, finished windows are stored there and
    reused on the next call with the same settings.  The result is validated against the
    Weyl law unless ``config.weyl_check`` is false.
    """
    from .config import SolverSection

    if config is None:
        config = SolverSection(k_max=k_max)
    if k_min is None:
        # Faber-Krahn: no level lies below that of the disk with the same area
        k_min = 0.9 * special.jn_zeros(0, 1)[0] * math.sqrt(math.pi / curve.area)
    windows = _windows(k_min, k_max, config.window_width)
    logger.info("solving %d windows up to k=%.6g", len(windows), k_max)
    found = []
    for i, window in enumerate(windows):
        cached = None
        if cache_dir is not None:
            from .io import load_window

            cached = load_window(cache_dir, i, window, curve, config)
        if cached is None:
            modes = solve_window(curve, window, config)
            if cache_dir is not None:
                from .io import save_window

                save_window(cache_dir, i, window, curve, config, modes)
        else:
            logger.debug("window %d [%.6g, %.6g) loaded from cache", i, *window)
            modes = cached
        found.extend(mode for mode in modes if mode.k < k_max)
    modes = _merge_levels(found, config.degeneracy_tol)
    spectrum = Spectrum(modes, curve, k_max, settings=config.model_dump())
    if config.weyl_check:
        check_weyl(spectrum.k, curve.area, curve.perimeter)
    logger.info("found %d levels below k=%.6g", len(spectrum), k_max)
    return spectrum
