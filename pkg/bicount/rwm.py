"""Random-wave checks on boundary functions: Rice's formula, kurtosis, smooth part."""
import logging
import math
from collections import namedtuple

import numpy as np
from scipy import signal, stats

from .exceptions import DegenerateField, TooFewModes
from .nodal import count_BI
from .utils import parallel_map, spectral_derivative

logger = logging.getLogger(__name__)

Moments = namedtuple("Moments", ["s", "var_u", "var_udot", "kurtosis", "count"])
RiceReport = namedtuple(
    "RiceReport",
    [
        "center",
        "members",
        "rice_total",
        "counted_mean",
        "counted_stderr",
        "relative_deviation",
        "max_abs_kurtosis",
    ],
)
SmoothPartReport = namedtuple(
    "SmoothPartReport",
    ["s", "b_mean", "expected", "kappa", "relative_deviation", "leading_deviation", "correlation"],
)
RiceCalibration = namedtuple(
    "RiceCalibration", ["empirical_density", "stderr", "rice_prediction", "expected"]
)


def rice_density(var_u, var_udot):
    """Mean density of zeros of a stationary Gaussian process, (1/pi) sqrt(var_udot / var_u)"""
    var_u = np.asarray(var_u, np.float64)
    var_udot = np.asarray(var_udot, np.float64)
    if np.any(var_u < 0) or np.any(var_udot < 0):
        raise ValueError("variances must be non-negative")
    if np.any(var_u == 0):
        raise DegenerateField("field variance vanishes; the zero density is undefined")
    result = np.sqrt(var_udot / var_u) / np.pi
    return float(result) if result.ndim == 0 else result


class WindowEnsemble:
    """Modes with |k - center| <= half_width"""

    __slots__ = "center", "half_width", "members", "perimeter", "_moments"

    def __init__(self, center, half_width, members, perimeter):
        self.center = float(center)
        self.half_width = float(half_width)
        self.members = list(members)
        self.perimeter = float(perimeter)
        self._moments = None

    def __len__(self):
        return len(self.members)

    def moments(self):
        if self._moments is None:
            self._moments = ensemble_moments(self)
        return self._moments

    def __repr__(self):
        return (
            f"WindowEnsemble(k={self.center:.6g} +- {self.half_width:.3g}, "
            f"{len(self.members)} modes)"
        )


def spectral_window(spectrum, center, *, c=2.0, half_width=None, min_modes=20, widen=False):
    """Collect the modes of ``spectrum`` in a hard window around ``center``.

    The half-width defaults to ``c / sqrt(center)``.  With ``widen``, the window grows by
    25% steps until it holds ``min_modes`` modes.
    """
    if half_width is None:
        half_width = c / math.sqrt(center)
    ks = spectrum.k
    while True:
        members = [mode for mode, k in zip(spectrum, ks) if abs(k - center) <= half_width]
        if len(members) >= min_modes:
            break
        exhausted = ks.size == 0 or (center - half_width <= ks[0] and center + half_width >= ks[-1])
        if not widen or exhausted:
            raise TooFewModes(
                f"window k={center:.6g} +- {half_width:.4g} holds {len(members)} modes; "
                f"need at least {min_modes}"
            )
        half_width *= 1.25
    logger.debug("window at k=%.6g: %d modes, half-width %.4g", center, len(members), half_width)
    return WindowEnsemble(center, half_width, members, spectrum.curve.perimeter)


def _common_samples(modes, n_points):
    return np.array([signal.resample(mode.u, n_points) for mode in modes])


def ensemble_moments(members, s_grid=None, *, perimeter=None, min_modes=20):
    """Pointwise second moments of u and du/ds and the excess kurtosis of u across members.

    ``members`` is a WindowEnsemble, a list of EigenModes, or an array of shape
    (members, points) of samples on a uniform periodic grid over ``perimeter``.  Mode
    samples are brought to a common grid by Fourier resampling; ``s_grid`` sets its size.
    Moments are taken about zero, the mean of the field.
    """
    if isinstance(members, WindowEnsemble):
        perimeter = members.perimeter
        members = members.members
    if isinstance(members, np.ndarray):
        samples = np.asarray(members, np.float64)
        if perimeter is None:
            raise ValueError("perimeter is required for sample arrays")
    else:
        members = list(members)
        if len(members) < min_modes:
            raise TooFewModes(f"{len(members)} modes given; need at least {min_modes}")
        perimeter = members[0].perimeter if perimeter is None else perimeter
        n_points = max(mode.N for mode in members)
        if s_grid is not None:
            n_points = np.size(s_grid) if np.ndim(s_grid) else int(s_grid)
        samples = _common_samples(members, n_points)
    if samples.shape[0] < min_modes:
        raise TooFewModes(f"{samples.shape[0]} members given; need at least {min_modes}")
    derivs = np.array([spectral_derivative(row, perimeter) for row in samples])
    var_u = np.mean(samples ** 2, axis=0)
    var_udot = np.mean(derivs ** 2, axis=0)
    kurt = stats.kurtosis(samples, axis=0, fisher=True, bias=False)
    s = np.arange(samples.shape[1]) * (perimeter / samples.shape[1])
    return Moments(s, var_u, var_udot, kurt, samples.shape[0])


def kurtosis_is_gaussian(kurtosis, count, n_stderr=5.0):
    """Whether every excess kurtosis is within ``n_stderr`` standard errors sqrt(24/count) of 0"""
    return bool(np.all(np.abs(kurtosis) <= n_stderr * math.sqrt(24 / count)))


def rice_consistency(window, moments=None):
    """Compare the Rice density integrated over the boundary with the counted mean eta"""
    if moments is None:
        moments = window.moments()
    density = rice_density(moments.var_u, moments.var_udot)
    rice_total = float(np.mean(density) * window.perimeter)
    etas = np.array(parallel_map(lambda mode: count_BI(mode).eta, window.members), np.float64)
    counted = float(etas.mean())
    stderr = float(etas.std(ddof=1) / math.sqrt(etas.size)) if etas.size > 1 else float("nan")
    return RiceReport(
        window.center,
        len(window.members),
        rice_total,
        counted,
        stderr,
        (rice_total - counted) / counted if counted else float("nan"),
        float(np.max(np.abs(moments.kurtosis))),
    )


def smooth_part_check(window, curve, *, bins=32):
    """Window-averaged boundary-intersection density against (k - kappa(s)) / (2 pi).

    Zeros of all member modes are histogrammed along the boundary.  The report holds the
    relative deviation from (k - kappa)/(2 pi) and from the leading k/(2 pi) per bin, and
    the correlation of b(s) - k/(2 pi) with -kappa(s)/(2 pi) (nan when kappa is constant).
    """
    perimeter = curve.perimeter
    edges = np.linspace(0.0, perimeter, bins + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    zeros = parallel_map(lambda mode: count_BI(mode).zeros, window.members)
    counts, _ = np.histogram(np.concatenate(zeros) if zeros else [], bins=edges)
    b_mean = counts / (len(window.members) * np.diff(edges))
    k = float(np.mean([mode.k for mode in window.members]))
    kappa = curve.point_data(centers).kappa
    expected = (k - kappa) / (2 * np.pi)
    leading = k / (2 * np.pi)
    excess = b_mean - leading
    if np.ptp(kappa) < 1e-12 * max(1.0, np.abs(kappa).max()):
        correlation = float("nan")
    else:
        correlation = float(np.corrcoef(excess, -kappa / (2 * np.pi))[0, 1])
    return SmoothPartReport(
        centers,
        b_mean,
        expected,
        kappa,
        (b_mean - expected) / expected,
        (b_mean - leading) / leading,
        correlation,
    )


def random_cosine_ensemble(k, length, n_points, n_members, *, n_waves=64, seed=None):
    """Samples of u(x) = sqrt(2/J) sum_j cos(k x cos(theta_j) + phi_j) and du/dx.

    theta_j and phi_j are uniform on [0, 2 pi).  Returns ``(x, u, udot)`` with ``u`` and
    ``udot`` of shape (n_members, n_points).
    """
    rng = np.random.default_rng(seed)
    x = np.linspace(0.0, length, n_points)
    theta = rng.uniform(0, 2 * np.pi, (n_members, n_waves))
    phi = rng.uniform(0, 2 * np.pi, (n_members, n_waves))
    kx = k * np.cos(theta)
    amp = math.sqrt(2 / n_waves)
    u = np.empty((n_members, n_points))
    udot = np.empty((n_members, n_points))
    for i in range(n_members):
        phase = np.outer(x, kx[i]) + phi[i]
        u[i] = amp * np.cos(phase).sum(axis=1)
        udot[i] = -amp * (np.sin(phase) * kx[i]).sum(axis=1)
    return x, u, udot


def count_zero_crossings(samples):
    """Sign changes along the last axis (not periodic)"""
    positive = np.asarray(samples) >= 0
    return np.count_nonzero(positive[..., 1:] != positive[..., :-1], axis=-1)


def calibrate_rice(k=10.0, *, length=50.0, n_members=200, points_per_wavelength=40, seed=0):
    """Monte Carlo check of Rice's formula on the 1D random cosine ensemble.

    Returns the counted zero density with its standard error, the Rice prediction from
    the empirical variances, and the exact value k / (pi sqrt 2).
    """
    n_points = int(points_per_wavelength * k * length / (2 * np.pi)) + 1
    x, u, udot = random_cosine_ensemble(k, length, n_points, n_members, seed=seed)
    densities = count_zero_crossings(u) / length
    prediction = rice_density(np.mean(u ** 2), np.mean(udot ** 2))
    return RiceCalibration(
        float(densities.mean()),
        float(densities.std(ddof=1) / math.sqrt(n_members)),
        prediction,
        k / (np.pi * math.sqrt(2)),
    )


def format_report(report, smooth=None):
    """Plain-text validation report"""
    lines = [
        "bicount random-wave validation",
        "------------------------------",
        f"window center k      : {report.center:.10g}",
        f"member modes         : {report.members}",
        f"max |excess kurtosis|: {report.max_abs_kurtosis:.6g}",
        f"Rice integrated eta  : {report.rice_total:.6g}",
        f"counted mean eta     : {report.counted_mean:.6g} +- {report.counted_stderr:.3g}",
        f"Rice vs counted      : {100 * report.relative_deviation:+.3f}%",
    ]
    if smooth is not None:
        lines.extend(
            [
                f"max |b/(k/2pi) - 1|  : {np.max(np.abs(smooth.leading_deviation)):.6g}",
                f"max |b/((k-kappa)/2pi) - 1|: {np.max(np.abs(smooth.relative_deviation)):.6g}",
                f"corr(b - k/2pi, -kappa): {smooth.correlation:.6g}",
            ]
        )
    return "\n".join(lines) + "\n"
