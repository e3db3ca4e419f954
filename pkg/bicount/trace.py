"""Semiclassical boundary-intersection density and length spectra.

The count density in the unfolded variable q is a smooth part plus a sum over isolated
periodic orbits p and their repetitions r,

    d_osc(q) = sum_{p,r} A_{p,r} cos(r (q~ L_p - nu_p pi / 2)),   q~ = q + L / (2 A),
    A_{p,r} = w_p Phi_p / (pi sqrt|tr(M_p^r) - 2|),

with w_p = 2 when the orbit and its time reverse are distinct.  Length spectra are
Fourier transforms f^(x) = integral f(q) exp(-i q x) dq of f = (d - d_sm) / q * W.
"""
import logging
import math

import numpy as np
from numpy.polynomial import hermite_e
from scipy import signal

from .exceptions import AliasingRisk, MarginalOrbitInSum
from .orbits import partial_trig_factor
from .utils import float_array

logger = logging.getLogger(__name__)

TRANSFORM_CONVENTION = "integral f(q) exp(-i q x) dq"
PHASE_CONVENTION = (
    "A cos(l q + phi) -> (A / 2) [exp(+i phi) T(x - l) + exp(-i phi) T(x + l)]"
)


def smooth_density(q, perimeter, area):
    """L q / (2 pi) + (L**2 - 6 pi A) / (4 pi A)"""
    q = np.asarray(q, np.float64)
    if np.any(q < 0):
        raise ValueError("q must be non-negative")
    return perimeter * q / (2 * np.pi) + (perimeter ** 2 - 6 * np.pi * area) / (4 * np.pi * area)


class OrbitTerm:
    """One periodic orbit's data as it enters the orbit sum"""

    __slots__ = "id", "length", "phi", "monodromy", "maslov", "weight", "orbit"

    def __init__(self, length, phi, monodromy, maslov, *, weight=1, id=None, orbit=None):
        self.length = float(length)
        self.phi = float(phi)
        self.monodromy = np.asarray(monodromy, np.float64)
        self.maslov = int(maslov)
        self.weight = weight
        self.id = id
        self.orbit = orbit

    @classmethod
    def from_orbit(cls, orbit, gamma=None):
        phi = orbit.phi if gamma is None else partial_trig_factor(orbit, gamma)
        return cls(
            orbit.length,
            phi,
            orbit.monodromy,
            orbit.maslov,
            weight=orbit.weight,
            id=orbit.id,
            orbit=orbit,
        )

    def amplitude(self, r):
        """A_{p,r}; M^r is formed by repeated multiplication"""
        power = np.linalg.matrix_power(self.monodromy, r)
        denom = abs(np.trace(power) - 2)
        if denom < 1e-9:
            raise MarginalOrbitInSum(
                f"orbit {self.id} (L={self.length:.8g}) has |tr(M^{r}) - 2| = {denom:.3g}"
            )
        return self.weight * self.phi / (np.pi * math.sqrt(denom))

    def phase(self, r, perimeter, area):
        """Phase of the r-th repetition's cosine at q = 0, r (L_p L / (2A) - nu pi / 2)"""
        return r * (self.length * perimeter / (2 * area) - self.maslov * np.pi / 2)

    def __repr__(self):
        return (
            f"OrbitTerm(id={self.id}, L={self.length:.8g}, phi={self.phi:.6g}, "
            f"trM={np.trace(self.monodromy):.6g}, maslov={self.maslov})"
        )


class TraceFormulaInput:
    """Everything the orbit sum needs: L, A, the isolated orbit terms and r_max"""

    __slots__ = "perimeter", "area", "terms", "r_max", "window", "excluded"

    def __init__(self, perimeter, area, terms, *, r_max=3, window=None, excluded=()):
        if r_max < 1:
            raise ValueError(f"r_max must be at least 1, not {r_max}")
        self.perimeter = float(perimeter)
        self.area = float(area)
        self.terms = list(terms)
        self.r_max = int(r_max)
        self.window = window
        self.excluded = list(excluded)

    @classmethod
    def from_orbits(cls, curve, orbits, *, r_max=3, window=None, gamma=None):
        """Keep the isolated orbits; marginal, stable and ambiguous ones are set aside"""
        terms = []
        excluded = []
        for orbit in orbits:
            if orbit.is_isolated and orbit.maslov is not None:
                terms.append(OrbitTerm.from_orbit(orbit, gamma))
            else:
                excluded.append(orbit)
        if excluded:
            logger.info("%d orbits excluded from the orbit sum", len(excluded))
        return cls(
            curve.perimeter, curve.area, terms, r_max=r_max, window=window, excluded=excluded
        )

    def restricted(self, gamma):
        """Same input with every Phi_p replaced by its restriction to ``gamma``"""
        terms = []
        for term in self.terms:
            if term.orbit is None:
                raise ValueError("restriction needs terms built from PeriodicOrbits")
            terms.append(OrbitTerm.from_orbit(term.orbit, gamma))
        return TraceFormulaInput(
            self.perimeter,
            self.area,
            terms,
            r_max=self.r_max,
            window=self.window,
            excluded=self.excluded,
        )

    def contributions(self, x_max=None):
        """(term, r, amplitude, length, phase) for every included repetition"""
        out = []
        for term in self.terms:
            for r in range(1, self.r_max + 1):
                if x_max is not None and r * term.length > x_max:
                    break
                out.append(
                    (
                        term,
                        r,
                        term.amplitude(r),
                        r * term.length,
                        term.phase(r, self.perimeter, self.area),
                    )
                )
        return out

    def __repr__(self):
        return f"TraceFormulaInput({len(self.terms)} orbits, r_max={self.r_max})"


def oscillating_density(q, inp, *, x_max=None):
    """Orbit-sum part of the density on the points ``q``"""
    q = float_array(q, name="q")
    total = np.zeros(q.shape)
    for _, _, amp, length, phase in inp.contributions(x_max):
        total += amp * np.cos(length * q + phase)
    return total


class LengthSpectrum:
    """f^(x) on a uniform grid x >= 0.

    ``provenance`` is "numerical" or "semiclassical".  For real f the values at -x are
    the complex conjugates, so only x >= 0 is stored.
    """

    __slots__ = "x", "values", "provenance", "window", "meta"

    def __init__(self, x, values, provenance, window=None, meta=None):
        self.x = np.asarray(x, np.float64)
        self.values = np.asarray(values, np.complex128)
        if self.x.shape != self.values.shape:
            raise ValueError("x and values must have the same shape")
        self.provenance = provenance
        self.window = window
        self.meta = {"convention": TRANSFORM_CONVENTION}
        if meta:
            self.meta.update(meta)

    @property
    def magnitude(self):
        return np.abs(self.values)

    @property
    def step(self):
        return self.x[1] - self.x[0]

    def peaks(self, min_height=None, *, min_separation=None):
        """Local maxima of |f^| as a DataFrame (x, height)"""
        import pandas as pd

        mag = self.magnitude
        kwargs = {}
        if min_height is not None:
            kwargs["height"] = min_height
        if min_separation is not None:
            kwargs["distance"] = max(1, int(round(min_separation / self.step)))
        index, _ = signal.find_peaks(mag, **kwargs)
        return pd.DataFrame({"x": self.x[index], "height": mag[index]})

    def to_frame(self):
        import pandas as pd

        return pd.DataFrame(
            {
                "x": self.x,
                "re": self.values.real,
                "im": self.values.imag,
                "abs": self.magnitude,
            }
        )

    def __add__(self, other):
        if not isinstance(other, LengthSpectrum):
            return NotImplemented
        if not np.array_equal(self.x, other.x):
            raise ValueError("length spectra must share the same grid")
        return LengthSpectrum(self.x, self.values + other.values, self.provenance, self.window)

    def __repr__(self):
        return (
            f"LengthSpectrum({self.provenance}, {self.x.size} points on "
            f"[{self.x[0]:.4g}, {self.x[-1]:.4g}], {self.window!r})"
        )


def length_grid(x_max, q_range, *, oversample=2):
    """Uniform x-grid on [0, x_max] with spacing at most pi / q_range"""
    dx = np.pi / (q_range * oversample)
    return dx * np.arange(int(math.ceil(x_max / dx)) + 1)


def fourier_transform(q, f, x, chunk=256):
    """Riemann sum of f(q) exp(-i q x) dq on a uniform q-grid"""
    q = float_array(q, name="q", ndim=1)
    f = np.asarray(f)
    dq = q[1] - q[0]
    out = np.empty(x.size, np.complex128)
    for start in range(0, x.size, chunk):
        block = x[start : start + chunk]
        out[start : start + chunk] = np.exp(-1j * np.outer(block, q)) @ f * dq
    return out


def inverse_q_transform(window, xi, order=None):
    """Transform of W(q) / q, from the expansion of 1/q about the window center.

    Moments of the Gaussian against powers of (q - q0) are Hermite polynomials, so with
    e = sigma / q0 the transform is W^(xi) / q0 * sum_m (i e)**m He_m(sigma xi).  The
    series is asymptotic; ``order`` defaults to the even order where its terms are
    smallest, capped at 12.
    """
    eps = window.sigma / window.q0
    if order is None:
        order = 2 * max(1, min(6, int((1 / eps ** 2 - 1) / 2)))
    coeffs = (1j * eps) ** np.arange(order + 1)
    xi = np.asarray(xi, np.float64)
    return window.transform(xi) / window.q0 * hermite_e.hermeval(window.sigma * xi, coeffs)


def semiclassical_length_spectrum(inp, x, *, mode="analytic", q=None):
    """Predicted f^(x) from the orbit sum.

    In ``"analytic"`` mode each repetition A cos(l q + phi) adds
    (A / 2) [exp(+i phi) T(x - l) + exp(-i phi) T(x + l)], T being ``inverse_q_transform``.
    ``"quadrature"`` mode transforms d_osc(q) / q * W(q) on the grid ``q`` (default:
    q0 +- 8 sigma, cut at q = q0 / 1000).  Both need q0 >= 8 sigma to agree closely.
    """
    window = inp.window
    if window is None:
        raise ValueError("the trace formula input has no window")
    x = float_array(x, name="x", ndim=1)
    x_max = x[-1] if x.size else 0.0
    if window.q0 < 8 * window.sigma:
        logger.warning(
            "window %r reaches q = 0 within 8 sigma; analytic and quadrature spectra differ", window
        )
    if mode == "analytic":
        values = np.zeros(x.size, np.complex128)
        for _, _, amp, length, phase in inp.contributions(x_max + 6 / window.sigma):
            values += (amp / 2) * (
                np.exp(1j * phase) * inverse_q_transform(window, x - length)
                + np.exp(-1j * phase) * inverse_q_transform(window, x + length)
            )
    elif mode == "quadrature":
        if q is None:
            lo = max(window.q0 - 8 * window.sigma, 1e-3 * window.q0)
            hi = window.q0 + 8 * window.sigma
            dq = np.pi / (4 * max(x_max, 1.0))
            q = lo + dq * np.arange(int(math.ceil((hi - lo) / dq)) + 1)
        q = float_array(q, name="q", ndim=1)
        f = oscillating_density(q, inp, x_max=x_max + 6 / window.sigma) / q * window(q)
        values = fourier_transform(q, f, x)
    else:
        raise ValueError(f'mode must be "analytic" or "quadrature", not {mode!r}')
    meta = {"mode": mode, "convention": f"{TRANSFORM_CONVENTION}; {PHASE_CONVENTION}"}
    return LengthSpectrum(x, values, "semiclassical", window, meta=meta)


def partial_semiclassical_spectrum(inp, gamma, x, **kwargs):
    """Semiclassical spectrum with each Phi_p restricted to the bounces in ``gamma``"""
    spectrum = semiclassical_length_spectrum(inp.restricted(gamma), x, **kwargs)
    spectrum.meta["gamma"] = gamma.to_fractions()
    return spectrum


def numerical_length_spectrum(fluctuation, x=None, *, x_max=None):
    """Fourier transform of a windowed fluctuation f(q) sampled on a uniform grid.

    The x-grid defaults to [0, x_max] with spacing pi / (2 q-range).  AliasingRisk is
    raised if the q-step cannot resolve lengths up to x_max (dq > pi / x_max).
    """
    q = float_array(fluctuation.q, name="q", ndim=1)
    if q.size < 2:
        raise ValueError("need at least two q samples")
    dq = q[1] - q[0]
    if not np.allclose(np.diff(q), dq, rtol=1e-6, atol=0):
        raise ValueError("q-grid must be uniform")
    if x is None:
        if x_max is None:
            x_max = np.pi / (2 * dq)
        x = length_grid(x_max, q[-1] - q[0])
    else:
        x = float_array(x, name="x", ndim=1)
        x_max = x[-1]
    if dq > np.pi / x_max:
        raise AliasingRisk(
            f"q-step {dq:.4g} aliases lengths beyond {np.pi / dq:.4g}; requested x_max={x_max:.4g}"
        )
    values = fourier_transform(q, fluctuation.f, x)
    return LengthSpectrum(
        x,
        values,
        "numerical",
        fluctuation.window,
        meta={"q_range": [float(q[0]), float(q[-1])], "dq": float(dq), "x_max": float(x_max)},
    )
