"""Boundary-intersection counts: zeros of boundary functions and their densities."""
import logging
import math
import warnings
from collections import namedtuple

import numpy as np
from scipy import optimize

from .exceptions import IncompleteSequence, SuspectTangency, UnderResolved, WindowOutOfRange
from .utils import TrigInterpolant, float_array, parallel_map, trig_upsample, wrap

logger = logging.getLogger(__name__)

BICount = namedtuple("BICount", ["eta", "zeros", "suspect_tangency"])


def unfold(n, area):
    """q = sqrt(4 pi n / A)"""
    return np.sqrt(4 * np.pi * np.asarray(n, np.float64) / area)


def unfold_tilde(n, area, perimeter):
    """q + L / (2 A)"""
    return unfold(n, area) + perimeter / (2 * area)


class BoundarySubset:
    """A union of half-open arclength intervals [a, b) on a boundary of length ``perimeter``.

    Intervals may wrap past s = L.  They are normalized into sorted, disjoint pieces
    inside [0, L).
    """

    __slots__ = "intervals", "perimeter"

    def __init__(self, intervals, perimeter):
        perimeter = float(perimeter)
        if not perimeter > 0:
            raise ValueError(f"perimeter must be positive, not {perimeter}")
        pieces = []
        for a, b in intervals:
            a = float(a)
            b = float(b)
            if b < a:
                b += perimeter * math.ceil((a - b) / perimeter)
            if b - a >= perimeter:
                pieces = [(0.0, perimeter)]
                break
            if b == a:
                continue
            a0 = float(wrap(a, perimeter))
            b0 = a0 + (b - a)
            if b0 > perimeter:
                pieces.append((a0, perimeter))
                pieces.append((0.0, b0 - perimeter))
            else:
                pieces.append((a0, b0))
        pieces.sort()
        merged = []
        for a, b in pieces:
            if merged and a <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], b))
            else:
                merged.append((a, b))
        self.intervals = tuple(merged)
        self.perimeter = perimeter

    @classmethod
    def full(cls, perimeter):
        return cls([(0.0, perimeter)], perimeter)

    @classmethod
    def empty(cls, perimeter):
        return cls([], perimeter)

    @classmethod
    def from_fractions(cls, pairs, perimeter):
        """Intervals given as fractions of the perimeter"""
        return cls([(a * perimeter, b * perimeter) for a, b in pairs], perimeter)

    @classmethod
    def parse(cls, text, perimeter):
        """Parse "fa:fb,fc:fd" (fractions of L); "all" is the whole boundary, "" is empty"""
        text = text.strip()
        if text.lower() in {"all", "full"}:
            return cls.full(perimeter)
        pairs = []
        for item in filter(None, (part.strip() for part in text.split(","))):
            try:
                a, b = (float(x) for x in item.split(":"))
            except ValueError:
                raise ValueError(
                    f"bad boundary interval {item!r}; expected 'start:stop' as fractions of L"
                ) from None
            pairs.append((a, b))
        return cls.from_fractions(pairs, perimeter)

    @property
    def measure(self):
        return sum(b - a for a, b in self.intervals)

    @property
    def is_full(self):
        return self.intervals == ((0.0, self.perimeter),)

    def contains(self, s):
        s = wrap(float_array(s, name="s"), self.perimeter)
        inside = np.zeros(s.shape, bool)
        for a, b in self.intervals:
            inside |= (s >= a) & (s < b)
        return inside

    def complement(self):
        edges = [0.0]
        for a, b in self.intervals:
            edges.extend([a, b])
        edges.append(self.perimeter)
        pairs = [(edges[i], edges[i + 1]) for i in range(0, len(edges), 2)]
        return BoundarySubset([(a, b) for a, b in pairs if b > a], self.perimeter)

    def to_fractions(self):
        L = self.perimeter
        return ",".join(f"{a / L:.12g}:{b / L:.12g}" for a, b in self.intervals)

    def __eq__(self, other):
        return (
            type(other) is BoundarySubset
            and self.intervals == other.intervals
            and self.perimeter == other.perimeter
        )

    def __repr__(self):
        return f"BoundarySubset({list(self.intervals)}, perimeter={self.perimeter:.10g})"


def _sub_threshold_runs(small):
    """(start, length) of cyclic runs of True in a boolean array"""
    n = small.size
    if small.all():
        return [(0, n)]
    if not small.any():
        return []
    # rotate so that index 0 is outside a run
    shift = int(np.argmin(small))
    rolled = np.roll(small, -shift)
    edges = np.diff(np.concatenate([[0], rolled.astype(np.int8), [0]]))
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1)
    return [((start + shift) % n, stop - start) for start, stop in zip(starts, stops)]


def count_BI(mode, *, tolerance=1e-6, upsample=4, min_samples_per_wavelength=6):
    """Count the sign changes of a mode's boundary function around the closed boundary.

    Zeros are bracketed on an FFT-upsampled grid and refined with Brent's method on the
    trigonometric interpolant.  A stretch where |u| stays below ``tolerance * max|u|`` and
    that is longer than half a boundary wavelength, or holds more than one sign change, is a
    near-tangency: it counts as one crossing if the sign differs across it, else none, and a
    SuspectTangency warning is issued.

    Returns ``BICount(eta, zeros, suspect_tangency)`` with the zeros sorted in arclength.
    """
    u = np.asarray(mode.u, np.float64)
    perimeter = mode.perimeter
    n = u.size
    per_wavelength = n * 2 * math.pi / (mode.k * perimeter)
    if per_wavelength < min_samples_per_wavelength:
        raise UnderResolved(
            f"{n} samples give {per_wavelength:.2f} per boundary wavelength at k={mode.k:.6g}; "
            f"need {min_samples_per_wavelength}"
        )
    fine = trig_upsample(u, upsample)
    m = fine.size
    step = perimeter / m
    positive = fine >= 0
    crossings = np.flatnonzero(positive != np.roll(positive, -1))

    threshold = tolerance * np.abs(fine).max()
    suspect = False
    keep = np.ones(crossings.size, bool)
    extra = []
    min_run = math.pi / mode.k
    for start, length in _sub_threshold_runs(np.abs(fine) < threshold):
        offsets = (crossings - (start - 1)) % m
        inside = offsets <= length
        if length * step <= min_run and np.count_nonzero(inside) <= 1:
            continue
        suspect = True
        keep &= ~inside
        before = positive[(start - 1) % m]
        after = positive[(start + length) % m]
        counted = int(before != after)
        if counted:
            extra.append(float(wrap((start + 0.5 * length) * step, perimeter)))
        warnings.warn(
            f"boundary function of mode k={mode.k:.8g} is flat (|u| < {threshold:.3g}) over "
            f"s in [{start * step:.6g}, {(start + length) * step:.6g}); "
            f"counted as {counted} crossing(s)",
            SuspectTangency,
            stacklevel=2,
        )
    crossings = crossings[keep]

    interpolant = TrigInterpolant(u, perimeter)
    zeros = []
    for i in crossings:
        a = i * step
        b = a + step
        fa, fb = interpolant([a, b])
        if fa == 0:
            root = a
        elif fa * fb < 0:
            root = optimize.brentq(interpolant, a, b, xtol=1e-14 * perimeter)
        else:
            # roundoff at a sample that is numerically zero
            root = a + step * fine[i] / (fine[i] - fine[(i + 1) % m])
        zeros.append(root)
    zeros = np.sort(wrap(np.array(zeros + extra, np.float64), perimeter))
    return BICount(int(zeros.size), zeros, suspect)


def count_BI_partial(mode, gamma, **kwargs):
    """Number of boundary intersections of ``mode`` lying in ``gamma``.

    ``mode`` may also be a BICount already computed for the mode.
    """
    result = mode if isinstance(mode, BICount) else count_BI(mode, **kwargs)
    if gamma is None:
        return result.eta
    return int(np.count_nonzero(gamma.contains(result.zeros)))


class BICountSequence:
    """Boundary-intersection counts of consecutive levels, sorted by k.

    ``eta_gamma`` is present when a boundary subset ``gamma`` was given.  Counts must be
    even unless ``partial`` is set: a sub-arc can hold an odd number of the zeros.
    """

    __slots__ = (
        "n",
        "k",
        "eta",
        "eta_gamma",
        "gamma",
        "area",
        "perimeter",
        "tolerance",
        "partial",
        "meta",
    )

    def __init__(
        self,
        n,
        k,
        eta,
        *,
        area,
        perimeter,
        eta_gamma=None,
        gamma=None,
        tolerance=None,
        partial=False,
        meta=None,
    ):
        self.n = np.asarray(n, np.int64)
        self.k = float_array(k, name="k", ndim=1)
        self.eta = np.asarray(eta, np.int64)
        if not (self.n.shape == self.k.shape == self.eta.shape):
            raise ValueError("n, k and eta must have the same length")
        self.partial = bool(partial)
        if not self.partial and np.any(self.eta % 2):
            odd = self.n[self.eta % 2 == 1]
            raise ValueError(f"boundary-intersection counts must be even; odd at n={odd[:5]}")
        if eta_gamma is not None:
            eta_gamma = np.asarray(eta_gamma, np.int64)
            if eta_gamma.shape != self.eta.shape:
                raise ValueError("eta_gamma must have the same length as eta")
            if np.any(eta_gamma > self.eta):
                raise ValueError("eta_gamma cannot exceed eta")
        self.eta_gamma = eta_gamma
        self.gamma = gamma
        self.area = float(area)
        self.perimeter = float(perimeter)
        self.tolerance = tolerance
        self.meta = {} if meta is None else dict(meta)

    def __len__(self):
        return self.n.size

    @property
    def q(self):
        return unfold(self.n, self.area)

    @property
    def is_contiguous(self):
        if self.n.size == 0:
            return True
        return np.array_equal(self.n, np.arange(self.n[0], self.n[0] + self.n.size))

    def sqrt_ratio(self):
        """Largest eta_n / sqrt(n); stays bounded since eta_n = O(sqrt n)"""
        if self.n.size == 0:
            return 0.0
        return float(np.max(self.eta / np.sqrt(self.n)))

    def to_frame(self):
        import pandas as pd

        data = {"n": self.n, "k": self.k, "eta": self.eta}
        if self.eta_gamma is not None:
            data["eta_gamma"] = self.eta_gamma
        return pd.DataFrame(data)

    def restricted(self):
        """The sequence of partial counts eta_gamma, as its own sequence"""
        if self.eta_gamma is None:
            raise ValueError("sequence has no partial counts")
        return BICountSequence(
            self.n,
            self.k,
            self.eta_gamma,
            area=self.area,
            perimeter=self.perimeter,
            tolerance=self.tolerance,
            partial=True,
            meta=dict(self.meta, restricted_to=self.gamma.to_fractions()),
        )

    def __repr__(self):
        partial = "" if self.eta_gamma is None and not self.partial else ", partial"
        return f"BICountSequence({len(self)} records{partial})"

    def _repr_html_(self):
        from .formatting import format_frame_html

        return format_frame_html(self.to_frame(), "BICountSequence")


def count_sequence(spectrum, gamma=None, *, tolerance=1e-6):
    """Count boundary intersections for every mode of a Spectrum"""
    modes = list(spectrum)
    curve = spectrum.curve
    if isinstance(gamma, str):
        gamma = BoundarySubset.parse(gamma, curve.perimeter)
    counts = parallel_map(lambda mode: count_BI(mode, tolerance=tolerance), modes)
    suspects = [mode.n for mode, c in zip(modes, counts) if c.suspect_tangency]
    if suspects:
        logger.warning("suspect tangencies in modes %s", suspects)
    eta_gamma = None
    if gamma is not None:
        eta_gamma = [count_BI_partial(c, gamma) for c in counts]
    return BICountSequence(
        [mode.n for mode in modes],
        [mode.k for mode in modes],
        [c.eta for c in counts],
        eta_gamma=eta_gamma,
        gamma=gamma,
        area=curve.area,
        perimeter=curve.perimeter,
        tolerance=tolerance,
        meta={"family": curve.family, "suspect_tangency": suspects},
    )


class GaussianWindow:
    """W(q) = exp(-(q - q0)**2 / (2 sigma**2))"""

    __slots__ = "q0", "sigma"

    def __init__(self, q0, sigma):
        if not sigma > 0:
            raise ValueError(f"window width must be positive, not {sigma}")
        self.q0 = float(q0)
        self.sigma = float(sigma)

    @classmethod
    def centered(cls, q_lo, q_hi):
        """Window in the middle of [q_lo, q_hi] whose 3 sigma edges touch the ends"""
        return cls(0.5 * (q_lo + q_hi), (q_hi - q_lo) / 6)

    def __call__(self, q):
        q = np.asarray(q, np.float64)
        return np.exp(-0.5 * ((q - self.q0) / self.sigma) ** 2)

    def transform(self, x):
        """Integral of W(q) exp(-i q x) over q"""
        x = np.asarray(x, np.float64)
        return (
            self.sigma
            * math.sqrt(2 * math.pi)
            * np.exp(-0.5 * (self.sigma * x) ** 2 - 1j * self.q0 * x)
        )

    @property
    def integral(self):
        return self.sigma * math.sqrt(2 * math.pi)

    def __eq__(self, other):
        return type(other) is GaussianWindow and (self.q0, self.sigma) == (other.q0, other.sigma)

    def __repr__(self):
        return f"GaussianWindow(q0={self.q0:.6g}, sigma={self.sigma:.6g})"


class Density:
    """A count density sampled on a uniform grid in n or q"""

    __slots__ = "grid", "values", "variable", "width", "support"

    def __init__(self, grid, values, variable, width, support):
        self.grid = grid
        self.values = values
        self.variable = variable
        self.width = width
        self.support = support

    @property
    def step(self):
        return self.grid[1] - self.grid[0]

    def __repr__(self):
        return (
            f"Density({self.variable}, {self.grid.size} points on "
            f"[{self.grid[0]:.6g}, {self.grid[-1]:.6g}], width={self.width:.3g})"
        )


def smoothed_density(seq, variable="q", width=None, *, grid_step=None, counts=None):
    """Gaussian-smoothed count density of a BICountSequence.

    In the ``"n"`` variable this is sum_j rho(n - n_j) eta_j.  In the ``"q"`` variable
    each level sits at q_j = sqrt(4 pi n_j / A) and the same density is expressed per unit
    n, using rho(q - q_j) = rho(n - n_j) A q_j / (2 pi).  ``width`` defaults to four grid
    steps; the grid step defaults to 0.25 in n and to a quarter of the smallest level
    spacing 2 pi / (A q_max) in q.  ``counts`` replaces ``seq.eta`` (e.g. partial counts).
    """
    if variable not in {"n", "q"}:
        raise ValueError(f'variable must be "n" or "q", not {variable!r}')
    if not seq.is_contiguous:
        gaps = np.flatnonzero(np.diff(seq.n) != 1)
        raise IncompleteSequence(
            f"record indices are not contiguous: gap after n={seq.n[gaps[0]]}"
        )
    if len(seq) == 0:
        raise IncompleteSequence("sequence is empty")
    eta = seq.eta if counts is None else np.asarray(counts, np.float64)
    if variable == "n":
        centers = seq.n.astype(np.float64)
        weights = eta.astype(np.float64)
        default_step = 0.25
    else:
        centers = seq.q
        weights = eta * 2 * np.pi / (seq.area * centers)
        default_step = 0.25 * 2 * np.pi / (seq.area * centers[-1])
    if grid_step is None:
        grid_step = default_step if width is None else width / 4
    if width is None:
        width = 4 * grid_step
    if width < 2 * grid_step:
        raise ValueError(
            f"kernel width {width:.4g} must be at least twice the grid step {grid_step:.4g}"
        )
    lo = centers[0] - 4 * width
    hi = centers[-1] + 4 * width
    grid = lo + grid_step * np.arange(int(math.ceil((hi - lo) / grid_step)) + 1)
    values = np.zeros(grid.size)
    norm = 1 / (width * math.sqrt(2 * math.pi))
    # chunk over records to bound memory
    for start in range(0, centers.size, 512):
        c = centers[start : start + 512]
        w = weights[start : start + 512]
        values += (np.exp(-0.5 * ((grid[:, None] - c) / width) ** 2) * norm) @ w
    return Density(grid, values, variable, width, (float(centers[0]), float(centers[-1])))


class Fluctuation:
    """f(q) = (d(q) - d_sm(q)) / q * W(q) on a uniform q-grid"""

    __slots__ = "q", "f", "window"

    def __init__(self, q, f, window):
        self.q = q
        self.f = f
        self.window = window

    def __repr__(self):
        return f"Fluctuation({self.q.size} points, {self.window!r})"


def windowed_fluctuation(density, smooth, window, *, margin=3.0):
    """Windowed, 1/q-weighted fluctuating part of a q-density.

    ``smooth`` is a callable of q, an array matching ``density.values``, or ``"fit"`` to
    subtract a straight line fitted to the density under the window.  The window must lie
    ``margin`` widths inside the range spanned by the levels.
    """
    if density.variable != "q":
        raise ValueError("windowed_fluctuation needs a density in the q variable")
    q_lo, q_hi = density.support
    need_lo = window.q0 - margin * window.sigma
    need_hi = window.q0 + margin * window.sigma
    if need_lo < q_lo - 1e-9 or need_hi > q_hi + 1e-9:
        raise WindowOutOfRange(
            f"window q0={window.q0:.6g}, sigma={window.sigma:.6g} needs "
            f"[{need_lo:.6g}, {need_hi:.6g}] "
            f"inside the computed range [{q_lo:.6g}, {q_hi:.6g}]"
        )
    inside = (density.grid >= q_lo) & (density.grid <= q_hi)
    q = density.grid[inside]
    d = density.values[inside]
    weight = window(q)
    if isinstance(smooth, str):
        if smooth != "fit":
            raise ValueError(f'smooth must be a callable, an array or "fit", not {smooth!r}')
        coeffs = np.polyfit(q, d, 1, w=np.sqrt(weight))
        d_sm = np.polyval(coeffs, q)
    elif callable(smooth):
        d_sm = np.asarray(smooth(q), np.float64)
    else:
        d_sm = np.asarray(smooth, np.float64)[inside]
    return Fluctuation(q, (d - d_sm) / q * weight, window)


def windowed_mean(values, q, window):
    """Average of ``values`` weighted by the window at the points ``q``"""
    weight = window(q)
    return float(np.sum(weight * values) / np.sum(weight))
