"""Smooth closed billiard boundaries and their differential geometry.

Curves are parametrized by t in [0, 1) running counter-clockwise, so the domain is on
the left of the tangent.  The inward normal is the tangent rotated by +90 degrees and
the curvature is positive where the boundary bends toward the interior.
"""
import logging
import numbers
from collections import namedtuple
from dataclasses import dataclass

import numba
import numpy as np
from scipy import integrate

from .exceptions import NonSmooth, SelfIntersectingBoundary
from .utils import float_array, wrap

logger = logging.getLogger(__name__)

_GL_ORDER = 8
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(_GL_ORDER)

PointData = namedtuple("PointData", ["r", "tangent", "normal", "kappa"])


@dataclass(frozen=True)
class DiskSpec:
    radius: float = 1.0

    family = "disk"

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"radius must be positive, not {self.radius}")

    def derivatives(self, t):
        z = np.exp(2j * np.pi * t)
        w = 2 * np.pi
        r = self.radius * z
        return r, 1j * w * r, -(w ** 2) * r

    def scaled(self, factor):
        return DiskSpec(self.radius * factor)


@dataclass(frozen=True)
class EllipseSpec:
    a: float = 2.0
    b: float = 1.0

    family = "ellipse"

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError(f"semi-axes must be positive, not ({self.a}, {self.b})")

    def derivatives(self, t):
        theta = 2 * np.pi * t
        w = 2 * np.pi
        c = np.cos(theta)
        s = np.sin(theta)
        r = self.a * c + 1j * self.b * s
        dr = w * (-self.a * s + 1j * self.b * c)
        ddr = -(w ** 2) * r
        return r, dr, ddr

    def scaled(self, factor):
        return EllipseSpec(self.a * factor, self.b * factor)


@dataclass(frozen=True)
class ConformalMapSpec:
    """Image of the unit circle under w(z) = scale * (z + a z**2 + b exp(i delta) z**3).

    The defaults give the Africa billiard.
    """

    a: float = 0.2
    b: float = 0.2
    delta: float = np.pi / 3
    scale: float = 1.0

    family = "conformal"

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, not {self.scale}")

    def derivatives(self, t):
        z = np.exp(2j * np.pi * t)
        beta = self.b * np.exp(1j * self.delta)
        w = 2 * np.pi
        c = self.scale
        r = c * (z + self.a * z ** 2 + beta * z ** 3)
        dw = c * (1 + 2 * self.a * z + 3 * beta * z ** 2)
        ddw = c * (2 * self.a + 6 * beta * z)
        # chain rule through z = exp(i theta), theta = 2 pi t
        dr = w * 1j * z * dw
        ddr = -(w ** 2) * (z * dw + z ** 2 * ddw)
        return r, dr, ddr

    def scaled(self, factor):
        return ConformalMapSpec(self.a, self.b, self.delta, self.scale * factor)

    def analytic_area(self):
        """Area of the image domain, pi * scale**2 * (1 + 2 a**2 + 3 b**2)"""
        return np.pi * self.scale ** 2 * (1 + 2 * self.a ** 2 + 3 * self.b ** 2)


@numba.njit(cache=True)
def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


@numba.njit(cache=True)
def _find_crossing(xs, ys):
    """First pair of non-adjacent polygon edges that cross, or (-1, -1)"""
    n = xs.shape[0]
    for i in range(n):
        ax, ay = xs[i], ys[i]
        bx, by = xs[(i + 1) % n], ys[(i + 1) % n]
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue
            cx, cy = xs[j], ys[j]
            dx, dy = xs[(j + 1) % n], ys[(j + 1) % n]
            d1 = _orient(ax, ay, bx, by, cx, cy)
            d2 = _orient(ax, ay, bx, by, dx, dy)
            d3 = _orient(cx, cy, dx, dy, ax, ay)
            d4 = _orient(cx, cy, dx, dy, bx, by)
            if d1 * d2 < 0 and d3 * d4 < 0:
                return i, j
    return -1, -1


@numba.njit(cache=True)
def _points_inside(xs, ys, px, py):
    n = xs.shape[0]
    out = np.zeros(px.shape[0], dtype=np.bool_)
    for k in range(px.shape[0]):
        x = px[k]
        y = py[k]
        inside = False
        j = n - 1
        for i in range(n):
            if (ys[i] > y) != (ys[j] > y):
                xcross = xs[i] + (y - ys[i]) * (xs[j] - xs[i]) / (ys[j] - ys[i])
                if x < xcross:
                    inside = not inside
            j = i
        out[k] = inside
    return out


class BoundaryCurve:
    """A smooth, simple, closed billiard boundary.

    Arclength is tabulated with Gauss-Legendre quadrature on ``resolution`` equal cells
    in t.  The table is refined until it agrees with adaptive quadrature of |dr/dt|.
    Converting arclength back to t uses Newton iterations on the tabulated integral.

    Instances are immutable.
    """

    __slots__ = (
        "spec",
        "resolution",
        "_t_cells",
        "_s_cells",
        "_perimeter",
        "_area",
        "_polyline",
    )

    def __init__(self, spec, resolution=256):
        if resolution < 64:
            raise ValueError(f"resolution must be at least 64, not {resolution}")
        self.spec = spec
        self._check_smooth()
        resolution = int(resolution)
        reference, _ = integrate.quad(
            lambda t: abs(spec.derivatives(t)[1]), 0.0, 1.0, limit=500, epsabs=0, epsrel=1e-12
        )
        while True:
            t_cells, s_cells = self._tabulate(resolution)
            if abs(s_cells[-1] - reference) <= 1e-10 * reference or resolution >= 2 ** 14:
                break
            logger.debug(
                "refining arclength table: %d cells off by %.3g",
                resolution,
                abs(s_cells[-1] - reference) / reference,
            )
            resolution *= 2
        self.resolution = resolution
        self._t_cells = t_cells
        self._s_cells = s_cells
        self._perimeter = float(s_cells[-1])
        self._area = self._area_integral()
        self._polyline = self._build_polyline(min(8 * resolution, 4096))
        self._check_simple()
        logger.debug(
            "built %s curve: L=%.12g A=%.12g (%d cells)",
            spec.family,
            self._perimeter,
            self._area,
            resolution,
        )

    def _check_smooth(self):
        t = np.arange(4096) / 4096
        speed = np.abs(self.spec.derivatives(t)[1])
        if speed.min() < 1e-6 * speed.max():
            i = speed.argmin()
            raise NonSmooth(
                f"|dr/dt| nearly vanishes at t={t[i]:.6f} "
                f"({speed[i]:.3g} vs max {speed.max():.3g}); the boundary has a cusp"
            )

    def _gl_nodes(self, lo, hi):
        half = 0.5 * (hi - lo)
        nodes = lo[..., None] + half[..., None] * (_GL_NODES + 1)
        return nodes, half

    def _tabulate(self, resolution):
        t_cells = np.arange(resolution + 1) / resolution
        nodes, half = self._gl_nodes(t_cells[:-1], t_cells[1:])
        speed = np.abs(self.spec.derivatives(nodes)[1])
        pieces = (speed @ _GL_WEIGHTS) * half
        s_cells = np.concatenate([[0.0], np.cumsum(pieces)])
        return t_cells, s_cells

    def _area_integral(self):
        nodes, half = self._gl_nodes(self._t_cells[:-1], self._t_cells[1:])
        r, dr, _ = self.spec.derivatives(nodes)
        integrand = (np.conj(r) * dr).imag
        return float(0.5 * np.sum((integrand @ _GL_WEIGHTS) * half))

    def _build_polyline(self, n):
        r = self.spec.derivatives(np.arange(n) / n)[0]
        xs = np.ascontiguousarray(r.real)
        ys = np.ascontiguousarray(r.imag)
        xs.flags.writeable = False
        ys.flags.writeable = False
        return xs, ys

    def _check_simple(self):
        xs, ys = self._polyline
        i, j = _find_crossing(xs, ys)
        if i >= 0:
            n = xs.size
            raise SelfIntersectingBoundary(
                f"boundary crosses itself near t={i / n:.4f} and t={j / n:.4f}"
            )

    @property
    def perimeter(self):
        return self._perimeter

    @property
    def area(self):
        return self._area

    @property
    def family(self):
        return self.spec.family

    def __repr__(self):
        return (
            f"BoundaryCurve({self.spec!r}, resolution={self.resolution}) "
            f"L={self._perimeter:.10g} A={self._area:.10g}"
        )

    def __eq__(self, other):
        return type(other) is BoundaryCurve and self.spec == other.spec

    def __hash__(self):
        return hash(self.spec)

    def s_of_t(self, t):
        t = float_array(t, name="t")
        t = wrap(t, 1.0)
        j = np.clip(np.searchsorted(self._t_cells, t, side="right") - 1, 0, self.resolution - 1)
        nodes, half = self._gl_nodes(self._t_cells[j], t)
        speed = np.abs(self.spec.derivatives(nodes)[1])
        return self._s_cells[j] + (speed @ _GL_WEIGHTS) * half

    def t_of_s(self, s):
        s = wrap(float_array(s, name="s"), self._perimeter)
        t = np.interp(s, self._s_cells, self._t_cells)
        half = 0.5 * self._perimeter
        for _ in range(12):
            speed = np.abs(self.spec.derivatives(t)[1])
            # s_of_t wraps t, so an iterate across t=0 shows up as a jump of L
            mismatch = np.mod(self.s_of_t(t) - s + half, self._perimeter) - half
            step = mismatch / speed
            t = t - step
            if np.max(np.abs(step), initial=0.0) < 1e-15:
                break
        return wrap(t, 1.0)

    def frame_at_t(self, t):
        r, dr, ddr = self.spec.derivatives(t)
        speed = np.abs(dr)
        tangent = dr / speed
        kappa = (np.conj(dr) * ddr).imag / speed ** 3
        return r, tangent, 1j * tangent, kappa, speed

    def point_data(self, s):
        """Position, unit tangent, unit inward normal and curvature at arclength ``s``.

        ``s`` is wrapped modulo the perimeter.  Vectors are returned as arrays with a
        trailing axis of length 2.
        """
        r, tangent, normal, kappa, _ = self.frame_at_t(self.t_of_s(s))
        return PointData(_as_xy(r), _as_xy(tangent), _as_xy(normal), kappa)

    def sample(self, n):
        """``n`` boundary points equally spaced in arclength, starting at s = 0"""
        s = np.arange(n) * (self._perimeter / n)
        t = self.t_of_s(s)
        r, tangent, normal, kappa, speed = self.frame_at_t(t)
        return BoundarySample(s, t, r, tangent, normal, kappa, self._perimeter)

    def total_curvature(self):
        nodes, half = self._gl_nodes(self._t_cells[:-1], self._t_cells[1:])
        _, dr, ddr = self.spec.derivatives(nodes)
        integrand = (np.conj(dr) * ddr).imag / np.abs(dr) ** 2
        return float(np.sum((integrand @ _GL_WEIGHTS) * half))

    def contains(self, points):
        """Whether points (shape (..., 2)) lie inside the domain"""
        points = float_array(points, name="points")
        shape = points.shape[:-1]
        flat = points.reshape(-1, 2)
        xs, ys = self._polyline
        px = np.ascontiguousarray(flat[:, 0])
        py = np.ascontiguousarray(flat[:, 1])
        inside = _points_inside(xs, ys, px, py)
        return inside.reshape(shape)

    def scaled(self, factor):
        return BoundaryCurve(self.spec.scaled(factor), self.resolution)

    def to_frame(self, n=None):
        """Sampled (s, x, y, kappa) table as a pandas DataFrame"""
        import pandas as pd

        if n is None:
            n = 4 * self.resolution
        sample = self.sample(n)
        return pd.DataFrame(
            {
                "s": sample.s,
                "x": sample.r.real,
                "y": sample.r.imag,
                "kappa": sample.kappa,
            }
        )


class BoundarySample:
    """Boundary data at points equally spaced in arclength.

    Positions and vectors are stored as complex numbers x + iy.
    """

    __slots__ = "s", "t", "r", "tangent", "normal", "kappa", "perimeter"

    def __init__(self, s, t, r, tangent, normal, kappa, perimeter):
        self.s = s
        self.t = t
        self.r = r
        self.tangent = tangent
        self.normal = normal
        self.kappa = kappa
        self.perimeter = perimeter

    def __len__(self):
        return self.s.size

    @property
    def ds(self):
        return self.perimeter / self.s.size


def _as_xy(z):
    return np.stack([np.real(z), np.imag(z)], axis=-1)


def build_curve(spec, resolution=256):
    """Build a BoundaryCurve from a curve spec.

    ``spec`` may be a ConformalMapSpec, DiskSpec or EllipseSpec, a positive number (disk
    radius) or a pair of numbers (ellipse semi-axes).
    """
    if isinstance(spec, (ConformalMapSpec, DiskSpec, EllipseSpec)):
        pass
    elif isinstance(spec, numbers.Real):
        spec = DiskSpec(float(spec))
    elif isinstance(spec, (tuple, list)) and len(spec) == 2:
        spec = EllipseSpec(float(spec[0]), float(spec[1]))
    else:
        raise TypeError(
            "spec must be a ConformalMapSpec, DiskSpec, EllipseSpec, a disk radius, "
            f"or a pair of ellipse semi-axes; got {type(spec).__name__}"
        )
    return BoundaryCurve(spec, resolution)


def point_data(curve, s):
    return curve.point_data(s)


def geometric_invariants(curve):
    """Perimeter L and area A of the curve"""
    return curve.perimeter, curve.area


def total_curvature(curve):
    """Integral of the curvature over the boundary (2 pi for a simple closed curve)"""
    return curve.total_curvature()
