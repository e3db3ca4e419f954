import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np


def float_array(array, *, name="array", ndim=None, copy=False):
    """Coerce ``array`` to a float64 numpy array, checking dimensionality"""
    if isinstance(array, np.ndarray) and np.iscomplexobj(array):
        raise ValueError(f"{name} must be real, not {array.dtype.name}")
    array = np.array(array, np.float64) if copy else np.asarray(array, np.float64)
    if ndim is not None and array.ndim != ndim:
        raise ValueError(f"{name} must be {ndim}-dimensional; got shape {array.shape}")
    if array.size and not np.all(np.isfinite(array)):
        raise ValueError(f"{name} must be finite")
    return array


def num_workers():
    """Number of worker threads for parallel maps (see ``bicount.init``)"""
    import bicount

    params = bicount._init_params
    if params is None:
        bicount._auto_init()
        params = bicount._init_params
    return params["workers"]


def parallel_map(func, items):
    """Apply ``func`` to each item, preserving order.

    numpy and scipy release the GIL inside LAPACK and the special functions, so a
    thread pool gives real concurrency for the kernel and SVD work.
    """
    items = list(items)
    workers = num_workers()
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as executor:
        return list(executor.map(func, items))


def default_workers():
    value = os.environ.get("BICOUNT_NUM_WORKERS")
    if value is None:
        return os.cpu_count() or 1
    try:
        workers = int(value)
    except ValueError:
        raise ValueError(f"BICOUNT_NUM_WORKERS must be an integer, not {value!r}") from None
    if workers < 1:
        raise ValueError(f"BICOUNT_NUM_WORKERS must be positive, not {workers}")
    return workers


def wrap(s, period):
    """Map values into [0, period)"""
    s = np.mod(s, period)
    # np.mod can round up to exactly `period`
    return np.where(s >= period, s - period, s)


def trig_upsample(samples, factor):
    """Evaluate the trigonometric interpolant of periodic samples on a finer uniform grid"""
    samples = np.asarray(samples, np.float64)
    n = samples.size
    m = n * factor
    coeffs = np.fft.rfft(samples)
    if n % 2 == 0:
        # split the Nyquist term so the interpolant stays real and symmetric
        coeffs = coeffs.copy()
        coeffs[-1] *= 0.5
    padded = np.zeros(m // 2 + 1, np.complex128)
    padded[: coeffs.size] = coeffs
    return np.fft.irfft(padded, m) * factor


def spectral_derivative(samples, period):
    """Derivative of periodic samples on a uniform grid via the trigonometric interpolant"""
    samples = np.asarray(samples, np.float64)
    n = samples.size
    coeffs = np.fft.rfft(samples)
    wavenumbers = 2 * np.pi / period * np.arange(coeffs.size)
    if n % 2 == 0:
        wavenumbers[-1] = 0.0
    return np.fft.irfft(1j * wavenumbers * coeffs, n)


class TrigInterpolant:
    """Callable trigonometric interpolant of real periodic samples on [0, period)"""

    __slots__ = "period", "_coeffs", "_modes", "_n"

    def __init__(self, samples, period):
        samples = np.asarray(samples, np.float64)
        n = samples.size
        coeffs = np.fft.rfft(samples) / n
        weights = np.full(coeffs.size, 2.0)
        weights[0] = 1.0
        if n % 2 == 0:
            weights[-1] = 1.0
        self._coeffs = coeffs * weights
        self._modes = np.arange(coeffs.size)
        self._n = n
        self.period = float(period)

    def __call__(self, s):
        s = np.asarray(s, np.float64)
        phase = np.multiply.outer(s, 2 * np.pi * self._modes / self.period)
        return (np.exp(1j * phase) @ self._coeffs).real
