import math

import numpy as np
import pytest
from bicount.utils import (
    TrigInterpolant,
    default_workers,
    float_array,
    parallel_map,
    spectral_derivative,
    trig_upsample,
    wrap,
)


def test_float_array():
    array = float_array([1, 2, 3], name="k", ndim=1)
    assert array.dtype == np.float64
    with pytest.raises(ValueError, match="k must be 1-dimensional"):
        float_array([[1.0]], name="k", ndim=1)
    with pytest.raises(ValueError, match="finite"):
        float_array([1.0, np.nan])
    with pytest.raises(ValueError, match="real"):
        float_array(np.array([1j]))
    source = np.ones(3)
    assert float_array(source) is source
    assert float_array(source, copy=True) is not source


def test_wrap():
    expected = [2 * math.pi - 1, 0.0, 7 - 2 * math.pi]
    np.testing.assert_allclose(wrap([-1.0, 0.0, 7.0], 2 * math.pi), expected)
    assert wrap(-1e-18, 1.0) < 1.0


def test_trigonometric_helpers():
    n = 32
    s = np.arange(n) * (2 * math.pi / n)
    u = np.cos(3 * s) + 0.5 * np.sin(5 * s)
    fine = trig_upsample(u, 4)
    t = np.arange(4 * n) * (2 * math.pi / (4 * n))
    np.testing.assert_allclose(fine, np.cos(3 * t) + 0.5 * np.sin(5 * t), atol=1e-12)
    np.testing.assert_allclose(
        spectral_derivative(u, 2 * math.pi), -3 * np.sin(3 * s) + 2.5 * np.cos(5 * s), atol=1e-11
    )
    interp = TrigInterpolant(u, 2 * math.pi)
    np.testing.assert_allclose(interp([0.1, 2.0]), np.cos([0.3, 6.0]) + 0.5 * np.sin([0.5, 10.0]))


def test_parallel_map():
    assert parallel_map(lambda x: x * x, range(20)) == [x * x for x in range(20)]
    assert parallel_map(str, []) == []


def test_default_workers(monkeypatch):
    monkeypatch.setenv("BICOUNT_NUM_WORKERS", "3")
    assert default_workers() == 3
    monkeypatch.setenv("BICOUNT_NUM_WORKERS", "many")
    with pytest.raises(ValueError, match="integer"):
        default_workers()
    monkeypatch.setenv("BICOUNT_NUM_WORKERS", "0")
    with pytest.raises(ValueError, match="positive"):
        default_workers()
    monkeypatch.delenv("BICOUNT_NUM_WORKERS")
    assert default_workers() >= 1
