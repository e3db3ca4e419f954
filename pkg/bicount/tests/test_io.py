import math

import numpy as np
import pytest
from bicount import io
from bicount.bim import EigenMode, Spectrum
from bicount.config import SolverSection
from bicount.nodal import BICountSequence
from bicount.orbits import PeriodicOrbit
from bicount.trace import LengthSpectrum


def test_checksum_and_json(tmp_path):
    path = io.write_json(tmp_path / "a.json", {"b": [1, 2], "a": None})
    assert io.read_json(path) == {"a": None, "b": [1, 2]}
    digest = io.checksum(path)
    assert len(digest) == 64
    path.write_text(path.read_text() + " ")
    assert io.checksum(path) != digest


def test_spectrum_files(disk, tmp_path):
    modes = [
        EigenMode(2.5, np.cos(np.arange(64)), 1e-9, disk.perimeter),
        EigenMode(3.75, np.sin(np.arange(96) / 3), 2e-9, disk.perimeter),
    ]
    spectrum = Spectrum(modes, disk, 4.0)
    files = io.write_spectrum(spectrum, tmp_path)
    assert [path.name for path in files] == ["spectrum.csv", "modes.npz"]
    back = io.read_spectrum(tmp_path, disk)
    assert back.k_max == 4.0
    np.testing.assert_array_equal(back.k, spectrum.k)
    for a, b in zip(back, spectrum):
        assert a.n == b.n
        np.testing.assert_array_equal(a.u, b.u)


def test_window_cache(disk, tmp_path):
    settings = SolverSection(k_max=10.0)
    modes = [EigenMode(2.4, np.ones(64), 1e-9, disk.perimeter)]
    io.save_window(tmp_path, 3, (2.0, 3.0), disk, settings, modes)
    loaded = io.load_window(tmp_path, 3, (2.0, 3.0), disk, settings)
    assert [mode.k for mode in loaded] == [2.4]
    # k_max does not change how a window is solved
    assert io.load_window(tmp_path, 3, (2.0, 3.0), disk, SolverSection(k_max=20.0)) is not None
    finer = SolverSection(k_max=10.0, points_per_wavelength=10)
    assert io.load_window(tmp_path, 3, (2.0, 3.0), disk, finer) is None
    assert io.load_window(tmp_path, 4, (3.0, 4.0), disk, settings) is None


def test_counts_file(tmp_path):
    seq = BICountSequence(
        [1, 2, 3], [2.0, 3.25, 3.5], [0, 2, 4], eta_gamma=[0, 0, 2], area=math.pi, perimeter=6.0
    )
    path = io.write_counts(seq, tmp_path / "counts.csv")
    assert path.read_text().splitlines()[0] == "n,k,eta,eta_gamma,q"
    back = io.read_counts(path, math.pi, 6.0, gamma="0:0.5")
    np.testing.assert_array_equal(back.eta, seq.eta)
    np.testing.assert_array_equal(back.eta_gamma, seq.eta_gamma)
    np.testing.assert_array_equal(back.k, seq.k)
    assert back.gamma.measure == pytest.approx(3.0)


def test_orbits_file(ellipse, tmp_path):
    L = ellipse.perimeter
    major = PeriodicOrbit.from_bounces(ellipse, [0.0, L / 2], id=1, flags={"self_retracing"})
    path = io.write_orbits([major], tmp_path / "orbits.csv")
    frame = io.orbit_frame([major])
    assert frame.loc[0, "flags"] == "self_retracing"
    assert frame.loc[0, "psi_deg"] == "90 90"
    (back,) = io.read_orbits(path, ellipse)
    assert back.id == 1
    assert back.is_self_retracing
    assert back.length == pytest.approx(major.length, rel=1e-14)
    np.testing.assert_allclose(back.monodromy, major.monodromy, rtol=1e-10)


def test_length_spectrum_file(tmp_path):
    x = np.linspace(0, 2, 5)
    spectrum = LengthSpectrum(x, np.exp(1j * x) / 3, "numerical")
    path = io.write_length_spectrum(spectrum, tmp_path / "spectra" / "numerical.csv")
    back = io.read_length_spectrum(path, "numerical")
    np.testing.assert_array_equal(back.values, spectrum.values)
    np.testing.assert_array_equal(back.x, x)


def test_write_columns(tmp_path):
    path = io.write_columns(tmp_path / "deep" / "cols.dat", [[1.0, 2.0], [3.0, 4.0]], ["a", "b"])
    assert path.read_text().splitlines()[0] == "# a b"
    np.testing.assert_array_equal(np.loadtxt(path), [[1.0, 3.0], [2.0, 4.0]])
