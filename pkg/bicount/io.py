"""Line-oriented persistence: CSV tables, npz sample blocks and checksums.

Floats are written with 17 significant digits so that records round-trip exactly.
"""
import hashlib
import json
import logging
from pathlib import Path

import numpy as np

from .bim import EigenMode, Spectrum
from .nodal import BICountSequence, BoundarySubset
from .trace import LengthSpectrum

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def checksum(path):
    """sha256 of a file's bytes"""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def write_json(path, data):
    path = Path(path)
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=str) + "\n")
    return path


def read_json(path):
    return json.loads(Path(path).read_text())


def write_table(frame, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    return path


def _pack_modes(modes):
    u = [mode.u for mode in modes]
    offsets = np.cumsum([0] + [x.size for x in u])
    return {
        "k": np.array([mode.k for mode in modes], np.float64),
        "sigma_min": np.array([mode.sigma_min for mode in modes], np.float64),
        "offsets": offsets.astype(np.int64),
        "u": np.concatenate(u) if u else np.empty(0),
    }


def _unpack_modes(data, perimeter):
    modes = []
    offsets = data["offsets"]
    for i, (k, sigma) in enumerate(zip(data["k"], data["sigma_min"])):
        u = data["u"][offsets[i] : offsets[i + 1]]
        modes.append(EigenMode(k, u, sigma, perimeter))
    return modes


def _window_key(window, curve, config):
    text = json.dumps(
        {
            "window": [float(window[0]), float(window[1])],
            "curve": repr(curve.spec),
            "resolution": curve.resolution,
            "settings": {k: v for k, v in config.model_dump().items() if k != "k_max"},
        },
        sort_keys=True,
    )
    return hashlib.sha256(text.encode()).hexdigest()


def _window_path(cache_dir, index):
    return Path(cache_dir) / f"window-{index:05d}.npz"


def save_window(cache_dir, index, window, curve, config, modes):
    """Store the modes found in one k-window together with the settings that produced them"""
    path = _window_path(cache_dir, index)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, key=np.array(_window_key(window, curve, config)), **_pack_modes(modes))
    return path


def load_window(cache_dir, index, window, curve, config):
    """Modes of a cached window, or None when absent or produced with other settings"""
    path = _window_path(cache_dir, index)
    if not path.exists():
        return None
    with np.load(path) as data:
        if str(data["key"]) != _window_key(window, curve, config):
            logger.info("cached window %s is stale; recomputing", path.name)
            return None
        return _unpack_modes(data, curve.perimeter)


def spectrum_frame(spectrum):
    import pandas as pd

    return pd.DataFrame(
        {
            "n": [mode.n for mode in spectrum],
            "k": spectrum.k,
            "sigma_min": [mode.sigma_min for mode in spectrum],
            "N": [mode.N for mode in spectrum],
        }
    )


def write_spectrum(spectrum, directory):
    """``spectrum.csv`` (n, k, sigma_min, N) plus ``modes.npz`` with the boundary functions"""
    directory = Path(directory)
    table = write_table(spectrum_frame(spectrum), directory / "spectrum.csv")
    samples = directory / "modes.npz"
    np.savez(samples, k_max=np.array(spectrum.k_max), **_pack_modes(spectrum.modes))
    return [table, samples]


def read_spectrum(path, curve):
    """Spectrum from a solve directory or its ``modes.npz``"""
    path = Path(path)
    if path.is_dir():
        path = path / "modes.npz"
    with np.load(path) as data:
        modes = _unpack_modes(data, curve.perimeter)
        k_max = float(data["k_max"])
    return Spectrum(modes, curve, k_max)


def counts_frame(seq):
    frame = seq.to_frame()
    frame["q"] = seq.q
    return frame


def write_counts(seq, path):
    return write_table(counts_frame(seq), path)


def read_counts(path, area, perimeter, gamma=None):
    import pandas as pd

    frame = pd.read_csv(path, float_precision="round_trip")
    eta_gamma = frame["eta_gamma"].to_numpy() if "eta_gamma" in frame else None
    if isinstance(gamma, str):
        gamma = BoundarySubset.parse(gamma, perimeter)
    return BICountSequence(
        frame["n"].to_numpy(),
        frame["k"].to_numpy(),
        frame["eta"].to_numpy(),
        area=area,
        perimeter=perimeter,
        eta_gamma=eta_gamma,
        gamma=gamma,
    )


def _join(values, fmt="%.17g"):
    return " ".join(fmt % v for v in values)


def orbit_frame(orbits):
    import pandas as pd

    return pd.DataFrame(
        {
            "id": [orbit.id for orbit in orbits],
            "n_bounces": [orbit.n_bounces for orbit in orbits],
            "length": [orbit.length for orbit in orbits],
            "trace": [orbit.trace for orbit in orbits],
            "conjugate_points": [orbit.conjugate_points for orbit in orbits],
            "maslov": [orbit.maslov for orbit in orbits],
            "phi": [orbit.phi for orbit in orbits],
            "weight": [orbit.weight for orbit in orbits],
            "flags": [" ".join(sorted(orbit.flags)) for orbit in orbits],
            "s": [_join(orbit.s) for orbit in orbits],
            "psi_deg": [_join(np.degrees(orbit.psi), "%.10g") for orbit in orbits],
        }
    )


def write_orbits(orbits, path):
    return write_table(orbit_frame(orbits), path)


def read_orbits(path, curve):
    """Rebuild PeriodicOrbits from their bounce positions"""
    import pandas as pd

    from .orbits import PeriodicOrbit

    frame = pd.read_csv(path, keep_default_na=False, float_precision="round_trip")
    orbits = []
    for row in frame.itertuples(index=False):
        s = np.array(row.s.split(), np.float64)
        flags = row.flags.split() if row.flags else ()
        orbit = PeriodicOrbit.from_bounces(curve, s, id=int(row.id), flags=flags, strict=False)
        orbits.append(orbit)
    return orbits


def write_curve_table(curve, path, n=None):
    return write_table(curve.to_frame(n), path)


def write_length_spectrum(spectrum, path):
    return write_table(spectrum.to_frame(), path)


def read_length_spectrum(path, provenance, window=None):
    import pandas as pd

    frame = pd.read_csv(path, float_precision="round_trip")
    values = frame["re"].to_numpy() + 1j * frame["im"].to_numpy()
    return LengthSpectrum(frame["x"].to_numpy(), values, provenance, window)


def write_columns(path, columns, header):
    """Whitespace-separated column file with a ``#`` header line"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, np.column_stack(columns), fmt="%.10g", header=" ".join(header))
    return path
