"""Stage-by-stage pipeline with an on-disk cache and a checksummed manifest.

Stages and their inputs:

    solve         curve, solver
    count         count     + solve
    orbits        curve, orbits, run (seed)
    spectrum      spectrum  + count, orbits
    validate-rwm  rwm       + solve
    compare       spectrum

A stage's hash covers its own sections and the hashes of the stages it reads, so a
changed parameter invalidates that stage and everything downstream of it.
Stages passed as ``inputs`` (solve, count, orbits) are read from the given file instead
and hash to the file's checksum.
"""
import hashlib
import logging
import time
from collections import namedtuple
from pathlib import Path

import numpy as np
from scipy import signal

from . import io
from .bim import solve_spectrum
from .exceptions import BicountException, ConfigError, StageError, ValidationFailure
from .nodal import (
    BoundarySubset,
    GaussianWindow,
    count_sequence,
    smoothed_density,
    windowed_fluctuation,
)
from .orbits import find_all_orbits
from .recorder import Recorder, record_stage
from .rwm import (
    RiceReport,
    format_report,
    rice_consistency,
    smooth_part_check,
    spectral_window,
)
from .trace import (
    TraceFormulaInput,
    numerical_length_spectrum,
    semiclassical_length_spectrum,
    smooth_density,
)

logger = logging.getLogger(__name__)

STAGES = {
    "solve": (("curve", "solver"), ()),
    "count": (("count",), ("solve",)),
    "orbits": (("curve", "orbits", "run"), ()),
    "spectrum": (("spectrum",), ("count", "orbits")),
    "validate-rwm": (("rwm",), ("solve",)),
    "compare": ((), ("spectrum",)),
}
PIPELINE = ("solve", "count", "orbits", "spectrum", "compare")
# stages whose result can be read from a file given on the command line
INPUT_STAGES = ("solve", "count", "orbits")
RICE_TOLERANCE = 0.05

ComparisonReport = namedtuple(
    "ComparisonReport",
    ["table", "unmatched_numerical", "background", "calibration", "tolerance", "threshold"],
)


def peak_tolerance(window):
    """Allowed peak-position deviation, max(0.05, 2 / sigma)"""
    if window is None:
        return 0.05
    return max(0.05, 2 / window.sigma)


def height_near(spectrum, x, tolerance):
    """Largest |f^| within ``tolerance`` of ``x``"""
    near = np.abs(spectrum.x - x) <= tolerance
    if not near.any():
        return float("nan")
    return float(spectrum.magnitude[near].max())


def _labels(orbits, positions, tolerance):
    if orbits is None:
        return [""] * len(positions)
    contributions = orbits.contributions()
    labels = []
    for x in positions:
        near = [
            (abs(length - x), f"{term.id}" if r == 1 else f"{term.id}^{r}")
            for term, r, _, length, _ in contributions
            if abs(length - x) <= tolerance
        ]
        labels.append(" ".join(label for _, label in sorted(near)))
    return labels


def background_level(spectrum, peak_positions, tolerance):
    """Median |f^| away from the given peaks and from the x = 0 residue"""
    keep = spectrum.x > 2 * tolerance
    for x in peak_positions:
        keep &= np.abs(spectrum.x - x) > 2 * tolerance
    if not keep.any():
        return float("nan")
    return float(np.median(spectrum.magnitude[keep]))


def compare_report(numerical, semiclassical, *, threshold=None, orbits=None):
    """Match semiclassical peaks against numerical ones on a shared x-grid.

    Every semiclassical peak above ``threshold`` (default: a tenth of the largest) is paired
    with the nearest numerical peak within max(0.05, 2/sigma).  Heights are calibrated by
    one global factor, the numerical/semiclassical ratio of the largest matched peak.
    Numerical peaks above the calibrated threshold with no semiclassical partner are listed
    separately.  ``orbits`` (a TraceFormulaInput) labels peaks with orbit ids.
    """
    import pandas as pd

    if not np.array_equal(numerical.x, semiclassical.x):
        raise ValueError("length spectra must share the same x-grid")
    window = semiclassical.window if semiclassical.window is not None else numerical.window
    tolerance = peak_tolerance(window)
    sc_mag = semiclassical.magnitude
    num_mag = numerical.magnitude
    if threshold is None:
        threshold = 0.1 * float(sc_mag.max()) if sc_mag.size else 0.0
    sc_index, _ = signal.find_peaks(sc_mag, height=threshold)
    num_index, _ = signal.find_peaks(num_mag)
    x = numerical.x
    rows = []
    for i in sc_index:
        row = {
            "x_semiclassical": x[i],
            "height_semiclassical": sc_mag[i],
            "x_numerical": np.nan,
            "height_numerical": np.nan,
            "deviation": np.nan,
            "ratio": np.nan,
        }
        if num_index.size:
            j = num_index[np.argmin(np.abs(x[num_index] - x[i]))]
            if abs(x[j] - x[i]) <= tolerance:
                row.update(
                    x_numerical=x[j],
                    height_numerical=num_mag[j],
                    deviation=x[j] - x[i],
                    ratio=num_mag[j] / sc_mag[i],
                )
        rows.append(row)
    columns = [
        "x_semiclassical",
        "height_semiclassical",
        "x_numerical",
        "height_numerical",
        "deviation",
        "ratio",
    ]
    table = pd.DataFrame(rows, columns=columns)
    table["matched"] = table["ratio"].notna()
    matched = table[table["matched"]]
    if len(matched):
        best = int(np.argmax(matched["height_semiclassical"]))
        calibration = float(matched["ratio"].iloc[best])
    else:
        calibration = float("nan")
    table["calibrated_ratio"] = table["ratio"] / calibration
    table["label"] = _labels(orbits, table["x_semiclassical"], tolerance)
    claimed = set(table["x_numerical"].dropna())
    scale = 1.0 if np.isnan(calibration) else calibration
    extra = [
        (x[j], num_mag[j])
        for j in num_index
        if x[j] not in claimed
        and x[j] > 2 * tolerance
        and num_mag[j] / scale > threshold
        and not np.any(np.abs(x[sc_index] - x[j]) <= tolerance)
    ]
    unmatched = pd.DataFrame(extra, columns=["x", "height"])
    background = background_level(numerical, x[sc_index], tolerance)
    return ComparisonReport(table, unmatched, background, calibration, tolerance, threshold)


def emit_plot_data(spectra, directory, *, report=None, overlays=()):
    """Write plot-ready column files and a declarative ``plot.json``; nothing is rendered.

    ``spectra`` maps names to LengthSpectra; each gets ``<name>.dat`` with columns x and
    |f^|.  ``overlays`` lists tuples of names sharing one grid, written as one multi-column
    file each.  Matched peak positions from ``report`` become vertical markers.
    """
    directory = Path(directory)
    files = []
    figures = []
    for name, spectrum in spectra.items():
        path = io.write_columns(
            directory / f"{name}.dat", [spectrum.x, spectrum.magnitude], ["x", f"abs_{name}"]
        )
        files.append(path)
        figures.append({"file": path.name, "columns": ["x", f"abs_{name}"], "title": name})
    for names in overlays:
        if not all(name in spectra for name in names):
            continue
        first = spectra[names[0]]
        if not all(np.array_equal(spectra[name].x, first.x) for name in names):
            raise ValueError(f"overlay {names} needs a shared x-grid")
        label = "-vs-".join(names)
        header = ["x"] + [f"abs_{name}" for name in names]
        path = io.write_columns(
            directory / f"{label}.dat",
            [first.x] + [spectra[name].magnitude for name in names],
            header,
        )
        files.append(path)
        figures.append(
            {"file": path.name, "columns": header, "title": label, "overlay_order": list(names)}
        )
    markers = []
    if report is not None:
        table = report.table
        markers = [float(v) for v in table.loc[table["matched"], "x_semiclassical"]]
    plot = {
        "xlabel": "x (length)",
        "ylabel": "|f^(x)|",
        "figures": figures,
        "markers": markers,
        "background": None if report is None else report.background,
    }
    files.append(io.write_json(directory / "plot.json", plot))
    return files


def default_window(seq):
    """Window centered on the unfolded range with sigma = range / 6"""
    q = seq.q
    return GaussianWindow.centered(float(q[0]), float(q[-1]))


class Pipeline:
    """Runs stages for one RunConfig, reusing outputs whose stage hash is unchanged"""

    def __init__(self, config, *, force=False, inputs=None):
        self.config = config
        self.inputs = {stage: Path(path) for stage, path in (inputs or {}).items()}
        for stage in self.inputs:
            if stage not in INPUT_STAGES:
                raise ConfigError(f"stage {stage!r} cannot be read from a file")
        self.output_dir = Path(config.output_dir)
        self.force = force
        self.recorder = Recorder()
        self._results = {}
        self._hashes = {}
        self._curve = None
        self._previous = {}
        manifest = self.output_dir / "manifest.json"
        if manifest.exists() and not force:
            self._previous = io.read_json(manifest).get("stages", {})

    @property
    def curve(self):
        if self._curve is None:
            self._curve = self.config.curve.build()
        return self._curve

    def stage_hash(self, stage):
        if stage not in self._hashes:
            if stage in self.inputs:
                parts = [stage, "file", io.checksum(self._input_file(stage))]
            else:
                sections, upstream = STAGES[stage]
                parts = [stage]
                parts.extend(self.config.section_hash(name) for name in sections)
                parts.extend(self.stage_hash(name) for name in upstream)
            self._hashes[stage] = hashlib.sha256("|".join(parts).encode()).hexdigest()
        return self._hashes[stage]

    def _input_file(self, stage):
        path = self.inputs[stage]
        if path.is_dir():
            path = path / "modes.npz"
        if not path.is_file():
            raise ConfigError(f"{stage} input {path} does not exist")
        return path

    def _read_input(self, stage):
        path = self._input_file(stage)
        logger.info("stage %s: reading %s", stage, path)
        curve = self.curve
        try:
            if stage == "solve":
                return io.read_spectrum(path, curve)
            if stage == "count":
                return io.read_counts(path, curve.area, curve.perimeter, gamma=self.gamma)
            return io.read_orbits(path, curve)
        except (KeyError, ValueError, OSError) as exc:
            raise StageError(stage, ConfigError(f"cannot read {path}: {exc}")) from exc

    def _is_cached(self, stage):
        entry = self._previous.get(stage)
        if self.force or entry is None or entry.get("hash") != self.stage_hash(stage):
            return False
        for name, digest in entry.get("outputs", {}).items():
            path = self.output_dir / name
            if not path.exists() or io.checksum(path) != digest:
                return False
        return True

    def result(self, stage):
        """Output of ``stage``, computing it and its inputs as needed"""
        if stage in self._results:
            return self._results[stage]
        if stage in self.inputs:
            self._results[stage] = self._read_input(stage)
            return self._results[stage]
        for name in STAGES[stage][1]:
            self.result(name)
        cached = self._is_cached(stage)
        start = time.perf_counter()
        try:
            if cached:
                logger.info("stage %s: cache hit", stage)
                value = getattr(self, f"_load_{stage.replace('-', '_')}")()
                outputs = [self.output_dir / name for name in self._previous[stage]["outputs"]]
            else:
                logger.info("stage %s: computing", stage)
                value, outputs = getattr(self, f"_run_{stage.replace('-', '_')}")()
        except BicountException as exc:
            raise StageError(stage, exc) from exc
        except (ValueError, TypeError) as exc:
            raise StageError(stage, exc) from exc
        seconds = time.perf_counter() - start
        event = dict(cache_hit=cached, seconds=seconds, outputs=outputs)
        self.recorder.record(stage, self.stage_hash(stage), **event)
        record_stage(stage, self.stage_hash(stage), **event)
        self._results[stage] = value
        self._previous[stage] = self._entry(stage, outputs)
        self.write_manifest()
        return value

    def _entry(self, stage, outputs):
        return {
            "hash": self.stage_hash(stage),
            "outputs": {
                str(Path(path).relative_to(self.output_dir)): io.checksum(path) for path in outputs
            },
        }

    def manifest(self):
        events = {event.stage: event for event in self.recorder}
        stages = {}
        for stage, entry in self._previous.items():
            stages[stage] = dict(entry)
            if stage in events:
                stages[stage]["cache_hit"] = events[stage].cache_hit
                stages[stage]["seconds"] = round(events[stage].seconds, 6)
        return {
            "name": self.config.name,
            "config_hash": self.config.config_hash(),
            "config": self.config.model_dump(mode="json"),
            "stages": stages,
            "recomputed": self.recorder.recomputed,
            "inputs": {stage: str(path) for stage, path in self.inputs.items()},
        }

    def write_manifest(self):
        self.output_dir.mkdir(parents=True, exist_ok=True)
        return io.write_json(self.output_dir / "manifest.json", self.manifest())

    def run(self, stages=PIPELINE):
        for stage in stages:
            self.result(stage)
        return self.manifest()

    # solve
    def _run_solve(self):
        directory = self.output_dir / "solve"
        spectrum = solve_spectrum(
            self.curve,
            self.config.solver.k_max,
            self.config.solver,
            cache_dir=self.output_dir / "cache" / "windows",
        )
        outputs = io.write_spectrum(spectrum, directory)
        outputs.append(io.write_curve_table(self.curve, directory / "curve.csv"))
        return spectrum, outputs

    def _load_solve(self):
        return io.read_spectrum(self.output_dir / "solve", self.curve)

    # count
    @property
    def gamma(self):
        text = self.config.count.gamma
        if text is None:
            return None
        return BoundarySubset.parse(text, self.curve.perimeter)

    def _run_count(self):
        seq = count_sequence(
            self.result("solve"), self.gamma, tolerance=self.config.count.tolerance
        )
        return seq, [io.write_counts(seq, self.output_dir / "counts.csv")]

    def _load_count(self):
        curve = self.curve
        return io.read_counts(
            self.output_dir / "counts.csv", curve.area, curve.perimeter, gamma=self.gamma
        )

    # orbits
    def _run_orbits(self):
        section = self.config.orbits
        orbits = find_all_orbits(
            self.curve,
            section.max_bounces,
            seed=self.config.seed,
            n_random=section.starts,
            n_offsets=section.offsets,
            tol=section.tol,
        )
        return orbits, [io.write_orbits(orbits, self.output_dir / "orbits.csv")]

    def _load_orbits(self):
        return io.read_orbits(self.output_dir / "orbits.csv", self.curve)

    # spectrum
    def window(self):
        section = self.config.spectrum
        if section.q0 is not None:
            return GaussianWindow(section.q0, section.sigma)
        return default_window(self.result("count"))

    def trace_input(self):
        return TraceFormulaInput.from_orbits(
            self.curve,
            self.result("orbits"),
            r_max=self.config.spectrum.r_max,
            window=self.window(),
        )

    def _spectrum_pair(self, seq, inp, counts=None, smooth=None):
        section = self.config.spectrum
        density = smoothed_density(seq, "q", section.width, counts=counts)
        fluct = windowed_fluctuation(density, smooth, inp.window, margin=section.margin)
        numerical = numerical_length_spectrum(fluct, x_max=section.x_max)
        semiclassical = semiclassical_length_spectrum(inp, numerical.x, mode=section.mode)
        return fluct, numerical, semiclassical

    def _run_spectrum(self):
        seq = self.result("count")
        curve = self.curve
        inp = self.trace_input()
        if self.config.spectrum.smooth == "weyl":
            smooth = lambda q: smooth_density(q, curve.perimeter, curve.area)  # noqa: E731
        else:
            smooth = "fit"
        fluct, numerical, semiclassical = self._spectrum_pair(seq, inp, smooth=smooth)
        spectra = {"numerical": numerical, "semiclassical": semiclassical}
        directory = self.output_dir / "spectrum"
        outputs = [
            io.write_columns(directory / "fluctuation.dat", [fluct.q, fluct.f], ["q", "f"])
        ]
        gamma = self.gamma
        if gamma is not None:
            # the partial counts have their own smooth part; fit it under the window
            _, partial, partial_sc = self._spectrum_pair(
                seq, inp.restricted(gamma), counts=seq.eta_gamma, smooth="fit"
            )
            spectra["numerical-gamma"] = partial
            spectra["semiclassical-gamma"] = partial_sc
        for name, spectrum in spectra.items():
            outputs.append(io.write_length_spectrum(spectrum, directory / f"{name}.csv"))
        return spectra, outputs

    def _load_spectrum(self):
        directory = self.output_dir / "spectrum"
        window = self.window()
        spectra = {}
        for name in ("numerical", "semiclassical", "numerical-gamma", "semiclassical-gamma"):
            path = directory / f"{name}.csv"
            if path.exists():
                provenance = name.split("-")[0]
                spectra[name] = io.read_length_spectrum(path, provenance, window)
        return spectra

    # validate-rwm
    def _run_validate_rwm(self):
        section = self.config.rwm
        spectrum = self.result("solve")
        center = section.center if section.center is not None else 0.75 * spectrum.k_max
        window = spectral_window(
            spectrum, center, c=section.c, min_modes=section.min_modes, widen=True
        )
        report = rice_consistency(window)
        smooth = smooth_part_check(window, self.curve, bins=section.bins)
        text = format_report(report, smooth)
        directory = self.output_dir / "rwm"
        directory.mkdir(parents=True, exist_ok=True)
        path = directory / "report.txt"
        path.write_text(text)
        summary = io.write_json(directory / "report.json", report._asdict())
        if not abs(report.relative_deviation) <= RICE_TOLERANCE:
            raise ValidationFailure(
                f"Rice density deviates from the counted mean by "
                f"{100 * report.relative_deviation:+.2f}% (allowed {100 * RICE_TOLERANCE:.0f}%)"
            )
        return report, [path, summary]

    def _load_validate_rwm(self):
        return RiceReport(**io.read_json(self.output_dir / "rwm" / "report.json"))

    # compare
    def _compare_reports(self):
        spectra = self.result("spectrum")
        inp = self.trace_input()
        reports = {
            "full": compare_report(spectra["numerical"], spectra["semiclassical"], orbits=inp)
        }
        overlays = [("numerical", "semiclassical")]
        if "numerical-gamma" in spectra:
            reports["gamma"] = compare_report(
                spectra["numerical-gamma"],
                spectra["semiclassical-gamma"],
                threshold=reports["full"].threshold,
                orbits=inp,
            )
            overlays.extend(
                [("numerical-gamma", "semiclassical-gamma"), ("numerical", "numerical-gamma")]
            )
        return spectra, reports, overlays

    def _run_compare(self):
        spectra, reports, overlays = self._compare_reports()
        directory = self.output_dir / "compare"
        outputs = []
        for name, report in reports.items():
            outputs.append(io.write_table(report.table, directory / f"peaks-{name}.csv"))
            outputs.append(
                io.write_table(report.unmatched_numerical, directory / f"unmatched-{name}.csv")
            )
        outputs.extend(
            emit_plot_data(spectra, directory / "plot", report=reports["full"], overlays=overlays)
        )
        return reports, outputs

    def _load_compare(self):
        return self._compare_reports()[1]


def run_pipeline(config, *, stages=PIPELINE, force=False, inputs=None):
    """Run ``stages`` (and what they depend on) and return the run manifest"""
    pipeline = Pipeline(config, force=force, inputs=inputs)
    manifest = pipeline.run(stages)
    logger.info(
        "run %s finished; recomputed: %s",
        config.name,
        ", ".join(manifest["recomputed"]) or "nothing",
    )
    return manifest
