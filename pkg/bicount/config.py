"""Run configuration: pydantic sections read from INI files or named presets."""
import configparser
import hashlib
import json
import logging
import math
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .exceptions import ConfigError
from .geometry import ConformalMapSpec, DiskSpec, EllipseSpec, build_curve

logger = logging.getLogger(__name__)

SECTIONS = ("curve", "solver", "count", "orbits", "spectrum", "rwm", "run")


class _Section(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    def digest(self):
        text = json.dumps(self.model_dump(mode="json"), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()


class CurveSection(_Section):
    family: Literal["disk", "ellipse", "conformal"] = "conformal"
    radius: float = Field(1.0, gt=0)
    major: float = Field(2.0, gt=0)
    minor: float = Field(1.0, gt=0)
    a: float = 0.2
    b: float = 0.2
    delta: float = math.pi / 3
    scale: float = Field(1.0, gt=0)
    resolution: int = Field(256, ge=64)

    def spec(self):
        if self.family == "disk":
            return DiskSpec(self.radius)
        if self.family == "ellipse":
            return EllipseSpec(self.major, self.minor)
        return ConformalMapSpec(self.a, self.b, self.delta, self.scale)

    def build(self):
        return build_curve(self.spec(), self.resolution)


class SolverSection(_Section):
    k_max: float = Field(gt=0)
    points_per_wavelength: int = Field(8, ge=6)
    sweep_step_factor: float = Field(0.2, gt=0, le=0.25)
    window_width: float = Field(1.0, gt=0)
    sigma_tol: float = Field(1e-5, gt=0)
    candidate_cutoff: float = Field(0.5, gt=0)
    degeneracy_tol: float = Field(1e-6, gt=0)
    weyl_check: bool = True


class CountSection(_Section):
    tolerance: float = Field(1e-6, gt=0, lt=1)
    gamma: Optional[str] = None


class OrbitSection(_Section):
    max_bounces: int = Field(4, ge=2)
    starts: Optional[int] = Field(None, ge=1)
    offsets: int = Field(8, ge=1)
    tol: float = Field(1e-11, gt=0)


class SpectrumSection(_Section):
    q0: Optional[float] = Field(None, gt=0)
    sigma: Optional[float] = Field(None, gt=0)
    r_max: int = Field(3, ge=1)
    x_max: float = Field(8.0, gt=0)
    smooth: Literal["weyl", "fit"] = "weyl"
    mode: Literal["analytic", "quadrature"] = "analytic"
    margin: float = Field(3.0, ge=0)
    width: Optional[float] = Field(None, gt=0)

    @model_validator(mode="after")
    def _window_pair(self):
        if (self.q0 is None) != (self.sigma is None):
            raise ValueError("q0 and sigma must be given together")
        return self


class RwmSection(_Section):
    center: Optional[float] = Field(None, gt=0)
    c: float = Field(2.0, gt=0)
    min_modes: int = Field(30, ge=2)
    bins: int = Field(32, ge=4)


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str = "run"
    curve: CurveSection = CurveSection()
    solver: SolverSection
    count: CountSection = CountSection()
    orbits: OrbitSection = OrbitSection()
    spectrum: SpectrumSection = SpectrumSection()
    rwm: RwmSection = RwmSection()
    output_dir: Path = Path("bicount-out")
    seed: int = 0

    def section_hash(self, name):
        """sha256 of one section, or of the run-level fields for ``"run"``"""
        if name == "run":
            text = json.dumps({"seed": self.seed}, sort_keys=True)
            return hashlib.sha256(text.encode()).hexdigest()
        if name not in SECTIONS:
            raise ValueError(f"unknown section: {name!r}")
        return getattr(self, name).digest()

    def config_hash(self):
        text = "".join(self.section_hash(name) for name in SECTIONS)
        return hashlib.sha256(text.encode()).hexdigest()

    def updated(self, **sections):
        """Copy with fields of the named sections replaced, e.g. ``solver={"k_max": 12}``"""
        data = self.model_dump()
        for key, value in sections.items():
            if isinstance(value, dict):
                data[key] = {**data[key], **value}
            else:
                data[key] = value
        return _validate(data)


PRESETS = {
    "disk": {
        "name": "disk",
        "curve": {"family": "disk", "radius": 1.0},
        "solver": {"k_max": 10.0},
        "orbits": {"max_bounces": 4},
        "spectrum": {"x_max": 8.0},
    },
    "africa-desk": {
        "name": "africa-desk",
        "curve": {"family": "conformal"},
        "solver": {"k_max": 50.0},
        "orbits": {"max_bounces": 4},
        "spectrum": {"q0": 26.0, "sigma": 7.0, "x_max": 8.0},
        "rwm": {"center": 37.5},
    },
    # the full-scale experiment; far beyond desk runtimes
    "africa-full": {
        "name": "africa-full",
        "curve": {"family": "conformal"},
        "solver": {"k_max": 260.0},
        "orbits": {"max_bounces": 7},
        "spectrum": {"q0": 130.0, "sigma": 40.0, "x_max": 10.0},
        "rwm": {"center": 195.0},
    },
}


def _validate(data):
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"invalid configuration:\n{exc}") from exc


def preset(name, **overrides):
    """RunConfig for a named preset; ``overrides`` are merged section by section"""
    try:
        data = json.loads(json.dumps(PRESETS[name]))
    except KeyError:
        raise ConfigError(
            f"unknown preset {name!r}; choose from {', '.join(sorted(PRESETS))}"
        ) from None
    for key, value in overrides.items():
        if isinstance(value, dict):
            data[key] = {**data.get(key, {}), **value}
        else:
            data[key] = value
    return _validate(data)


def parse_ini(text):
    """Section dict from INI text; the optional ``[run]`` section holds name, preset,
    output_dir and seed."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse configuration: {exc}") from exc
    unknown = set(parser.sections()) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown sections: {', '.join(sorted(unknown))}")
    data = {}
    for name in parser.sections():
        values = {key: _scalar(value) for key, value in parser.items(name)}
        if name == "run":
            data.update(values)
        else:
            data[name] = values
    return data


def _scalar(text):
    text = text.strip()
    lowered = text.lower()
    if lowered in {"none", ""}:
        return None
    if lowered in {"true", "yes", "on"}:
        return True
    if lowered in {"false", "no", "off"}:
        return False
    return text


def load_config(path=None, *, preset_name=None, overrides=None):
    """Build a RunConfig from a preset, an INI file and explicit overrides, in that order"""
    data = {}
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
        data = parse_ini(text)
    file_preset = data.pop("preset", None)
    preset_name = preset_name or file_preset
    for key, value in (overrides or {}).items():
        if isinstance(value, dict):
            data[key] = {**data.get(key, {}), **value}
        elif value is not None:
            data[key] = value
    if preset_name is not None:
        config = preset(preset_name, **data)
    else:
        if "solver" not in data:
            raise ConfigError("configuration needs a [solver] section with k_max")
        config = _validate(data)
    logger.debug("configuration %s (hash %s)", config.name, config.config_hash()[:12])
    return config
