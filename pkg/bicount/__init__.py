import importlib as _importlib

__version__ = "0.1.0"

_init_params = None
_CLASSES = {
    "BoundaryCurve": "geometry",
    "EigenMode": "bim",
    "Spectrum": "bim",
    "BICountSequence": "nodal",
    "BoundarySubset": "nodal",
    "GaussianWindow": "nodal",
    "PeriodicOrbit": "orbits",
    "LengthSpectrum": "trace",
    "TraceFormulaInput": "trace",
    "RunConfig": "config",
    "Pipeline": "pipeline",
    "Recorder": "recorder",
}
_SPECIAL_ATTRS = set(_CLASSES) | {
    "bim",
    "cli",
    "config",
    "exceptions",
    "formatting",
    "geometry",
    "io",
    "nodal",
    "orbits",
    "pipeline",
    "recorder",
    "rwm",
    "tests",
    "trace",
    "utils",
}


def __getattr__(name):
    """Auto-initialize if special attrs used without explicit init call by user"""
    if name in _SPECIAL_ATTRS:
        if _init_params is None:
            _auto_init()
        if name not in globals():
            _load(name)
        return globals()[name]
    else:
        raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return list(globals().keys() | _SPECIAL_ATTRS)


def init(workers=None):
    """Fix the size of the worker pool used by the parallel stages.

    Parameters
    ----------
    workers : int, optional
        Number of threads for k-grid sweeps, orbit multistart and per-mode counting.
        Defaults to the ``BICOUNT_NUM_WORKERS`` environment variable, else the CPU count.

    Calling ``init`` again with different parameters raises BicountException.
    """
    _init(workers)


def _auto_init():
    _init(None, automatic=True)


def _init(workers, automatic=False):
    global _init_params

    if workers is None:
        from .utils import default_workers

        workers = default_workers()
    elif int(workers) < 1:
        raise ValueError(f"workers must be positive, not {workers}")
    passed_params = dict(workers=int(workers), automatic=automatic)
    if _init_params is None:
        _init_params = passed_params
        return
    if _init_params["workers"] != passed_params["workers"]:
        from .exceptions import BicountException

        if _init_params.get("automatic"):
            raise BicountException("bicount used prior to manual initialization")
        else:
            raise BicountException("bicount initialized multiple times with different parameters")


def _load(name):
    if name in _CLASSES:
        module_name = _CLASSES[name]
        if module_name not in globals():
            _load(module_name)
        module = globals()[module_name]
        val = getattr(module, name)
        globals()[name] = val
    else:
        # Everything else is a module
        module = _importlib.import_module(f".{name}", __name__)
        globals()[name] = module


__all__ = [key for key in __dir__() if not key.startswith("_")]
