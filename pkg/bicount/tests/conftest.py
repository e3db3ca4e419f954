import bicount
import pytest
from bicount.geometry import ConformalMapSpec, DiskSpec, EllipseSpec, build_curve


def pytest_configure(config):
    workers = config.getoption("--workers", None)
    bicount.init(workers)
    print(f"Running tests with {bicount._init_params['workers']} workers")


def pytest_runtest_setup(item):
    if "slow" in item.keywords and not item.config.getoption("--runslow", True):  # pragma: no cover
        pytest.skip("need --runslow option to run")


@pytest.fixture(scope="session")
def disk():
    return build_curve(DiskSpec(1.0))


@pytest.fixture(scope="session")
def ellipse():
    return build_curve(EllipseSpec(2.0, 1.0))


@pytest.fixture(scope="session")
def africa():
    return build_curve(ConformalMapSpec())
