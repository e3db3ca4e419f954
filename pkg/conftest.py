def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", help="run slow tests")
    parser.addoption(
        "--workers",
        action="store",
        type=int,
        default=None,
        help="worker threads for the parallel stages",
    )
