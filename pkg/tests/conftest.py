import numpy as np
import pytest
from shapely.geometry import box

from sarcast.config import Config
from sarcast.features import FeatureLayers
from sarcast.grid import GridSpec, build_grid, knn_adjacency
from sarcast.pipeline import build_environment


def make_g5(k=4, boundary=None):
    """5x5 grid over lon/lat 0..5 with unit cells."""
    return knn_adjacency(build_grid(GridSpec(0.0, 5.0, 0.0, 5.0, 5, 5), boundary), k)


def flat_layers(n, road=0.0, sec=0.0, corr=0.0):
    return FeatureLayers(np.full(n, road), np.full(n, sec), np.full(n, corr))


@pytest.fixture
def g5():
    return make_g5()


@pytest.fixture
def g5_half():
    # boundary covers the two left columns only
    return make_g5(boundary=box(0.0, 0.0, 2.0, 5.0))


@pytest.fixture(scope="session")
def demo_cfg():
    return Config()


@pytest.fixture(scope="session")
def demo_env(demo_cfg):
    return build_environment(demo_cfg)


ACCEPTANCE = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line; the outcome is whatever the test body does."""
    record = {"name": request.node.name, "label": request.node.function.__doc__.strip().splitlines()[0]}
    yield record
    ACCEPTANCE.append(record)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call" and "criterion" in item.fixturenames:
        item.funcargs["criterion"]["passed"] = rep.passed
        item.funcargs["criterion"]["detail"] = item.funcargs["criterion"].get("detail", "")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for rec in ACCEPTANCE:
        status = "PASS" if rec.get("passed") else "FAIL"
        extra = f" ({rec['detail']})" if rec.get("detail") else ""
        terminalreporter.write_line(f"[{status}] {rec['label']}{extra}")
