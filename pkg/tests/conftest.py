import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from tactsim.scenegen import Camera, Primitive, SceneSpec, render_depth  # noqa: E402

DATA = Path(__file__).parent / "data"


def pytest_addoption(parser):
    parser.addoption("--dataset-dir", default=None, help="root of the downloaded real/virtual dataset")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--dataset-dir"):
        return
    skip = pytest.mark.skip(reason="needs --dataset-dir")
    for item in items:
        if "dataset" in item.keywords:
            item.add_marker(skip)


_criteria = {}


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    # a criterion fails if any phase fails; skips only count when nothing ran
    prev = _criteria.get(marker)
    if report.failed:
        outcome = "FAIL"
    elif report.skipped:
        outcome = prev or "SKIP"
    elif report.when == "call":
        outcome = "PASS" if prev != "FAIL" else "FAIL"
    else:
        return
    _criteria[marker] = outcome


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        outcome.get_result().criterion = mark.args


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for (number, title), outcome in sorted(_criteria.items()):
        terminalreporter.write_line(f"criterion {number}: {outcome}  {title}")


def plateau(n=32, size=10, height=1e-3):
    e0 = np.zeros((n, n))
    a = (n - size) // 2
    e0[a:a + size, a:a + size] = height
    return e0


def sphere_scene(width=640, height=480, radius=4e-3, press=1e-3):
    cam = Camera(width=width, height=height)
    return SceneSpec(camera=cam, primitives=(Primitive("sphere", {"radius": radius}),), press_depth=press)


@pytest.fixture(scope="session")
def sphere_depth():
    return render_depth(sphere_scene())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
