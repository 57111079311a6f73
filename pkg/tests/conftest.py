import os
from collections import OrderedDict

import numpy as np
import pytest

from disc.synth import ToySpec, generate

_CRITERIA = OrderedDict()


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("acceptance")
        if mark:
            _CRITERIA.setdefault(mark.args[0], [])


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    mark = next((m for m in getattr(report, "acceptance_marks", [])), None)
    if mark is None:
        return
    outcome = "skipped" if report.skipped else report.outcome
    _CRITERIA.setdefault(mark, []).append((report.nodeid, outcome))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    report.acceptance_marks = [mark.args[0]] if mark else []


def pytest_terminal_summary(terminalreporter):
    if not any(_CRITERIA.values()):
        return
    terminalreporter.section("acceptance criteria")
    for crit, results in _CRITERIA.items():
        if not results:
            continue
        outcomes = {o for _, o in results}
        if "failed" in outcomes:
            status = "FAIL"
        elif outcomes == {"skipped"}:
            status = "SKIP"
        else:
            status = "PASS"
        terminalreporter.write_line(f"criterion {crit}: {status} ({len(results)} checks)")


@pytest.fixture(scope="session")
def toy_newly_connected():
    return generate(ToySpec("newly_connected", n=10000, seed=0))


@pytest.fixture(scope="session")
def toy_split_groups():
    return generate(ToySpec("split_groups", n=10000, seed=0))


@pytest.fixture(scope="session")
def toy_multi3():
    return generate(ToySpec("multi3", n=10000, seed=0))


@pytest.fixture(scope="session")
def toy1_results(toy_newly_connected):
    from disc.spectral import disc_pair

    return disc_pair(*toy_newly_connected.datasets, d_a=20, d_b=20)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def mnist_dir():
    return os.environ.get("DISC_MNIST_DIR")
