import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from blowuplab import ModelParams

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

FROZEN = json.loads((Path(__file__).parent / "oracles" / "frozen.json").read_text())


@pytest.fixture(scope="session")
def frozen():
    return FROZEN


@pytest.fixture(scope="session")
def P1():
    return ModelParams(1, 3.0)


@pytest.fixture(scope="session")
def P3():
    return ModelParams(3, 2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance criteria report one line each in the terminal summary
ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = []


def pytest_terminal_summary(terminalreporter, config):
    rows = sorted(config.stash.get(ACCEPTANCE, []))
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for n, ok, detail in rows:
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def criterion(request):
    """``criterion(ok, detail)`` records and asserts the criterion named by the test."""
    n = int(request.node.name.split("_")[2])
    rows = request.config.stash[ACCEPTANCE]
    done = []

    def record(ok, detail):
        done.append(True)
        rows.append((n, bool(ok), detail))
        print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail

    yield record
    if not done:
        rows.append((n, False, "error before the check"))
