import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from machlab.spectral import make_grid

settings.register_profile(
    "machlab", max_examples=25, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("machlab")


@pytest.fixture
def torus():
    return make_grid("torus", 32, 32)


@pytest.fixture
def channel():
    return make_grid("channel", 32, 16)


@pytest.fixture(params=["torus", "channel"])
def grid(request):
    if request.param == "torus":
        return make_grid("torus", 32, 32)
    return make_grid("channel", 32, 16)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for an acceptance criterion."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number: int, title: str, passed: bool, detail: str = "") -> bool:
        line = f"{'PASS' if passed else 'FAIL'}  criterion {number:2d}  {title}  {detail}".rstrip()
        lines.append((number, line))
        print(line)
        return passed

    return record


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
