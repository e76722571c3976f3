import numpy as np
import pytest

from halfstokes.fields import Grid
from halfstokes.weights import WeightSpec

# filled by test_acceptance.py, printed at the end of the session
ACCEPTANCE_LINES: dict = {}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def example_spec():
    return WeightSpec(3, 4.0, ((0.0, 0.0, 1.0), (0.0, 0.0, 2.0)), (0.125, 0.125))


@pytest.fixture
def small_half():
    return Grid.halfspace(4.0, 32)


@pytest.fixture(autouse=True)
def _isolated_cache(tmp_path, monkeypatch):
    monkeypatch.setenv("STOKES_CACHE_DIR", str(tmp_path / "cache"))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
