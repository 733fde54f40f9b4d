import numpy as np
import pytest

from pointgof.pattern import PointPattern, unit_square

_CRITERIA_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_CRITERIA_KEY] = []


@pytest.fixture
def criterion(request):
    """Record one acceptance line; it is repeated in the terminal summary."""
    lines = request.config.stash[_CRITERIA_KEY]

    def record(number, name, ok, detail):
        line = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {name}: {detail}"
        print(line)
        lines.append((number, line))
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_CRITERIA_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines, key=lambda t: t[0]):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_pattern(rng, n, window=None):
    window = window or unit_square()
    u = rng.random((n, 2))
    u[:, 0] = window.x_min + u[:, 0] * window.width
    u[:, 1] = window.y_min + u[:, 1] * window.height
    return PointPattern(u, window)
