import numpy as np
import pytest

from melaseg.synthetic import ellipse_mask


@pytest.fixture
def rng():
    return np.random.default_rng(20170415)


def disk(r, size=None, center=None):
    size = size or 2 * r + 21
    c = center or ((size - 1) / 2, (size - 1) / 2)
    return ellipse_mask((size, size), c, (r, r))


def rotate90(a, k=1):
    return np.rot90(a, k).copy()


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
