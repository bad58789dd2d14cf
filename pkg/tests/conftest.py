import numpy as np
import pytest

from fairkclust.core import ColoredDataset


def line_dataset(*classes):
    """1-D dataset from per-color coordinate lists."""
    pts, cols = [], []
    for c, values in enumerate(classes):
        pts += [[float(v)] for v in values]
        cols += [c] * len(values)
    return ColoredDataset(points=pts, colors=cols)


def random_dataset(rng, ell, n, dim=2, scale=10.0):
    pts = rng.uniform(0.0, scale, size=(ell * n, dim))
    return ColoredDataset(points=pts, colors=np.repeat(np.arange(ell), n))


@pytest.fixture
def hand_instance():
    # two colors on a line: {0, 10} and {1, 11}
    return line_dataset([0, 10], [1, 11])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# --- acceptance reporting: one line per criterion at the end of the session ---

ACCEPTANCE = {}


def report(number: int, title: str, passed: bool, detail: str = ""):
    ACCEPTANCE[number] = (title, passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d} [{'PASS' if passed else 'FAIL'}] {title}: {detail}")
