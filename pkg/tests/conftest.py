import numpy as np
import pytest

from fairsynth.fixtures import bundled
from fairsynth.tabular import Dataset, load_schema


@pytest.fixture
def tiny6():
    return bundled("tiny6.csv"), load_schema(bundled("tiny6.yaml"))


@pytest.fixture
def tiny8():
    return bundled("tiny8.csv"), load_schema(bundled("tiny8.yaml"))


@pytest.fixture
def biased():
    return bundled("biased.csv"), load_schema(bundled("biased.yaml"))


def make_cells(PF, PU, UF, UU, d=2, seed=0):
    """Dataset with the given cell sizes and random numeric features."""
    rng = np.random.default_rng(seed)
    y = np.array([1] * PF + [0] * PU + [1] * UF + [0] * UU)
    g = np.array([1] * (PF + PU) + [0] * (UF + UU))
    return Dataset(rng.random((len(y), d)), y, g, None)


ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion, then assert."""

    def record(number, ok, detail):
        status = "SKIP" if ok is None else "PASS" if ok else "FAIL"
        line = f"criterion {number}: {status} - {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)
        if ok is None:
            pytest.skip(detail)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
