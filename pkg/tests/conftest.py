import sys

import numpy as np
import pytest

from fredo.dataio import TimeSeriesMatrix
from fredo.synthetic import generate_synthetic


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def write_csv(tmp_path):
    def _write(text, name="data.csv"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return _write


@pytest.fixture(scope="session")
def small_synthetic():
    return generate_synthetic(n_series=3, length=600, period=12, seed=7)


@pytest.fixture
def periodic_matrix():
    t = np.arange(240)
    cols = [np.sin(2 * np.pi * t / 12), np.cos(2 * np.pi * t / 12) + 0.5 * np.sin(4 * np.pi * t / 12)]
    return TimeSeriesMatrix(np.stack(cols, axis=1), ("a", "b"))


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in acceptance.RESULTS:
        terminalreporter.write_line(line)
