import json
from functools import lru_cache
from pathlib import Path

import numpy as np
import pytest

from cqe.fcidump import read_fcidump

DATA = Path(__file__).parent / "data"


@lru_cache(maxsize=None)
def load(name):
    return read_fcidump(DATA / f"{name}.fcidump")


@lru_cache(maxsize=None)
def reference_energies():
    return json.loads((DATA / "reference_energies.json").read_text())


@pytest.fixture
def h2():
    return load("h2_0.7414")


@pytest.fixture
def h4():
    return load("h4_1.0")


@pytest.fixture
def refs():
    return reference_energies()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, filled in by test_acceptance
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
