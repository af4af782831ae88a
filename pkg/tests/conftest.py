from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import ACCEPTANCE  # noqa: E402
from travelrl.sandbox import generate_db  # noqa: E402
from travelrl.synthesis import split_counts, synthesize_dataset  # noqa: E402


@pytest.fixture(scope="session")
def desk_db():
    return generate_db(0, "desk")


@pytest.fixture(scope="session")
def tiny_db():
    return generate_db(0, "tiny")


@pytest.fixture(scope="session")
def dataset(desk_db):
    return synthesize_dataset(desk_db, split_counts(200, (4, 3, 3)), seed=0)


@pytest.fixture(scope="session")
def minitask():
    from travelrl.optim import make_minitask

    return make_minitask(0)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
