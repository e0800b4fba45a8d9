"""Shared fixtures for the figure-pipeline tests.

The ``data`` directory ships two reference artifact pairs produced by the
solver CLI: a 4x1 rectangle branch that turns at a fold past the ``8π``
threshold (so every landmark annotation is exercised) and a unit-disk
branch that stays monotone below the threshold (so the no-landmark paths
are exercised).
"""

from __future__ import annotations

from pathlib import Path

import pytest

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def branch_rect() -> Path:
    return DATA_DIR / "branch_rect.csv"


@pytest.fixture(scope="session")
def thermo_rect() -> Path:
    return DATA_DIR / "thermo_rect.csv"


@pytest.fixture(scope="session")
def branch_disk() -> Path:
    return DATA_DIR / "branch_disk.csv"


@pytest.fixture(scope="session")
def thermo_disk() -> Path:
    return DATA_DIR / "thermo_disk.csv"
