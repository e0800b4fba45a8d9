"""Shared fixtures: frozen reference values and session-scoped branch traces."""

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))


@pytest.fixture(scope="session")
def disk_branch_coarse():
    """Full disk branch at modest resolution, traced once per session."""
    from mfbranch.continuation import ContinuationControls, trace_branch
    from mfbranch.mesh import Mesh, UnitDisk

    return trace_branch(Mesh(UnitDisk(), 32), ContinuationControls())


@pytest.fixture(scope="session")
def rect_branch_coarse():
    """Aspect-4 rectangle branch through its fold, capped shortly after."""
    from mfbranch.continuation import ContinuationControls, trace_branch
    from mfbranch.mesh import Mesh, Rectangle

    controls = ContinuationControls(energy_cap=0.06)
    return trace_branch(Mesh(Rectangle(4.0, 1.0), 12), controls)
