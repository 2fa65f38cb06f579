import json
import math

import numpy as np
import pytest

from coopmcl.maps import CellState, OccupancyGrid
from coopmcl.reference import reference_scenario_path


def box_grid(width_m=4.0, height_m=3.0, res=0.05, wall=1):
    """Open room bounded by a wall of ``wall`` cells."""
    w, h = int(round(width_m / res)), int(round(height_m / res))
    cells = np.full((h, w), CellState.OCCUPIED, dtype=np.int8)
    cells[wall:-wall, wall:-wall] = CellState.FREE
    return OccupancyGrid(cells, res)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def room():
    return box_grid()


@pytest.fixture(scope="session")
def reference_path():
    return reference_scenario_path()


def write_scenario(tmp_path, doc, name="scenario.json"):
    """Copy the reference map next to ``doc`` and write it; returns the path."""
    src = reference_scenario_path().parent
    for fname in ("corridor.pgm", "corridor.json"):
        (tmp_path / fname).write_bytes((src / fname).read_bytes())
    path = tmp_path / name
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


def open_grid(size_m=10.0, res=0.1):
    n = int(round(size_m / res))
    return OccupancyGrid(np.zeros((n, n), dtype=np.int8), res)


def deg(x):
    return math.radians(x)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
