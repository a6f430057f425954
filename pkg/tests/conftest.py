from pathlib import Path

import pytest

from lookuplat.grid import BinSpec, GridId, GridSpec
from lookuplat.scenario import LocatedSample, Measurement

DATA = Path(__file__).parent / "data"

XY_RSS = (-53.0, -55.0, -57.0, -59.0, -61.0)
UV_RSS = (-58.0, -60.0, -62.0, -64.0, -66.0)


def make_sample(i, pos, **readings):
    return LocatedSample(i, pos, Measurement(readings))


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture
def two_grid_spec():
    return GridSpec(20.0, (0.0, 0.0))


@pytest.fixture
def unit_bins():
    return BinSpec(1.0)


@pytest.fixture
def two_grid_samples():
    """Ten surveys of antenna A: five in grid (0,0), five in grid (1,0)."""
    out = [LocatedSample(i, (10.0, 10.0), Measurement({"A": r})) for i, r in enumerate(XY_RSS)]
    out += [LocatedSample(5 + i, (30.0, 10.0), Measurement({"A": r})) for i, r in enumerate(UV_RSS)]
    return out


G_XY = GridId(0, 0)
G_UV = GridId(1, 0)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
