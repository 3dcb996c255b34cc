from __future__ import annotations

import pytest

from gridsignal.grid_scenario import DemandSchedule, Scenario, build_grid, build_od_table


@pytest.fixture(scope="session")
def net4():
    return build_grid(4, 4, 150.0, 11.111)


@pytest.fixture(scope="session")
def od4(net4):
    return build_od_table(net4)


@pytest.fixture()
def flat_schedule():
    """Constant moderate demand, long horizon."""
    return DemandSchedule([(20000, 0.08)])
