"""Shared fixtures: the reference scenarios and their simulated records."""

import pytest

from antago.engine import simulate
from antago.scenario_io import load_preset

FIG2_PRESETS = ("fig2-F1", "fig2-F2", "fig2-F3")


@pytest.fixture(scope="session")
def study():
    """Reference scenario with the tanh friction load."""
    return load_preset("fig2-F1")


@pytest.fixture(scope="session")
def params(study):
    return study.params


@pytest.fixture(scope="session")
def gains(study):
    return study.gains


@pytest.fixture(scope="session")
def fig2_runs():
    """All three reference scenarios simulated once per session.

    Maps preset name to (scenario, record).
    """
    runs = {}
    for name in FIG2_PRESETS:
        scenario = load_preset(name)
        runs[name] = (scenario, simulate(scenario))
    return runs
