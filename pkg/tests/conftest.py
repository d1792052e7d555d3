import numpy as np
import pytest

from windjoint.fixtures import corridor_config, corridor_layout, fixture_path
from windjoint.scenarios import config_from_dict, load_wind_rose
from windjoint.wake import FarmSpec, Inflow, Layout


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running optimizer or acceptance test")


@pytest.fixture
def spec():
    return FarmSpec()


@pytest.fixture
def corridor():
    """(layout, FarmConfig) for the three-turbine row, WT2 movable along x."""
    return corridor_layout(), config_from_dict(corridor_config())


@pytest.fixture
def aligned():
    return Inflow(270.0, 9.0)


@pytest.fixture
def rose12():
    return load_wind_rose(fixture_path("wnw_rose12.csv"))


def random_layout(rng, n, spec, min_gap=None):
    """Rejection-sample ``n`` turbines in the site with pairwise gap >= min_gap."""
    gap = spec.min_spacing if min_gap is None else min_gap
    lo, hi = spec.lower_bounds, spec.upper_bounds
    pts = []
    while len(pts) < n:
        p = lo + (hi - lo) * rng.random(2)
        if all(np.hypot(*(p - q)) >= gap for q in pts):
            pts.append(p)
    pts = np.array(pts)
    return Layout(pts[:, 0], pts[:, 1])


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS):
            terminalreporter.write_line(line)
