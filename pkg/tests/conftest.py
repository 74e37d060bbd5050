import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from tcmerton import CostStructure, MarketModel, Preferences, make_problem

settings.register_profile(
    "default", deadline=None, max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def one_asset_market():
    # the single-asset row used throughout the wealth sweeps
    return MarketModel(0.01, [0.04], [[0.2]]), Preferences(1.0, 5.0)


@pytest.fixture
def one_asset_problem(one_asset_market):
    market, prefs = one_asset_market
    return make_problem(market, prefs, CostStructure(1.0, 0.03), 1000.0)


@pytest.fixture
def asymmetric_pair():
    market = MarketModel.from_correlation(0.03, [0.08, 0.04], [0.4, 0.2], 0.35)
    return market, Preferences(1.0, 7.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: (int(s.split()[1].rstrip("abc:")), s)):
            terminalreporter.write_line(line)
