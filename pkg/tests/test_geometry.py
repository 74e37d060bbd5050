import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tcmerton.errors import ModelError
from tcmerton.geometry import (
    CostStructure,
    Position,
    apply_trade,
    discontinuity_gap,
    in_solvency,
    intervention_feasible,
    liquidation_value,
)

costs_01 = CostStructure(1.0, 0.1)


def test_liquidation_value_examples():
    c = CostStructure(2.0, 0.25)
    assert liquidation_value(Position(2.0, [0.0, 0.0]), c) == 0.0
    assert liquidation_value(Position(0.0, [2.0 / 0.75, 0.0]), c) == pytest.approx(0.0, abs=1e-15)
    assert liquidation_value(Position(10.0, [1.0, -1.0]), costs_01) == pytest.approx(8.8)


def test_solvency_examples():
    c = CostStructure(1.0, 0.0)
    assert in_solvency(Position(0.0, [0.0, 0.0]), c)
    assert in_solvency(Position(0.5, [0.0]), c)
    assert not in_solvency(Position(-0.01, [1.0]), c)


def test_apply_trade_examples():
    assert apply_trade(Position(10.0, [0.0]), [0.0], costs_01).x == pytest.approx(9.0)
    p = apply_trade(Position(10.0, [0.0]), [2.0], costs_01)
    assert p.x == pytest.approx(6.8) and p.y[0] == pytest.approx(2.0)


@given(
    st.floats(-50, 50), st.lists(st.floats(-50, 50), min_size=2, max_size=2),
    st.lists(st.floats(-50, 50), min_size=2, max_size=2), st.floats(0.0, 0.9), st.floats(0.01, 5.0),
)
def test_wealth_drop_equals_cost(x, y, m, lp, lf):
    c = CostStructure(lf, lp)
    pos = Position(x, y)
    after = apply_trade(pos, m, c)
    drop = pos.wealth - after.wealth
    assert drop == pytest.approx(lf + lp * np.abs(m).sum(), rel=1e-12, abs=1e-12)


def test_zero_proportional_cost_predicate():
    rng = np.random.default_rng(3)
    c = CostStructure(1.5, 0.0)
    for _ in range(500):
        x, *y = rng.uniform(-5, 5, 3)
        expect = max(x + sum(y) - 1.5, min(x, *y)) >= 0
        assert in_solvency(Position(x, y), c) == expect


def _brute_feasible(pos, costs, span=12.0, n=97):
    grid = np.linspace(-span, span, n)
    for m in itertools.product(grid, repeat=pos.y.size):
        if in_solvency(apply_trade(pos, np.array(m), costs), costs):
            return True
    # the exact liquidation trade is always among the candidates
    return in_solvency(apply_trade(pos, -pos.y, costs), costs)


def test_feasibility_matches_brute_force_search():
    rng = np.random.default_rng(11)
    c = CostStructure(1.0, 0.2)
    checked = 0
    while checked < 150:
        pos = Position(rng.uniform(-4, 6), rng.uniform(-4, 4, 2))
        if abs(liquidation_value(pos, c)) < 0.05:
            continue
        assert intervention_feasible(pos, c) == _brute_feasible(pos, c)
        checked += 1


def test_feasibility_examples():
    c = CostStructure(1.0, 0.1)
    assert intervention_feasible(Position(1.0, [0.0]), c)
    half = Position(0.5, [0.0])
    assert in_solvency(half, c) and not intervention_feasible(half, c)
    assert not _brute_feasible(half, c)


def test_feasibility_monotone_on_random_pairs():
    rng = np.random.default_rng(42)
    for _ in range(1000):
        d = int(rng.integers(1, 4))
        c = CostStructure(rng.uniform(0.1, 3.0), rng.uniform(0.0, 0.5))
        x, y = rng.uniform(-5, 5), rng.uniform(-5, 5, d)
        dx, dy = rng.exponential(1.0), rng.exponential(1.0, d) * (rng.random(d) < 0.7)
        lo, hi = Position(x, y), Position(x + dx, y + dy)
        if intervention_feasible(lo, c):
            assert intervention_feasible(hi, c)
        if in_solvency(lo, c):
            assert in_solvency(hi, c)


def test_discontinuity_gap():
    c = CostStructure(1.0, 0.0)
    assert discontinuity_gap(c, 0.01, 1.0, lambda v: 2 * np.sqrt(v)) == pytest.approx(0.2)
    assert discontinuity_gap(c, 0.0, 1.0, lambda v: 2 * np.sqrt(v)) == 0.0
    assert discontinuity_gap(c, 0.03, 2.0, lambda v: 2 * np.sqrt(v)) > 0
    with pytest.raises(ModelError, match="gap undefined"):
        discontinuity_gap(c, 0.01, 1.0, lambda v: np.log(v) if v > 0 else -np.inf)


def test_cost_validation():
    with pytest.raises(ModelError):
        CostStructure(0.0, 0.1)
    with pytest.raises(ModelError):
        CostStructure(1.0, 1.0)
    with pytest.raises(ModelError):
        CostStructure(0.0, 0.0, "proportional_only")
    assert CostStructure(0.0, 0.02, "proportional_only").lambda_f == 0.0
