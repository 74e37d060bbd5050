import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import sqrtm

from tcmerton import (
    AsymptoticScale, CorrectorProblem, CostStructure, CostVariant, MarketModel, ModelError,
    Preferences, alpha_matrix, make_problem, merton_solution,
)
from tcmerton.corrector import (
    fast_variable, from_fast_variable, relative_deviation, running_cost, trade_cost, trade_units,
)


def _problem(variant="single_fixed", nu_p=0.1, vz=2.0, K=50.0):
    return CorrectorProblem(z=1.0, A=np.eye(2), cov=np.eye(2), vz=vz, vzz=-1.0,
                            nu_p=nu_p, variant=variant, K=K)


def test_covariance_anchor(asymmetric_pair):
    market, prefs = asymmetric_pair
    sol = merton_solution(market, prefs)
    _, A = alpha_matrix(12345.67, sol)
    np.testing.assert_allclose(A, [[42607.9, 669.990], [669.990, 147.787]], rtol=5e-3)


@given(st.floats(0.01, 0.5), st.floats(0.02, 0.15), st.floats(1.5, 10.0), st.floats(10.0, 1e5))
def test_one_asset_covariance(sigma, excess, gamma, z):
    market = MarketModel(0.01, [0.01 + excess], [[sigma]])
    prefs = Preferences(max(1.0, 0.5 * excess**2 / sigma**2 / gamma * (1 - gamma) + 0.05), gamma)
    sol = merton_solution(market, prefs)
    pi = sol.pi[0]
    _, A = alpha_matrix(z, sol)
    assert A[0, 0] == pytest.approx((1 - pi) ** 2 * pi**2 * z**2 * sigma**2, rel=1e-12)


def test_covariance_independent_of_factor(asymmetric_pair):
    market, prefs = asymmetric_pair
    sol = merton_solution(market, prefs)
    sym = MarketModel(market.r, market.mu, np.real(sqrtm(market.cov)))
    chol = MarketModel(market.r, market.mu, np.linalg.cholesky(market.cov))
    _, A1 = alpha_matrix(500.0, sol, sym)
    _, A2 = alpha_matrix(500.0, sol, chol)
    np.testing.assert_allclose(A1, A2, rtol=1e-12)


def test_fast_variable_round_trip(asymmetric_pair, rng):
    sol = merton_solution(*asymmetric_pair)
    z = 800.0
    assert np.allclose(fast_variable(sol.theta(z), z, 0.5, sol), 0.0)
    y = rng.normal(size=2) * 100
    back = from_fast_variable(fast_variable(y, z, 0.37, sol), z, 0.37, sol)
    np.testing.assert_allclose(back, y, rtol=1e-14)
    assert relative_deviation(np.array([5.0, -10.0]), 100.0).tolist() == [0.05, -0.1]
    with pytest.raises(ModelError):
        fast_variable(y, z, 0.0, sol)


def test_running_cost_examples():
    p = CorrectorProblem(z=1.0, A=[[1.0]], cov=[[0.16]], vz=1.0, vzz=-8.0, nu_p=0.0)
    assert running_cost(np.array([2.0]), p) == pytest.approx(2.56)
    assert running_cost(np.array([0.0]), p) == 0.0


@given(st.lists(st.floats(-10, 10), min_size=2, max_size=2))
def test_running_cost_positive_definite(xi):
    cov = np.array([[0.16, 0.03], [0.03, 0.04]])
    p = CorrectorProblem(z=1.0, A=np.eye(2), cov=cov, vz=1.0, vzz=-3.0, nu_p=0.0)
    xi = np.array(xi)
    c = running_cost(xi, p)
    # bounded below by the smallest eigenvalue: zero only at the origin
    assert c >= 1.5 * np.linalg.eigvalsh(cov)[0] * (xi @ xi) * (1 - 1e-12)
    assert (c == 0) == bool(np.all(xi == 0)) or xi @ xi < 1e-300


def test_trade_cost_variants():
    h, K, vz, nu = 0.5, 50.0, 2.0, 0.1
    single = _problem("single_fixed")
    per = _problem("per_asset_fixed")
    prop = _problem("proportional_only")
    assert trade_cost([0, 0], single) == 0 and trade_cost([0, 0], per) == 0
    assert trade_cost([h, 0], single) == pytest.approx(K * vz * (1 + nu * h))
    assert trade_cost([h, h], single) == pytest.approx(K * vz * (1 + 2 * nu * h))
    assert trade_cost([h, 0], per) == pytest.approx(K * vz * (1 + nu * h))
    assert trade_cost([h, h], per) == pytest.approx(K * vz * (2 + 2 * nu * h))
    assert trade_cost([h, -h], prop) == pytest.approx(K * vz * nu * 2 * h)


@given(st.floats(-5, 5).filter(lambda v: v != 0), st.floats(-5, 5).filter(lambda v: v != 0))
def test_per_asset_costs_are_additive(m1, m2):
    per = _problem("per_asset_fixed")
    both = trade_units([m1, m2], per)
    assert both == pytest.approx(trade_units([m1, 0], per) + trade_units([0, m2], per), rel=1e-14)
    fixed = trade_units([m1, m2], per, nu_p=0.0)
    assert fixed == trade_units([m1, 0], per, nu_p=0.0) + trade_units([0, m2], per, nu_p=0.0) == 2


@given(st.lists(st.floats(-5, 5), min_size=2, max_size=2))
def test_penalty_scales_with_marginal_value(m):
    for variant in CostVariant:
        lo, hi = _problem(variant.value, vz=1.3), _problem(variant.value, vz=2.6)
        assert trade_cost(m, hi) == pytest.approx(2 * trade_cost(m, lo), rel=1e-15, abs=0)


def test_trade_cost_needs_penalty():
    p = CorrectorProblem(z=1.0, A=[[1.0]], cov=[[1.0]], vz=1.0, vzz=-1.0, nu_p=0.0)
    with pytest.raises(ModelError, match="not set"):
        trade_cost([1.0], p)


def test_scale_from_costs():
    s = AsymptoticScale.from_costs(CostStructure(16.0, 0.04))
    assert s.epsilon == pytest.approx(2.0) and s.nu_p == pytest.approx(0.005)
    assert 2.0**4 == 16.0 and s.nu_p * s.epsilon**3 == pytest.approx(0.04)
    assert AsymptoticScale.from_costs(CostStructure(0.0, 0.02, "proportional_only")) == AsymptoticScale(1.0, 0.02)


def test_make_problem_one_asset(one_asset_problem):
    p = one_asset_problem
    assert p.d == 1 and p.nu_p == pytest.approx(0.03) and p.epsilon == 1.0
    assert p.vz > 0 and p.vzz < 0 and p.A[0, 0] > 0


def test_make_problem_without_proportional_cost(one_asset_market):
    p = make_problem(*one_asset_market, CostStructure(1.0, 0.0), 1000.0)
    assert p.nu_p == 0.0 and p.variant is CostVariant.SINGLE_FIXED


def test_make_problem_rejects_infinite_value():
    market = MarketModel(0.01, [0.3], [[0.2]])
    with pytest.raises(ModelError):
        make_problem(market, Preferences(0.01, 0.5), CostStructure(1.0, 0.0), 100.0)


def test_problem_validation():
    with pytest.raises(ModelError):
        CorrectorProblem(z=1.0, A=[[1.0, 0.5], [0.4, 1.0]], cov=np.eye(2), vz=1, vzz=-1, nu_p=0)
    with pytest.raises(ModelError):
        CorrectorProblem(z=1.0, A=[[1.0]], cov=[[1.0]], vz=1, vzz=1, nu_p=0)
    with pytest.raises(ModelError):
        CorrectorProblem(z=1.0, A=[[1.0]], cov=[[1.0]], vz=1, vzz=-1, nu_p=0, K=0.0)
    with pytest.raises(ModelError):
        CorrectorProblem(z=1.0, A=[[-1.0]], cov=[[1.0]], vz=1, vzz=-1, nu_p=0)
