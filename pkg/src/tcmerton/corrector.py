"""One instance of the ergodic impulse-control problem at frozen wealth ``z``.

In the fast variable ``xi = (y - theta(z)) / eps`` the position diffuses with
covariance ``A = alpha alpha^T`` where ``alpha = (I - pi 1^T) diag(pi z) sigma``,
pays the running cost ``-v_zz |sigma^T xi|^2 / 2`` and, for each bulk trade
``m``, a cost ``v_z`` times the trade bracket (``1 + nu_p |m|_1`` for a single
fixed fee).  Costs are rescaled as ``lambda_f = eps^4``, ``lambda_p = nu_p eps^3``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ModelError
from .geometry import CostStructure, CostVariant
from .market import (
    FrictionlessSolution,
    MarketModel,
    Preferences,
    merton_solution,
    value_derivatives,
)


@dataclass(frozen=True)
class AsymptoticScale:
    epsilon: float
    nu_p: float

    @classmethod
    def from_costs(cls, costs: CostStructure) -> "AsymptoticScale":
        # no fixed fee to normalise against: xi is measured in currency
        if costs.variant is CostVariant.PROPORTIONAL_ONLY:
            return cls(1.0, costs.lambda_p)
        eps = costs.lambda_f ** 0.25
        return cls(eps, costs.lambda_p / eps**3)


@dataclass(frozen=True)
class CorrectorProblem:
    """Data of the first corrector problem at wealth ``z``.

    ``K`` is the penalisation rate; ``None`` lets the solver pick it from the
    grid.  ``cov`` is the return covariance ``sigma sigma^T`` used by the
    running cost.
    """

    z: float
    A: np.ndarray
    cov: np.ndarray
    vz: float
    vzz: float
    nu_p: float
    variant: CostVariant = CostVariant.SINGLE_FIXED
    K: float | None = None
    epsilon: float = 1.0

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        cov = np.atleast_2d(np.asarray(self.cov, dtype=float))
        if not np.allclose(A, A.T, rtol=1e-12, atol=0):
            raise ModelError("diffusion covariance must be symmetric")
        A = 0.5 * (A + A.T)
        if np.linalg.eigvalsh(A)[0] < -1e-12 * np.abs(A).max():
            raise ModelError("diffusion covariance must be positive semidefinite")
        if not self.vzz < 0:
            raise ModelError("v_zz must be negative")
        if self.K is not None and not self.K > 0:
            raise ModelError("penalty rate K must be positive")
        if self.nu_p < 0:
            raise ModelError("nu_p must be nonnegative")
        A.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "variant", CostVariant(self.variant))

    @property
    def d(self) -> int:
        return self.A.shape[0]


def fast_variable(y, z, epsilon, sol: FrictionlessSolution):
    if not epsilon > 0:
        raise ModelError("epsilon must be positive")
    return (np.asarray(y, dtype=float) - sol.theta(z)) / epsilon


def from_fast_variable(xi, z, epsilon, sol: FrictionlessSolution):
    return sol.theta(z) + epsilon * np.asarray(xi, dtype=float)


def relative_deviation(xi, z):
    """Deviation from the Merton position as a fraction of wealth."""
    return np.asarray(xi, dtype=float) / z


def alpha_matrix(z, sol: FrictionlessSolution, market: MarketModel | None = None):
    """Return ``(alpha, A)`` with ``A = alpha @ alpha.T``."""
    if not z > 0:
        raise ModelError("wealth must be positive")
    market = sol.market if market is None else market
    d = market.d
    pi = sol.pi
    alpha = (np.eye(d) - np.outer(pi, np.ones(d))) @ np.diag(pi * z) @ market.sigma
    return alpha, alpha @ alpha.T


def running_cost(xi, problem: CorrectorProblem):
    """``-v_zz |sigma^T xi|^2 / 2`` for one point or an ``(N, d)`` array."""
    xi = np.asarray(xi, dtype=float)
    quad = np.einsum("...i,ij,...j->...", xi, problem.cov, xi)
    return -0.5 * problem.vzz * quad


def trade_units(m, problem: CorrectorProblem, nu_p=None):
    """Trade cost in units of ``v_z``: the bracket multiplying ``v_z``.

    ``m`` is a jump in xi-units, shape ``(d,)`` or ``(..., d)``.  Zero jumps
    cost nothing.
    """
    m = np.asarray(m, dtype=float)
    nu = problem.nu_p if nu_p is None else nu_p
    l1 = np.abs(m).sum(axis=-1)
    moved = m != 0
    if problem.variant is CostVariant.SINGLE_FIXED:
        out = np.where(moved.any(axis=-1), 1.0 + nu * l1, 0.0)
    elif problem.variant is CostVariant.PER_ASSET_FIXED:
        out = moved.sum(axis=-1) + nu * l1
    else:
        out = nu * l1
    return out


def trade_cost(m, problem: CorrectorProblem, K=None):
    """Penalised trade cost rate ``K v_z * trade_units(m)``."""
    K = problem.K if K is None else K
    if K is None:
        raise ModelError("penalty rate K is not set")
    return K * problem.vz * trade_units(m, problem)


def make_problem(
    market: MarketModel,
    prefs: Preferences,
    costs: CostStructure,
    z: float,
    K: float | None = None,
) -> CorrectorProblem:
    sol = merton_solution(market, prefs)
    _, A = alpha_matrix(z, sol, market)
    _, vz, vzz = value_derivatives(sol, z)
    scale = AsymptoticScale.from_costs(costs)
    return CorrectorProblem(
        z=float(z),
        A=A,
        cov=market.cov,
        vz=float(vz),
        vzz=float(vzz),
        nu_p=scale.nu_p,
        variant=costs.variant,
        K=K,
        epsilon=scale.epsilon,
    )
