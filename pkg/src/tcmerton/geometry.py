"""Solvency region, bulk trades and intervention feasibility of the full model.

Positions are ``(x, y)`` with ``x`` the safe holding and ``y`` the vector of
risky holdings, all in currency.  A trade ``m`` moves ``m[j]`` from the safe
account into asset ``j`` and pays ``lambda_f + lambda_p * |m|_1`` out of the
safe account.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import ModelError


class CostVariant(str, Enum):
    SINGLE_FIXED = "single_fixed"
    PER_ASSET_FIXED = "per_asset_fixed"
    PROPORTIONAL_ONLY = "proportional_only"


@dataclass(frozen=True)
class CostStructure:
    """Fixed cost ``lambda_f`` (currency) and proportional cost ``lambda_p``.

    ``lambda_f`` may only be zero in the proportional-only variant.
    """

    lambda_f: float
    lambda_p: float = 0.0
    variant: CostVariant = CostVariant.SINGLE_FIXED

    def __post_init__(self):
        object.__setattr__(self, "variant", CostVariant(self.variant))
        if not 0.0 <= self.lambda_p < 1.0:
            raise ModelError("lambda_p must lie in [0, 1)")
        if self.variant is CostVariant.PROPORTIONAL_ONLY:
            if self.lambda_p <= 0:
                raise ModelError("proportional-only costs need lambda_p > 0")
            if self.lambda_f < 0:
                raise ModelError("lambda_f must be nonnegative")
        elif not self.lambda_f > 0:
            raise ModelError("lambda_f must be positive")


@dataclass(frozen=True)
class Position:
    x: float
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", np.atleast_1d(np.asarray(self.y, dtype=float)))

    @property
    def wealth(self) -> float:
        return self.x + float(self.y.sum())


def liquidation_value(pos: Position, costs: CostStructure) -> float:
    return pos.x + float(pos.y.sum()) - costs.lambda_p * float(np.abs(pos.y).sum()) - costs.lambda_f


def in_solvency(pos: Position, costs: CostStructure) -> bool:
    """Membership in the solvency region ``K_lambda``."""
    nonneg = min(pos.x, float(pos.y.min()))
    return max(liquidation_value(pos, costs), nonneg) >= 0


def apply_trade(pos: Position, m, costs: CostStructure) -> Position:
    m = np.broadcast_to(np.asarray(m, dtype=float), pos.y.shape)
    x = pos.x - float(np.sum((1.0 + costs.lambda_p * np.sign(m)) * m)) - costs.lambda_f
    return Position(x, pos.y + m)


def intervention_feasible(pos: Position, costs: CostStructure) -> bool:
    """Whether some bulk trade lands in the solvency region.

    Full liquidation is the extremal trade: any post-trade position has
    liquidation value at most that of ``pos``, and a nonnegative post-trade
    position forces it to be nonnegative as well.  So a solvent target exists
    exactly when ``liquidation_value(pos) >= 0``.
    """
    return liquidation_value(pos, costs) >= 0


def discontinuity_gap(costs: CostStructure, r: float, beta: float, U_at) -> float:
    """Lower bound ``(U(r lambda_f) - U(0)) / beta`` on the jump of the value at ``(lambda_f, 0)``."""
    u0 = float(U_at(0.0))
    if not np.isfinite(u0):
        raise ModelError("gap undefined: U(0) is not finite")
    return (float(U_at(r * costs.lambda_f)) - u0) / beta
