"""Market and preference parameters and the frictionless Merton solution.

The frictionless CRRA problem has a closed form.  With ``Sigma = sigma sigma^T``
and excess returns ``e = mu - r 1``, the Merton fractions are
``pi = Sigma^{-1} e / gamma`` and the value function is a power of wealth,
``v(z) = m^{-gamma} z^{1-gamma} / (1-gamma)``, with consumption rate ``m``
given by the finiteness expression (see :func:`consumption_rate`).  ``gamma == 1``
is treated as logarithmic utility.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ModelError


@dataclass(frozen=True)
class MarketModel:
    """Constant investment opportunities ``(r, mu, sigma)``.

    ``sigma`` is the ``d x d`` volatility matrix; returns have covariance
    ``sigma @ sigma.T`` per unit time.
    """

    r: float
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        d = mu.shape[0]
        if mu.ndim != 1 or d < 1:
            raise ModelError("mu must be a non-empty vector")
        if sigma.shape != (d, d):
            raise ModelError(f"sigma must be {d}x{d}, got {sigma.shape}")
        cov = sigma @ sigma.T
        eig = np.linalg.eigvalsh(0.5 * (cov + cov.T))
        if eig[0] <= 1e-14 * max(eig[-1], 1e-300):
            raise ModelError("sigma sigma^T is singular")
        if np.any(mu - self.r <= 0):
            raise ModelError("expected excess returns mu - r must be positive")
        mu.setflags(write=False)
        sigma.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @classmethod
    def from_correlation(cls, r, mu, sigmas, rho):
        """Two-asset market from volatilities ``(s1, s2)`` and correlation ``rho``.

        Uses the lower-triangular factor ``[[s1, 0], [rho s2, s2 sqrt(1-rho^2)]]``.
        """
        s1, s2 = (float(s) for s in sigmas)
        if not -1.0 < rho < 1.0:
            raise ModelError("correlation must lie in (-1, 1)")
        sigma = np.array([[s1, 0.0], [rho * s2, s2 * np.sqrt(1.0 - rho * rho)]])
        return cls(r=float(r), mu=np.asarray(mu, dtype=float), sigma=sigma)

    @property
    def d(self) -> int:
        return self.mu.shape[0]

    @property
    def cov(self) -> np.ndarray:
        return self.sigma @ self.sigma.T

    @property
    def excess(self) -> np.ndarray:
        return self.mu - self.r


@dataclass(frozen=True)
class Preferences:
    """CRRA preferences: impatience ``beta`` and relative risk aversion ``gamma``."""

    beta: float
    gamma: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ModelError("beta must be positive")
        if not self.gamma > 0:
            raise ModelError("gamma must be positive")

    @property
    def is_log(self) -> bool:
        return self.gamma == 1.0

    def utility(self, c):
        c = np.asarray(c, dtype=float)
        with np.errstate(divide="ignore"):
            if self.is_log:
                return np.log(c)
            return c ** (1.0 - self.gamma) / (1.0 - self.gamma)


@dataclass(frozen=True)
class FrictionlessSolution:
    """Closed-form frictionless optimum for a CRRA investor.

    Attributes
    ----------
    pi : ndarray
        Merton fractions of wealth held in each risky asset.
    m_rate : float
        Optimal consumption-to-wealth ratio; ``kappa(z) = m_rate * z``.
    """

    pi: np.ndarray
    m_rate: float
    gamma: float
    beta: float
    market: MarketModel = field(repr=False)
    prefs: Preferences = field(repr=False)

    def theta(self, z):
        """Optimal risky positions at wealth ``z``."""
        return self.pi * z

    def kappa(self, z):
        """Optimal consumption rate at wealth ``z``."""
        return self.m_rate * z


def _sharpe_squared(market: MarketModel) -> float:
    e = market.excess
    return float(e @ np.linalg.solve(market.cov, e))


def consumption_rate(market: MarketModel, prefs: Preferences) -> float:
    """beta/gamma + (1 - 1/gamma) (r + e^T Sigma^{-1} e / (2 gamma))."""
    g = prefs.gamma
    return prefs.beta / g + (1.0 - 1.0 / g) * (market.r + _sharpe_squared(market) / (2.0 * g))


def check_finiteness(market: MarketModel, prefs: Preferences) -> bool:
    """True iff the frictionless value function is finite."""
    return consumption_rate(market, prefs) > 0


def merton_solution(market: MarketModel, prefs: Preferences) -> FrictionlessSolution:
    m = consumption_rate(market, prefs)
    if not m > 0:
        raise ModelError("frictionless value infinite")
    pi = np.linalg.solve(market.cov, market.excess) / prefs.gamma
    pi.setflags(write=False)
    return FrictionlessSolution(
        pi=pi, m_rate=m, gamma=prefs.gamma, beta=prefs.beta, market=market, prefs=prefs
    )


def value_derivatives(sol: FrictionlessSolution, z):
    """Return ``(v, v_z, v_zz)`` of the frictionless value at wealth ``z > 0``.

    For log utility the additive constant in ``v`` is the one that makes the
    dynamic programming equation hold exactly.
    """
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise ModelError("wealth must be positive")
    g, m, beta = sol.gamma, sol.m_rate, sol.beta
    if g == 1.0:
        q = _sharpe_squared(sol.market)
        r = sol.market.r
        const = (np.log(beta) - 1.0 + (r + 0.5 * q) / beta) / beta
        v = np.log(z) / beta + const
        return v, 1.0 / (beta * z), -1.0 / (beta * z * z)
    scale = m ** (-g)
    vz = scale * z ** (-g)
    return vz * z / (1.0 - g), vz, -g * vz / z


def dual_utility(p, gamma):
    """Convex dual ``sup_{c>0} U(c) - c p`` of CRRA utility, for ``p > 0``."""
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0):
        raise ModelError("dual utility requires p > 0")
    if gamma == 1.0:
        return -np.log(p) - 1.0
    return gamma / (1.0 - gamma) * p ** ((gamma - 1.0) / gamma)


def frictionless_generator(sol: FrictionlessSolution, z, vz, vzz):
    """Apply the wealth generator ``L0`` (with optimal positions) to ``v``."""
    market = sol.market
    theta = np.asarray(sol.theta(np.asarray(z, dtype=float)[..., None]))
    drift = vz * z * market.r + vz * (theta @ market.excess)
    vol2 = np.einsum("...i,ij,...j->...", theta, market.cov, theta)
    return drift + 0.5 * vzz * vol2


def dpe_residual(sol: FrictionlessSolution, z):
    """``U~(v_z) - beta v + L0 v`` at ``z``; zero for the exact solution."""
    v, vz, vzz = value_derivatives(sol, z)
    return dual_utility(vz, sol.gamma) - sol.beta * v + frictionless_generator(sol, z, vz, vzz)
