"""
The frictionless starting point
===============================

Without transaction costs the investor holds a constant fraction of wealth
in each risky asset.  Everything the solver does is measured against this
Merton position, so we start by computing it together with the diffusion
covariance of the deviation from it.
"""

import numpy as np

from tcmerton import MarketModel, Preferences, alpha_matrix, merton_solution, value_derivatives

# Two assets with correlated returns and a fairly risk-averse investor.
market = MarketModel.from_correlation(r=0.03, mu=[0.08, 0.04], sigmas=[0.4, 0.2], rho=0.35)
prefs = Preferences(beta=1.0, gamma=7.0)
sol = merton_solution(market, prefs)

print("Merton fractions:", sol.pi)
print("ratio of the two holdings: %.3f" % (sol.pi[0] / sol.pi[1]))

# The value function is a power of wealth; its first two derivatives set the
# price of a trade (v_z) and the penalty for sitting away from Merton (v_zz).
z = 12345.67
v, vz, vzz = value_derivatives(sol, z)
print("v = %.6g, v_z = %.6g, v_zz = %.6g" % (v, vz, vzz))

# Prices move the holdings away from the target fractions.  In the fast
# variable this is a driftless diffusion with covariance A = alpha alpha^T.
alpha, A = alpha_matrix(z, sol)
print("diffusion covariance of the deviation:")
print(np.array2string(A, precision=3))
