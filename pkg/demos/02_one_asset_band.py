"""
One asset: policy iteration against the smooth-fit solution
===========================================================

With a single risky asset the corrector problem has a semi-analytic
solution: a quartic potential inside the no-trade band that pastes smoothly
onto a linear function outside.  Policy iteration on a grid should land on
the same trigger and restart points.
"""

import numpy as np

from tcmerton import CostStructure, MarketModel, Preferences, make_problem, smoothfit_1d, solve_corrector
from tcmerton.analytic import auto_grid
from tcmerton.regions import boundary_extract, classify

market = MarketModel(r=0.01, mu=[0.04], sigma=[[0.2]])
prefs = Preferences(beta=1.0, gamma=5.0)
costs = CostStructure(lambda_f=1.0, lambda_p=0.03)

print("%10s %10s %10s %10s %10s %8s" % ("z", "b (PI)", "b (fit)", "x* (PI)", "x* (fit)", "cells"))
for z in [100.0, 1000.0, 10000.0, 100000.0]:
    problem = make_problem(market, prefs, costs, z)
    fit = smoothfit_1d(problem)

    # the grid extends three predicted band widths on each side
    grid = auto_grid(problem, 201)
    sol = solve_corrector(problem, grid)
    bnd = boundary_extract(classify(sol))
    trigger = float(bnd.polylines[1][0, 0])
    target = float(np.abs(bnd.targets[:, 0]).max())
    dev = max(abs(trigger - fit.b), abs(target - fit.xi_star)) / grid.h[0]
    print("%10.0f %10.2f %10.2f %10.2f %10.2f %8.2f" % (z, trigger, fit.b, target, fit.xi_star, dev))

# As wealth grows the proportional part of the cost dominates and the
# restart point moves towards the trigger: relative to wealth both shrink.
