"""Brute-force references shared by the solver and acceptance tests."""

import numpy as np

from tcmerton import Policy, policy_evaluation
from tcmerton.grid import apply_impulse, discretize_generator
from tcmerton.solver import policy_costs


def threshold_oracle(problem, grid, K):
    """Minimal ergodic cost over all two-sided threshold policies on a 1-D grid.

    A policy is a no-trade interval ``[lo, hi]`` of interior indices with one
    restart index per side inside it; the two edge points always trade.
    """
    L = discretize_generator(grid, problem.A)
    n = grid.N
    best = np.inf
    for lo in range(1, n - 1):
        for hi in range(lo, n - 1):
            for tl in range(lo, hi + 1):
                for tr in range(lo, hi + 1):
                    off = np.zeros((n, 1), dtype=int)
                    off[:lo, 0] = tl - np.arange(lo)
                    off[hi + 1:, 0] = tr - np.arange(hi + 1, n)
                    pol = Policy(off)
                    Lm = apply_impulse(L, pol, K, grid)
                    _, a = policy_evaluation(Lm, policy_costs(pol, problem, grid, K), grid.zero_index)
                    best = min(best, a)
    return best
