"""
Where the portfolio spends its time
===================================

Under the optimal policy the deviation from Merton is a Markov chain on the
grid.  Its invariant law can be computed exactly or estimated by simulation;
the two should agree, and the restart points should carry extra mass.
"""

from pathlib import Path

import numpy as np

from tcmerton.config import load_config
from tcmerton.export import write_ppm
from tcmerton.longterm import simulate_occupation, stationary_distribution
from tcmerton.regions import principal_axis
from tcmerton.runner import solve_at

cfg = load_config(Path(__file__).resolve().parents[1] / "configs" / "occupation_gamma3.json")
res = solve_at(cfg, cfg.z[0])
grid = res.solution.grid
Lm = res.solution.rate_matrix()

exact = stationary_distribution(Lm, grid)
for steps in (10**4, 10**5, 10**6):
    mc = simulate_occupation(Lm, steps, seed=1, grid=grid)
    print("%8d simulated jumps: total variation to the exact law %.4f" % (steps, exact.total_variation(mc)))

rm = res.regions
targets = np.unique(rm.target_index[rm.target_index >= 0])
print("mass inside the no-trade region: %.4f" % exact.density[rm.no_trade].sum())
print("mean density on targets / elsewhere inside: %.2f" % (
    exact.density[targets].mean() / exact.density[rm.no_trade].mean()))

# With positively correlated assets the mass spreads along the long axis
# of the region, the direction in which the two deviations offset.
axis, _ = principal_axis(exact.density, grid)
print("principal axis of the long-run law:", np.round(axis, 3))

write_ppm("long_run_density.ppm", exact.density, grid, targets)
print("heatmap written to long_run_density.ppm")
