"""
Paying a fee per asset traded
=============================

When each asset carries its own fixed fee, rebalancing only one of them is
often enough.  The region then splits into cells that trade asset 1, asset 2
or both, and single-asset trades move straight along their own axis.
"""

from pathlib import Path

import numpy as np

from tcmerton.config import load_config
from tcmerton.regions import NO_TRADE, TRADE_ASSET1, TRADE_ASSET2, TRADE_BOTH
from tcmerton.runner import solve_at

cfg = load_config(Path(__file__).resolve().parents[1] / "configs" / "per_asset_rho030.json")
res = solve_at(cfg, cfg.z[0])
rm = res.regions
off = res.solution.policy.offsets

names = {NO_TRADE: "no trade", TRADE_ASSET1: "asset 1 only", TRADE_ASSET2: "asset 2 only", TRADE_BOTH: "both"}
for label, name in names.items():
    print("%-13s %6d cells" % (name, int((rm.labels == label).sum())))

# Each single-asset trade changes one coordinate, so its targets trace a
# line across the region.  With correlated assets the line leans: the best
# holding of asset 1 depends on how far asset 2 has drifted.
g = rm.grid
for label, k in ((TRADE_ASSET1, 0), (TRADE_ASSET2, 1)):
    sel = (rm.labels == label) & (off[:, k] > 0)
    pts = g.points[np.unique(rm.target_index[sel])]
    slope = np.polyfit(pts[:, 1 - k], pts[:, k], 1)[0]
    print("asset %d targets: %d points, slope %.3f against the other coordinate" % (k + 1, len(pts), slope))
