"""Trade-region maps of a converged policy.

Each cell is labelled by the support of its jump as a bitmask: bit ``i`` is
set when asset ``i`` is traded.  For two assets this gives the four classes
``NO_TRADE``, ``TRADE_ASSET1``, ``TRADE_ASSET2`` and ``TRADE_BOTH``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import ModelError
from .grid import Grid

NO_TRADE, TRADE_ASSET1, TRADE_ASSET2, TRADE_BOTH = 0, 1, 2, 3


@dataclass(frozen=True, eq=False)
class RegionMap:
    grid: Grid
    z: float
    labels: np.ndarray  # (N,) support bitmask
    targets: np.ndarray  # (N, d) post-trade coordinates, nan where not trading
    target_index: np.ndarray  # (N,) linear index of target, -1 where not trading
    boundary: np.ndarray  # linear indices of no-trade cells next to trading cells
    touches_edge: bool

    @property
    def no_trade(self) -> np.ndarray:
        return self.labels == NO_TRADE

    def __eq__(self, other):
        return (
            isinstance(other, RegionMap)
            and self.grid == other.grid
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.target_index, other.target_index)
            and np.array_equal(self.boundary, other.boundary)
            and self.touches_edge == other.touches_edge
        )


@dataclass(frozen=True)
class BoundaryData:
    polylines: list  # arrays of shape (k, d) in xi-units
    targets: np.ndarray  # unique target points, xi-units
    z: float

    @property
    def relative_polylines(self):
        return [p / self.z for p in self.polylines]

    @property
    def relative_targets(self):
        return self.targets / self.z


def classify(solution) -> RegionMap:
    grid = solution.grid
    off = solution.policy.offsets
    bits = (1 << np.arange(grid.d)).astype(np.int64)
    labels = ((off != 0) * bits).sum(axis=1)
    trading = labels != NO_TRADE
    tidx = solution.policy.targets(grid)
    target_index = np.where(trading, tidx, -1)
    targets = np.where(trading[:, None], grid.points[tidx], np.nan)

    inside = (~trading).reshape(grid.shape)
    trade = trading.reshape(grid.shape)
    footprint = ndimage.generate_binary_structure(grid.d, 1)
    near_trade = ndimage.binary_dilation(trade, structure=footprint)
    boundary = np.flatnonzero((inside & near_trade).ravel())

    # edge points trade by construction, so look one layer in as well
    mi = grid.multi_index
    near_edge = np.any((mi <= 1) | (mi >= np.asarray(grid.counts) - 2), axis=1).reshape(grid.shape)
    touches = bool((inside & near_edge).any())
    return RegionMap(grid, float(solution.problem.z), labels, targets, target_index, boundary, touches)


def boundary_extract(rmap: RegionMap) -> BoundaryData:
    """Contour of the no-trade indicator at level 1/2 plus the distinct targets.

    In one dimension the contour is the pair of midpoints between the
    outermost no-trade cells and their trading neighbours.
    """
    grid = rmap.grid
    inside = rmap.no_trade.reshape(grid.shape).astype(float)
    if not inside.any():
        raise ModelError("empty no-trade set")
    tgt = rmap.target_index[rmap.target_index >= 0]
    targets = grid.points[np.unique(tgt)] if tgt.size else np.zeros((0, grid.d))
    if grid.d == 1:
        x = grid.axes[0]
        cells = np.flatnonzero(inside > 0)
        lo, hi = cells.min(), cells.max()
        left = 0.5 * (x[lo] + x[lo - 1]) if lo > 0 else x[lo]
        right = 0.5 * (x[hi] + x[hi + 1]) if hi < x.size - 1 else x[hi]
        return BoundaryData([np.array([[left]]), np.array([[right]])], targets, rmap.z)
    if grid.d != 2:
        pts = grid.points[rmap.boundary]
        return BoundaryData([pts], targets, rmap.z)
    from skimage.measure import find_contours

    padded = np.pad(inside, 1)
    lines = []
    for c in find_contours(padded, 0.5):
        c = c - 1.0
        coords = np.column_stack([np.asarray(grid.lower[k]) + c[:, k] * grid.h[k] for k in range(2)])
        lines.append(coords)
    return BoundaryData(lines, targets, rmap.z)


def target_interior(rmap: RegionMap) -> bool:
    """True when no trade lands on a trading cell."""
    tgt = rmap.target_index[rmap.target_index >= 0]
    return bool(np.all(rmap.labels[tgt] == NO_TRADE))


def is_convex(rmap: RegionMap, tol_cells: float = 2.0) -> bool:
    """Lattice convexity test of the no-trade set.

    The set fails when the midpoint of two boundary cells lands on a trading
    cell farther than ``tol_cells`` (in cell units) from every no-trade cell.
    Digitising a convex set never produces such a midpoint.
    """
    grid = rmap.grid
    inside = rmap.no_trade.reshape(grid.shape)
    if not inside.any():
        raise ModelError("empty no-trade set")
    dist = ndimage.distance_transform_edt(~inside)
    b = grid.multi_index[rmap.boundary].astype(float)
    if len(b) < 2:
        return True
    for i in range(len(b)):
        mid = np.rint(0.5 * (b[i] + b[i + 1:])).astype(int)
        if mid.size and np.any(dist[tuple(mid.T)] > tol_cells):
            return False
    return True


def convexity_deficit(rmap: RegionMap) -> float:
    """Depth in cells of the deepest gap between the no-trade set and its convex hull.

    Digitising a convex set leaves gaps of about one cell; a deficit that
    grows with grid refinement marks a genuinely non-convex region.
    """
    from skimage.morphology import convex_hull_image

    grid = rmap.grid
    if grid.d != 2:
        raise ModelError("convexity deficit needs a two-dimensional grid")
    inside = rmap.no_trade.reshape(grid.shape)
    if not inside.any():
        raise ModelError("empty no-trade set")
    gap = convex_hull_image(inside) & ~inside
    if not gap.any():
        return 0.0
    return float(ndimage.distance_transform_edt(gap).max())


def principal_axis(weights, grid: Grid):
    """Unit principal eigenvector (largest variance) of a density on a 2-D grid."""
    wts = np.asarray(weights, dtype=float)
    wts = wts / wts.sum()
    p = grid.points
    mean = wts @ p
    c = p - mean
    cov = (c * wts[:, None]).T @ c
    vals, vecs = np.linalg.eigh(cov)
    return vecs[:, -1], vals


def relative_size(rmap: RegionMap) -> float:
    """Size of the no-trade set relative to wealth: volume^(1/d) / z."""
    vol = float(rmap.no_trade.sum() * np.prod(rmap.grid.h))
    return vol ** (1.0 / rmap.grid.d) / rmap.z
