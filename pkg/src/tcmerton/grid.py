"""Tensor grids in xi-space and the Markov-chain generator of a driftless diffusion.

Points are ordered C-style (last axis fastest), so a multi-index and its
linear index are related by :func:`numpy.ravel_multi_index`.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import combinations

import numpy as np
import scipy.sparse as sp

from .errors import ModelError


@dataclass(frozen=True)
class Grid:
    lower: tuple
    upper: tuple
    counts: tuple

    def __post_init__(self):
        lower = tuple(float(v) for v in np.atleast_1d(self.lower))
        upper = tuple(float(v) for v in np.atleast_1d(self.upper))
        counts = tuple(int(v) for v in np.atleast_1d(self.counts))
        if not (len(lower) == len(upper) == len(counts)) or not counts:
            raise ModelError("grid extents and counts must have matching, nonzero length")
        for lo, hi, n in zip(lower, upper, counts):
            if n < 3:
                raise ModelError("need at least 3 points per dimension")
            if not lo < 0 < hi:
                raise ModelError("grid must contain xi = 0 strictly inside")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "counts", counts)

    @classmethod
    def symmetric(cls, half_widths, counts):
        half = np.atleast_1d(np.asarray(half_widths, dtype=float))
        counts = np.broadcast_to(np.atleast_1d(counts), half.shape)
        return cls(tuple(-half), tuple(half), tuple(counts))

    @property
    def d(self) -> int:
        return len(self.counts)

    @property
    def shape(self) -> tuple:
        return self.counts

    @property
    def N(self) -> int:
        return int(np.prod(self.counts))

    @cached_property
    def h(self) -> np.ndarray:
        return np.array([(hi - lo) / (n - 1) for lo, hi, n in zip(self.lower, self.upper, self.counts)])

    @cached_property
    def axes(self) -> list:
        return [np.linspace(lo, hi, n) for lo, hi, n in zip(self.lower, self.upper, self.counts)]

    @cached_property
    def multi_index(self) -> np.ndarray:
        """``(N, d)`` integer multi-indices of all points."""
        idx = np.indices(self.counts).reshape(self.d, -1).T
        idx.setflags(write=False)
        return idx

    @cached_property
    def points(self) -> np.ndarray:
        """``(N, d)`` coordinates of all points."""
        pts = np.stack([ax[self.multi_index[:, k]] for k, ax in enumerate(self.axes)], axis=1)
        pts.setflags(write=False)
        return pts

    @cached_property
    def zero_index(self) -> int:
        near = [int(np.argmin(np.abs(ax))) for ax in self.axes]
        return int(np.ravel_multi_index(near, self.counts))

    def ravel(self, multi):
        return np.ravel_multi_index(tuple(np.asarray(multi).T), self.counts)

    def unravel(self, flat):
        return np.stack(np.unravel_index(np.asarray(flat), self.counts), axis=-1)

    def contains(self, multi) -> np.ndarray:
        multi = np.asarray(multi)
        return np.all((multi >= 0) & (multi < np.asarray(self.counts)), axis=-1)


def _stencil(A, h):
    """Offsets and rates of the monotone stencil for covariance ``A``.

    Each cross term ``A_kl`` is carried by the two diagonal neighbours along
    ``e_k + sign(A_kl) e_l`` and subtracted from the axis rates, which keeps the
    second moments exact.
    """
    d = len(h)
    offsets, rates = [], []
    axis_rate = np.array([A[k, k] / (2 * h[k] ** 2) for k in range(d)])
    for k, l in combinations(range(d), 2):
        a = A[k, l]
        if a == 0:
            continue
        c = abs(a) / (2 * h[k] * h[l])
        axis_rate[k] -= c
        axis_rate[l] -= c
        e = np.zeros(d, dtype=int)
        e[k], e[l] = 1, int(np.sign(a))
        offsets += [e, -e]
        rates += [c, c]
    scale = max(abs(A[k, k]) / h[k] ** 2 for k in range(d))
    if np.any(axis_rate < -1e-12 * scale):
        raise ModelError("grid anisotropy violates monotone stencil; adjust mesh ratio")
    axis_rate = np.maximum(axis_rate, 0.0)
    for k in range(d):
        e = np.zeros(d, dtype=int)
        e[k] = 1
        offsets += [e, -e]
        rates += [axis_rate[k], axis_rate[k]]
    return offsets, rates


def monotone_ratio_bounds(A, k, l):
    """Admissible interval for ``h_k / h_l`` under the monotone cross stencil."""
    a = abs(A[k, l])
    if a == 0:
        return 0.0, np.inf
    return a / A[l, l], A[k, k] / a


def discretize_generator(grid: Grid, A) -> sp.csr_matrix:
    """Generator of ``d xi = alpha dB`` (covariance ``A``) with reflecting edges.

    Moves that would leave the grid are dropped, so every row sums to zero and
    the off-diagonal rates stay nonnegative.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape != (grid.d, grid.d):
        raise ModelError("covariance dimension does not match grid")
    offsets, rates = _stencil(A, grid.h)
    src = grid.multi_index
    rows, cols, vals = [], [], []
    for off, rate in zip(offsets, rates):
        if rate == 0:
            continue
        dst = src + off
        ok = grid.contains(dst)
        rows.append(np.flatnonzero(ok))
        cols.append(grid.ravel(dst[ok]))
        vals.append(np.full(int(ok.sum()), rate))
    rows = np.concatenate(rows) if rows else np.zeros(0, dtype=int)
    cols = np.concatenate(cols) if cols else np.zeros(0, dtype=int)
    vals = np.concatenate(vals) if vals else np.zeros(0)
    off = sp.csr_matrix((vals, (rows, cols)), shape=(grid.N, grid.N))
    diag = -np.asarray(off.sum(axis=1)).ravel()
    return (off + sp.diags(diag)).tocsr()


def apply_impulse(L, policy, K: float, grid: Grid) -> sp.csr_matrix:
    """Add the penalised jumps: rate ``K`` from each trading point to its target."""
    offsets = np.asarray(policy.offsets if hasattr(policy, "offsets") else policy, dtype=int)
    trading = np.any(offsets != 0, axis=1)
    src = np.flatnonzero(trading)
    dst = grid.multi_index[src] + offsets[src]
    if not np.all(grid.contains(dst)):
        raise ModelError("policy jump leaves the grid")
    dst = grid.ravel(dst)
    n = grid.N
    jump = sp.csr_matrix(
        (np.concatenate([np.full(src.size, -K), np.full(src.size, K)]),
         (np.concatenate([src, src]), np.concatenate([src, dst]))),
        shape=(n, n),
    )
    return (L + jump).tocsr()


def check_rate_matrix(L, tol=1e-12):
    """Raise unless ``L`` is a valid generator: nonnegative off-diagonals, zero row sums."""
    L = sp.csr_matrix(L)
    offdiag = L - sp.diags(L.diagonal())
    if offdiag.nnz and offdiag.data.min() < 0:
        raise ModelError("negative off-diagonal rate")
    scale = max(float(np.abs(L.diagonal()).max()), 1.0)
    rowsum = np.abs(np.asarray(L.sum(axis=1)).ravel())
    if rowsum.size and rowsum.max() > tol * scale:
        raise ModelError("generator rows do not sum to zero")
