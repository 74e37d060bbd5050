"""Long-run distribution of the controlled position in xi-space.

Two routes are provided: an exact solve of ``mu^T L = 0`` for the rate matrix
of a policy and a continuous-time Markov-chain simulation that accumulates
holding time per state.  The simulation is split into a fixed number of
replicas with independent seed streams, so its output does not depend on how
many threads run them.
"""

from __future__ import annotations

import bisect
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import spsolve

from .errors import ModelError, SolverError
from .grid import Grid


@dataclass(frozen=True)
class Stationary:
    pass


@dataclass(frozen=True)
class MonteCarlo:
    seed: int
    steps: int
    replicas: int


@dataclass(frozen=True, eq=False)
class OccupationMeasure:
    density: np.ndarray
    source: object
    grid: Grid | None = None

    def __post_init__(self):
        dens = np.asarray(self.density, dtype=float)
        if dens.ndim != 1 or np.any(dens < 0):
            raise ModelError("density must be a nonnegative vector")
        if abs(dens.sum() - 1.0) > 1e-12:
            raise ModelError("density must sum to 1")
        dens.setflags(write=False)
        object.__setattr__(self, "density", dens)

    def total_variation(self, other: "OccupationMeasure") -> float:
        return 0.5 * float(np.abs(self.density - other.density).sum())


def _as_rate_matrix(Lm) -> sp.csr_matrix:
    Lm = sp.csr_matrix(Lm, dtype=float)
    if Lm.shape[0] != Lm.shape[1] or Lm.shape[0] == 0:
        raise ModelError("rate matrix must be square and nonempty")
    return Lm


def _off_diagonal(Lm: sp.csr_matrix) -> sp.csr_matrix:
    off = (Lm - sp.diags(Lm.diagonal())).tocsr()
    off.eliminate_zeros()
    return off


def stationary_distribution(Lm, grid: Grid | None = None) -> OccupationMeasure:
    """Exact invariant law of the chain with rate matrix ``Lm``."""
    Lm = _as_rate_matrix(Lm)
    n = Lm.shape[0]
    off = _off_diagonal(Lm)
    if n > 1:
        ncomp, _ = connected_components(off, directed=True, connection="strong")
        if ncomp > 1:
            raise SolverError("reducible chain: stationary distribution is not unique")
    # replace one balance equation by the normalisation
    M = Lm.T.tolil()
    M[n - 1, :] = np.ones(n)
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    mu = spsolve(M.tocsc(), rhs)
    mu = np.where(mu < 0, 0.0, mu)
    mu = mu / mu.sum()
    scale = float((abs(Lm).T @ mu).max())
    res = float(np.abs(Lm.T @ mu).max())
    if res > 1e-10 * max(scale, 1.0):
        raise SolverError(f"stationary residual {res:.3g} too large")
    return OccupationMeasure(mu, Stationary(), grid)


def _run_replica(indptr, cols, cums, exit_rate, start, steps, seed_seq):
    rng = np.random.default_rng(seed_seq)
    hold = rng.standard_exponential(steps).tolist()
    unif = rng.random(steps).tolist()
    visits_time = {}
    state = start
    for k in range(steps):
        q = exit_rate[state]
        dt = hold[k] / q
        visits_time[state] = visits_time.get(state, 0.0) + dt
        lo, hi = indptr[state], indptr[state + 1]
        j = bisect.bisect_right(cums, unif[k] * cums[hi - 1], lo, hi - 1)
        state = cols[j]
    return visits_time


def simulate_occupation(
    Lm,
    steps: int,
    seed: int,
    grid: Grid | None = None,
    start: int | None = None,
    replicas: int = 8,
    threads: int = 1,
) -> OccupationMeasure:
    """Time-weighted occupancy of ``steps`` simulated jumps of the chain.

    Holding times are exponential with the exit rate of the current state;
    the next state is drawn from the off-diagonal row.  The jumps are split
    over ``replicas`` paths started at ``start`` (the grid origin by default),
    each with its own spawned seed stream, and merged by summed holding time.
    """
    if int(steps) != steps or steps <= 0:
        raise ModelError("steps must be a positive integer")
    if replicas < 1 or threads < 1:
        raise ModelError("replicas and threads must be positive")
    steps = int(steps)
    Lm = _as_rate_matrix(Lm)
    n = Lm.shape[0]
    off = _off_diagonal(Lm)
    if off.nnz and off.data.min() < 0:
        raise ModelError("negative off-diagonal rate")
    exit_rate = np.asarray(off.sum(axis=1)).ravel()
    if np.any(exit_rate <= 0):
        raise SolverError("absorbing state in the chain")
    if start is None:
        start = grid.zero_index if grid is not None else 0
    if not 0 <= start < n:
        raise ModelError("start state outside the chain")

    # cumulative rates per row, laid out like the CSR data
    cums = np.empty_like(off.data)
    for i in range(n):
        lo, hi = off.indptr[i], off.indptr[i + 1]
        cums[lo:hi] = np.cumsum(off.data[lo:hi])
    indptr = off.indptr.tolist()
    cols = off.indices.tolist()
    cums_l = cums.tolist()
    rates_l = exit_rate.tolist()

    replicas = min(replicas, steps)
    base, extra = divmod(steps, replicas)
    counts = [base + (i < extra) for i in range(replicas)]
    seeds = np.random.SeedSequence(seed).spawn(replicas)
    work = [(indptr, cols, cums_l, rates_l, start, c, s) for c, s in zip(counts, seeds)]
    if threads == 1:
        parts = [_run_replica(*w) for w in work]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda w: _run_replica(*w), work))

    # merge in replica order so the floating-point sum is fixed
    occ = np.zeros(n)
    for part in parts:
        keys = np.fromiter(part.keys(), dtype=np.int64, count=len(part))
        vals = np.fromiter(part.values(), dtype=float, count=len(part))
        order = np.argsort(keys)
        np.add.at(occ, keys[order], vals[order])
    total = math.fsum(occ)
    return OccupationMeasure(occ / total, MonteCarlo(int(seed), steps, replicas), grid)
