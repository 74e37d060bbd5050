"""Policy iteration for the penalised ergodic impulse-control problem.

A policy assigns to every grid point a jump, stored as an integer offset in
grid steps (zero means "do not trade").  Under policy ``m`` the chain has
generator ``L + L_K^m``: each trading point jumps to its target at rate ``K``
and pays ``K v_z`` times the trade bracket per unit time while it waits.
Policy evaluation solves the average-cost Poisson equation
``L^m w + f^m = a`` with ``w(0) = 0``; improvement takes the pointwise argmin
over all in-grid targets.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .corrector import CorrectorProblem, running_cost, trade_units
from .errors import ModelError, SolverError
from .geometry import CostVariant
from .grid import Grid, apply_impulse, discretize_generator
from .market import FrictionlessSolution

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Policy:
    offsets: np.ndarray  # (N, d) jumps in grid steps

    def __post_init__(self):
        off = np.array(self.offsets, dtype=np.int64, copy=True)
        if off.ndim != 2:
            raise ModelError("policy offsets must be (N, d)")
        off.setflags(write=False)
        object.__setattr__(self, "offsets", off)

    def __eq__(self, other):
        return isinstance(other, Policy) and np.array_equal(self.offsets, other.offsets)

    def __hash__(self):
        return hash(self.offsets.tobytes())

    @classmethod
    def no_trade(cls, grid: Grid) -> "Policy":
        return cls(np.zeros((grid.N, grid.d), dtype=np.int64))

    @classmethod
    def jump_to_origin(cls, grid: Grid) -> "Policy":
        zero = grid.multi_index[grid.zero_index]
        return cls(zero[None, :] - grid.multi_index)

    @property
    def trading(self) -> np.ndarray:
        return np.any(self.offsets != 0, axis=1)

    def jumps(self, grid: Grid) -> np.ndarray:
        """Jumps in xi-units."""
        return self.offsets * grid.h

    def targets(self, grid: Grid) -> np.ndarray:
        """Linear index of the post-jump point (the point itself when not trading)."""
        return grid.ravel(grid.multi_index + self.offsets)


@dataclass(eq=False)
class PolicySolution:
    grid: Grid
    problem: CorrectorProblem
    w: np.ndarray
    a: float
    policy: Policy
    iterations: int
    K: float
    generator: sp.csr_matrix = field(repr=False)
    a_history: list = field(default_factory=list)
    converged: bool = True
    cycled: bool = False

    def rate_matrix(self) -> sp.csr_matrix:
        return apply_impulse(self.generator, self.policy, self.K, self.grid)

    def running(self) -> np.ndarray:
        return policy_costs(self.policy, self.problem, self.grid, self.K)


def default_penalty(L, factor=100.0) -> float:
    return float(factor * np.abs(L.diagonal()).max())


def policy_costs(policy: Policy, problem: CorrectorProblem, grid: Grid, K: float) -> np.ndarray:
    """Running cost vector ``f^m`` of a policy."""
    f = running_cost(grid.points, problem)
    return f + K * problem.vz * trade_units(policy.jumps(grid), problem)


def policy_evaluation(Lm, f, zero_index: int):
    """Solve ``Lm w + f = a 1`` with ``w[zero_index] = 0``; return ``(w, a)``.

    The unknown ``a`` takes the place of the pinned ``w[zero_index]`` column.
    """
    C = sp.csc_matrix(Lm, dtype=float, copy=True)
    n = C.shape[0]
    f = np.asarray(f, dtype=float)
    j = int(zero_index)
    C.data[C.indptr[j]:C.indptr[j + 1]] = 0.0
    C = C + sp.csc_matrix((-np.ones(n), (np.arange(n), np.full(n, j))), shape=(n, n))
    C.eliminate_zeros()
    with warnings.catch_warnings():
        warnings.simplefilter("error", spla.MatrixRankWarning)
        try:
            x = spla.spsolve(C, -f)
        except (RuntimeError, spla.MatrixRankWarning) as exc:
            raise SolverError("reducible chain or degenerate grid") from exc
    if not np.all(np.isfinite(x)):
        raise SolverError("reducible chain or degenerate grid")
    a = float(x[j])
    w = x.copy()
    w[j] = 0.0
    res = Lm @ w + f - a
    scale = float(np.max(abs(Lm) @ np.abs(w))) + float(np.max(np.abs(f))) + abs(a)
    if np.max(np.abs(res)) > 1e-8 * max(scale, np.finfo(float).tiny):
        raise SolverError("reducible chain or degenerate grid: Poisson residual too large")
    return w, a


def _select(vals, l1, flat):
    """Pick the best candidate per row: lowest value, then shortest jump, then lowest index.

    ``vals``, ``l1``, ``flat`` are ``(n, k)`` candidate arrays that include the
    no-trade candidate (zero jump, value ``w`` itself).
    """
    best = vals.min(axis=1)
    tied = vals == best[:, None]
    key_l1 = np.where(tied, l1, np.inf)
    best_l1 = key_l1.min(axis=1)
    key_idx = np.where(tied & (key_l1 == best_l1[:, None]), flat, np.iinfo(np.int64).max)
    return key_idx.argmin(axis=1)


def _edge_mask(grid: Grid) -> np.ndarray:
    idx = grid.multi_index
    return np.any((idx == 0) | (idx == np.asarray(grid.counts) - 1), axis=1)


def _scan(w, problem: CorrectorProblem, grid: Grid, rows, allowed=None, chunk=None):
    """Exhaustive best jump for ``rows`` over the targets in ``allowed``.

    The zero jump (no trade, value ``w`` itself) competes only where the row's
    own point is allowed.
    """
    N = grid.N
    idx = grid.multi_index
    h = grid.h
    out = np.zeros((rows.size, grid.d), dtype=np.int64)
    chunk = chunk or max(1, int(2e6 // N))
    flat_all = np.arange(N, dtype=np.int64)
    for start in range(0, rows.size, chunk):
        r = rows[start:start + chunk]
        steps = idx[None, :, :] - idx[r, None, :]
        m = steps * h
        vals = w[None, :] + problem.vz * trade_units(m, problem)
        if allowed is not None:
            vals[:, ~allowed] = np.inf
        l1 = np.abs(m).sum(axis=-1)
        pick = _select(vals, l1, np.broadcast_to(flat_all, vals.shape))
        out[start:start + r.size] = steps[np.arange(r.size), pick]
    return out


def _finish(out, w, problem: CorrectorProblem, grid: Grid) -> Policy:
    """Force trading on the grid edge and make every target a no-trade point.

    Edge points jump to their best interior no-trade point.  A trade landing
    on a trading point is then replaced by the composite trade; brackets are
    subadditive, so this never costs more.  Away from the edge the greedy
    choice already lands on no-trade points and nothing changes.
    """
    edge = _edge_mask(grid)
    idx = grid.multi_index
    still = ~np.any(out != 0, axis=1)
    allowed = still & ~edge
    rows = np.flatnonzero(edge)
    if allowed.any():
        out[rows] = _scan(w, problem, grid, rows, allowed)
    else:
        out[rows] = idx[grid.zero_index] - idx[rows]
    tgt = grid.ravel(idx + out)
    for _ in range(grid.N):
        hop = np.any(out[tgt] != 0, axis=1) & np.any(out != 0, axis=1)
        if not hop.any():
            break
        tgt[hop] = tgt[tgt[hop]]
        out = idx[tgt] - idx
    return Policy(out)


def _improve_naive(w, problem: CorrectorProblem, grid: Grid, chunk=None):
    out = _scan(w, problem, grid, np.arange(grid.N), None, chunk)
    return _finish(out, w, problem, grid)


def _l1_sweep(values, targets, axis, step):
    """In-place exact L1 min-convolution of ``values`` along ``axis``.

    After the call ``values[i] = min_j values[j] + step |i - j|`` along the
    axis and ``targets`` carries the minimising multi-index.
    """
    G = np.moveaxis(values, axis, 0)
    T = np.moveaxis(targets, axis, 0)
    n = G.shape[0]
    for i in range(1, n):
        cand = G[i - 1] + step
        better = cand < G[i]
        G[i] = np.where(better, cand, G[i])
        T[i][better] = T[i - 1][better]
    for i in range(n - 2, -1, -1):
        cand = G[i + 1] + step
        better = cand < G[i]
        G[i] = np.where(better, cand, G[i])
        T[i][better] = T[i + 1][better]


def _improve_fast(w, problem: CorrectorProblem, grid: Grid):
    d = grid.d
    h = grid.h
    vz = problem.vz
    slope = vz * problem.nu_p
    if problem.variant is CostVariant.PER_ASSET_FIXED:
        subsets = [s for k in range(1, d + 1) for s in combinations(range(d), k)]
    else:
        subsets = [tuple(range(d))]
    idx = grid.multi_index
    here = np.arange(grid.N)
    cand_flat = [here]
    for axes in subsets:
        vals = w.reshape(grid.shape).copy()
        tgt = idx.reshape(grid.shape + (d,)).copy()
        for k in axes:
            _l1_sweep(vals, tgt, k, slope * h[k])
        cand_flat.append(grid.ravel(tgt.reshape(-1, d)))
    flat = np.stack(cand_flat, axis=1)
    steps = idx[flat] - idx[:, None, :]
    m = steps * h
    vals = w[flat] + vz * trade_units(m, problem)
    vals[:, 0] = w
    l1 = np.abs(m).sum(axis=-1)
    pick = _select(vals, l1, flat)
    return _finish(steps[here, pick], w, problem, grid)


def policy_improvement(w, problem: CorrectorProblem, grid: Grid, method="fast") -> Policy:
    """Greedy policy for the potential ``w``.

    The diffusion part ``(L w)(xi)`` and the running cost are shared by every
    candidate, so trading from ``xi`` to ``xi'`` wins iff
    ``w(xi') + v_z * trade_units(xi' - xi) < w(xi)``; the penalty ``K`` cancels.
    ``method="naive"`` scans all targets (O(N^2)); ``"fast"`` uses separable
    L1 sweeps and gives the same policy.

    Points on the grid edge always trade, to their best interior no-trade
    point: the truncated domain is meant to hold the whole no-trade region,
    and the reflecting edge otherwise admits a spurious inaction fixed point
    there.
    """
    w = np.asarray(w, dtype=float)
    if not np.all(np.isfinite(w)):
        raise SolverError("potential is not finite")
    if method == "naive":
        return _improve_naive(w, problem, grid)
    if method == "fast":
        return _improve_fast(w, problem, grid)
    raise ValueError(f"unknown improvement method {method!r}")


def solve_corrector(
    problem: CorrectorProblem,
    grid: Grid,
    tau: float = 0.0,
    max_iters: int = 100,
    K: float | None = None,
    K_factor: float = 100.0,
    method: str = "fast",
    initial: Policy | None = None,
) -> PolicySolution:
    """Run policy iteration from the jump-to-origin policy.

    Halts when the improved policy equals the current one or when successive
    ergodic costs differ by at most ``tau``.  If a policy repeats without
    being a fixed point the best iterate seen is returned with ``cycled`` set.
    """
    if grid.d != problem.d:
        raise ModelError("grid dimension does not match problem")
    if tau < 0:
        raise ModelError("tolerance must be nonnegative")
    if problem.variant is CostVariant.PROPORTIONAL_ONLY and problem.nu_p <= 0:
        raise ModelError("proportional-only problem needs nu_p > 0")
    L = discretize_generator(grid, problem.A)
    if K is None:
        K = problem.K if problem.K is not None else default_penalty(L, K_factor)
    f_base = running_cost(grid.points, problem)
    policy = initial if initial is not None else Policy.jump_to_origin(grid)
    h = grid.h
    history = []
    seen = {}
    a_prev = np.inf

    def pack(w, a, pol, it, converged=True, cycled=False):
        return PolicySolution(grid, problem, w, a, pol, it, float(K), L, list(history), converged, cycled)

    for it in range(1, max_iters + 1):
        Lm = apply_impulse(L, policy, K, grid)
        f = f_base + K * problem.vz * trade_units(policy.offsets * h, problem)
        w, a = policy_evaluation(Lm, f, grid.zero_index)
        history.append(a)
        log.debug("iteration %d: a = %.17g, trading points = %d", it, a, int(policy.trading.sum()))
        new = policy_improvement(w, problem, grid, method)
        if new == policy or abs(a_prev - a) <= tau:
            return pack(w, a, policy, it)
        seen[policy] = (a, w, it)
        if new in seen:
            best = min(seen.items(), key=lambda kv: kv[1][0])
            pol, (a_b, w_b, it_b) = best
            log.warning("policy iteration cycled; returning best iterate %d", it_b)
            return pack(w_b, a_b, pol, it, converged=False, cycled=True)
        a_prev = a
        policy = new
    raise SolverError(
        f"policy iteration did not converge in {max_iters} iterations",
        last=pack(w, a, policy, max_iters, converged=False),
    )


def second_corrector_solve(z_grid, a_values, sol: FrictionlessSolution) -> np.ndarray:
    """Solve ``beta u - L0 u + kappa u_z = a(z)`` on an increasing wealth grid.

    In wealth the equation reads ``beta u - b(z) u_z - s(z) u_zz = a`` with
    ``b = z (r + e.pi - m)`` and ``s = z^2 pi^T Sigma pi / 2``.  Interior rows use
    central differences where they are monotone and upwinding otherwise; the
    end rows impose ``u(z1)/u(z0) = (z1/z0)^(1-gamma)``, i.e. power-law decay
    matched in log-derivative.
    """
    z = np.asarray(z_grid, dtype=float)
    a = np.asarray(a_values, dtype=float)
    if z.ndim != 1 or z.size < 3 or a.shape != z.shape:
        raise ModelError("need matching wealth and cost arrays with at least 3 points")
    if np.any(z <= 0) or np.any(np.diff(z) <= 0):
        raise ModelError("wealth grid must be positive and increasing")
    market = sol.market
    beta, g = sol.beta, sol.gamma
    if not beta > 0:
        raise SolverError("indefinite discretization: beta must be positive")
    b0 = market.r + float(market.excess @ sol.pi) - sol.m_rate
    s0 = 0.5 * float(sol.pi @ market.cov @ sol.pi)
    n = z.size
    M = sp.lil_matrix((n, n))
    rhs = a.copy()
    for i in range(1, n - 1):
        hm, hp = z[i] - z[i - 1], z[i + 1] - z[i]
        b, s = b0 * z[i], s0 * z[i] ** 2
        dm = 2 * s / (hm * (hm + hp))
        dp = 2 * s / (hp * (hm + hp))
        cp = b / (hm + hp)
        if dp + cp >= 0 and dm - cp >= 0:
            up, lo = dp + cp, dm - cp
        else:
            up, lo = dp + max(b, 0) / hp, dm + max(-b, 0) / hm
        if up < 0 or lo < 0:
            raise SolverError("indefinite discretization")
        M[i, i - 1] = -lo
        M[i, i + 1] = -up
        M[i, i] = beta + up + lo
    M[0, 0] = -((z[1] / z[0]) ** (1.0 - g))
    M[0, 1] = 1.0
    M[n - 1, n - 1] = 1.0
    M[n - 1, n - 2] = -((z[-1] / z[-2]) ** (1.0 - g))
    rhs[0] = rhs[-1] = 0.0
    u = spla.spsolve(M.tocsr(), rhs)
    if not np.all(np.isfinite(u)):
        raise SolverError("indefinite discretization")
    return u
