"""Semi-analytic benchmarks for the corrector problem.

In one dimension the potential is an even quartic inside the no-trade band,
``w'' = (v_zz Sigma xi^2 + 2a) / A``, and grows linearly outside it.  The
trigger ``b``, the target ``xi*`` and the ergodic cost ``a`` follow from

* smooth fit at the trigger:        ``w'(b) = v_z nu_p``
* first-order optimality of target: ``w'(xi*) = v_z nu_p``
* value matching:                   ``w(b) - w(xi*) = v_z (F + nu_p (b - xi*))``

with ``F = 1`` for a fixed fee and ``F = 0`` for purely proportional costs
(where trigger and target merge).  All computations work in units of ``v_z``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from .corrector import CorrectorProblem
from .errors import ModelError, SolverError
from .geometry import CostVariant
from .grid import Grid, monotone_ratio_bounds

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SmoothFit1D:
    b: float
    xi_star: float
    a: float
    c4: float
    c2: float
    c0: float
    vz: float
    fixed: float
    nu_p: float

    def potential(self, xi):
        """The potential ``w`` (normalised by ``w(0) = 0``) on the whole line."""
        xi = np.abs(np.asarray(xi, dtype=float))
        inner = self.c4 * xi**4 + self.c2 * xi**2 + self.c0
        w_star = self.c4 * self.xi_star**4 + self.c2 * self.xi_star**2 + self.c0
        outer = w_star + self.vz * (self.fixed + self.nu_p * (xi - self.xi_star))
        return np.where(xi <= self.b, inner, outer)

    def slope(self, xi):
        xi = np.asarray(xi, dtype=float)
        return 4 * self.c4 * xi**3 + 2 * self.c2 * xi

    def residuals(self):
        """Relative residuals of the three defining conditions."""
        p = self.vz * self.nu_p
        quart = lambda x: self.c4 * x**4 + self.c2 * x**2 + self.c0  # noqa: E731
        scale = self.vz * max(1.0, self.nu_p * self.b)
        return np.array([
            (self.slope(self.b) - p) / scale * self.b,
            (self.slope(self.xi_star) - p) / scale * self.b,
            (quart(self.b) - quart(self.xi_star) - self.vz * (self.fixed + self.nu_p * (self.b - self.xi_star))) / scale,
        ])


def _fixed_units(problem: CorrectorProblem) -> float:
    return 0.0 if problem.variant is CostVariant.PROPORTIONAL_ONLY else 1.0


def _scaled_smoothfit(C, A, F, P):
    """Solve for ``(a_hat, b, xi*)`` in units of ``v_z``.

    ``C`` is the running-cost curvature ``-v_zz Sigma / (2 v_z)``, ``F`` and ``P``
    the fixed and proportional parts of the trade bracket.
    """
    def slope(x, a):
        return (2 * a * x - (2 * C / 3) * x**3) / A

    def pot(x, a):
        return (a * x * x - (C / 6) * x**4) / A

    def roots(a):
        if P == 0:
            return 0.0, np.sqrt(3 * a / C)
        xm = np.sqrt(a / C)
        if slope(xm, a) <= P:
            return None
        lo = brentq(lambda x: slope(x, a) - P, 0.0, xm, xtol=1e-15 * xm, rtol=1e-15)
        hi = brentq(lambda x: slope(x, a) - P, xm, np.sqrt(3 * a / C), xtol=1e-15 * xm, rtol=1e-15)
        return lo, hi

    def gap(a):
        lo, hi = roots(a)
        return pot(hi, a) - pot(lo, a) - P * (hi - lo) - F

    a_min = (0.75 * P * A * np.sqrt(C)) ** (2.0 / 3.0) if P > 0 else 0.0
    if F == 0:
        if P == 0:
            raise ModelError("no transaction costs: the no-trade region is empty")
        xm = np.sqrt(a_min / C)
        return a_min, xm, xm
    if P == 0:
        a = np.sqrt(2.0 * C * A * F / 3.0)
        a = brentq(gap, 0.5 * a, 2.0 * a, xtol=1e-16 * a, rtol=1e-15)
        lo, hi = roots(a)
        return a, hi, lo
    lower = a_min * (1 + 1e-12)
    upper = max(2 * a_min, np.sqrt(2.0 * C * A * F / 3.0))
    while gap(upper) <= 0:
        upper *= 2
        if not np.isfinite(upper):
            raise SolverError("smooth-fit bracket search diverged")
    a = brentq(gap, lower, upper, xtol=1e-16 * upper, rtol=1e-15)
    lo, hi = roots(a)
    return a, hi, lo


def smoothfit_1d(problem: CorrectorProblem) -> SmoothFit1D:
    """Trigger, target and ergodic cost of the one-dimensional corrector problem."""
    if problem.d != 1:
        raise ModelError("smooth fit needs a one-dimensional problem")
    A = float(problem.A[0, 0])
    if not A > 0:
        raise ModelError("degenerate diffusion")
    C = -problem.vzz * float(problem.cov[0, 0]) / (2.0 * problem.vz)
    F = _fixed_units(problem)
    P = problem.nu_p
    try:
        a_hat, b, xs = _scaled_smoothfit(C, A, F, P)
    except ValueError as exc:
        raise SolverError("no positive root pair for the smooth-fit system") from exc
    vz = problem.vz
    fit = SmoothFit1D(
        b=float(b), xi_star=float(xs), a=float(a_hat * vz),
        c4=float(-C * vz / (6 * A)), c2=float(a_hat * vz / A), c0=0.0,
        vz=vz, fixed=F, nu_p=P,
    )
    if F > 0 and np.max(np.abs(fit.residuals())) > 1e-10:
        raise SolverError("smooth-fit residuals too large")
    return fit


def axis_problem(problem: CorrectorProblem, k: int) -> CorrectorProblem:
    """One-dimensional problem seen along axis ``k`` (cross terms dropped)."""
    variant = problem.variant
    if variant is CostVariant.PER_ASSET_FIXED:
        variant = CostVariant.SINGLE_FIXED
    return replace(
        problem,
        A=np.array([[problem.A[k, k]]]),
        cov=np.array([[problem.cov[k, k]]]),
        variant=variant,
    )


def auto_grid(problem: CorrectorProblem, points, factor: float = 3.0, min_cells: int = 6) -> Grid:
    """Symmetric grid sized from the one-dimensional prediction on each axis.

    Each half-width is ``factor`` times the predicted trigger of the axis
    problem.  For correlated problems the half-widths are then widened until
    the mesh ratios admit the monotone cross stencil.
    """
    d = problem.d
    counts = np.broadcast_to(np.atleast_1d(points), (d,)).astype(int)
    half = np.array([factor * smoothfit_1d(axis_problem(problem, k)).b for k in range(d)])
    A = problem.A
    for _ in range(2 * d):
        h = 2 * half / (counts - 1)
        changed = False
        for k in range(d):
            for l in range(d):
                if k == l:
                    continue
                lo, hi = monotone_ratio_bounds(A, k, l)
                ratio = h[k] / h[l]
                if ratio < lo * (1 + 1e-9):
                    half[k] *= lo * (1 + 1e-6) / ratio
                    changed = True
                elif ratio > hi * (1 - 1e-9):
                    half[l] *= ratio / (hi * (1 - 1e-6))
                    changed = True
                h = 2 * half / (counts - 1)
        if not changed:
            break
    h = 2 * half / (counts - 1)
    band = np.array([smoothfit_1d(axis_problem(problem, k)).b for k in range(d)])
    if np.any(band / h < min_cells):
        log.warning("predicted band spans fewer than %d cells; refine the grid", min_cells)
    return Grid.symmetric(half, counts)


def refit_grid(solution, points=None, margin: float = 1.5) -> Grid:
    """Symmetric grid whose half-widths are ``margin`` times the no-trade extent.

    Used as a second pass after a coarse solve: the first-pass grid comes from
    per-axis predictions, which overstate the extent when the assets are
    strongly correlated.  Mesh ratios are kept admissible for the cross stencil.
    """
    if not margin > 1:
        raise ModelError("margin must exceed 1")
    grid = solution.grid
    still = ~solution.policy.trading
    if not still.any():
        raise ModelError("empty no-trade set")
    pts = np.abs(grid.points[still])
    half = margin * (pts.max(axis=0) + grid.h)
    half = np.minimum(half, np.asarray(grid.upper))
    counts = grid.counts if points is None else np.broadcast_to(np.atleast_1d(points), (grid.d,))
    counts = np.asarray(counts, dtype=int)
    A = solution.problem.A
    for k in range(grid.d):
        for l in range(grid.d):
            if k == l:
                continue
            lo, hi = monotone_ratio_bounds(A, k, l)
            h = 2 * half / (counts - 1)
            if h[k] / h[l] < lo * (1 + 1e-9):
                half[k] *= lo * (1 + 1e-6) / (h[k] / h[l])
            elif h[k] / h[l] > hi * (1 - 1e-9):
                half[l] *= (h[k] / h[l]) / (hi * (1 - 1e-6))
    return Grid.symmetric(half, counts)


def fit_centered_quadratic(points):
    """Least-squares fit of ``p^T Q p = 1`` to 2-D points.

    Returns ``(Q, residual)`` where ``residual`` is the RMS relative radial
    deviation ``sqrt(p^T Q p) - 1``.
    """
    p = np.asarray(points, dtype=float)
    if p.ndim != 2 or p.shape[1] != 2:
        raise ModelError("expected (n, 2) points")
    if p.shape[0] < 6:
        raise ModelError("need at least 6 boundary points")
    X = np.column_stack([p[:, 0] ** 2, 2 * p[:, 0] * p[:, 1], p[:, 1] ** 2])
    q, *_ = np.linalg.lstsq(X, np.ones(len(p)), rcond=None)
    Q = np.array([[q[0], q[1]], [q[1], q[2]]])
    rho = np.sqrt(np.abs(X @ q))
    return Q, float(np.sqrt(np.mean((rho - 1.0) ** 2)))


def fixedcost_2d_report(solution) -> dict:
    """Target offsets and ellipse fit for a two-asset fixed-cost solution."""
    from .regions import boundary_extract, classify

    problem = solution.problem
    if problem.d != 2 or problem.nu_p != 0:
        raise ModelError("report needs a two-asset problem without proportional costs")
    grid = solution.grid
    trading = solution.policy.trading
    targets = grid.points[solution.policy.targets(grid)]
    if trading.any():
        cells = np.abs(targets[trading]) / grid.h
        max_offset = float(cells.max())
    else:
        max_offset = 0.0
    bnd = boundary_extract(classify(solution))
    pts = np.concatenate(bnd.polylines, axis=0)
    Q, resid = fit_centered_quadratic(pts)
    return {
        "max_target_offset": max_offset,
        "fit_residual": resid,
        "Q": Q,
        "boundary_points": int(len(pts)),
    }
