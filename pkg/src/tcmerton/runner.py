"""Run orchestration: from a validated config to results per wealth level."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .analytic import auto_grid, fixedcost_2d_report, refit_grid, smoothfit_1d
from .config import RunConfig
from .corrector import make_problem
from .errors import ModelError, SolverError
from .grid import Grid
from .regions import RegionMap, boundary_extract, classify, relative_size
from .solver import PolicySolution, solve_corrector

log = logging.getLogger(__name__)

WIDEN = 1.5


class StageError(RuntimeError):
    """A module error tagged with the wealth level and stage that raised it."""

    def __init__(self, z, stage, cause):
        super().__init__(f"z={z:g}, stage {stage}: {cause}")
        self.z = z
        self.stage = stage
        self.cause = cause


@dataclass
class ZResult:
    z: float
    solution: PolicySolution
    regions: RegionMap
    widenings: int = 0
    refit: bool = False
    extra: dict = field(default_factory=dict)

    def summary(self) -> dict:
        s = self.solution
        g = s.grid
        bnd = boundary_extract(self.regions)
        out = {
            "z": self.z,
            "a": s.a,
            "a_over_vz": s.a / s.problem.vz,
            "vz": s.problem.vz,
            "epsilon": s.problem.epsilon,
            "nu_p": s.problem.nu_p,
            "iterations": s.iterations,
            "K": s.K,
            "converged": s.converged,
            "cycled": s.cycled,
            "grid": {"lower": list(g.lower), "upper": list(g.upper), "counts": list(g.counts)},
            "widenings": self.widenings,
            "refit": self.refit,
            "touches_edge": self.regions.touches_edge,
            "no_trade_cells": int(self.regions.no_trade.sum()),
            "relative_size": relative_size(self.regions),
            "targets": bnd.targets,
            "relative_targets": bnd.relative_targets,
        }
        if g.d == 1:
            out["trigger"] = [float(p[0, 0]) for p in bnd.polylines]
        out.update(self.extra)
        return out

    def boundary(self) -> dict:
        bnd = boundary_extract(self.regions)
        return {
            "z": self.z,
            "polylines": bnd.polylines,
            "relative_polylines": bnd.relative_polylines,
            "targets": bnd.targets,
            "relative_targets": bnd.relative_targets,
        }


def _solve(problem, grid, cfg: RunConfig):
    sv = cfg.solver
    K = None if sv["K"] == "auto" else float(sv["K"])
    return solve_corrector(
        problem, grid, tau=sv["tau"], max_iters=sv["max_iters"], K=K,
        K_factor=sv["K_factor"], method=sv["method"],
    )


def solve_at(cfg: RunConfig, z: float) -> ZResult:
    """Solve the corrector problem at wealth ``z`` with the config's grid rules.

    With automatic extents the grid is widened by half its width (up to
    ``max_widen`` times) while the no-trade set reaches the edge layers.
    """
    stage = "setup"
    try:
        problem = make_problem(cfg.market, cfg.prefs, cfg.costs, z)
        gcfg = cfg.grid
        points = cfg.points()
        auto = gcfg["extents"] == "auto"
        stage = "grid"
        if auto:
            grid = auto_grid(problem, points, factor=gcfg["factor"])
        else:
            grid = Grid.symmetric(gcfg["extents"], points)
        stage = "policy iteration"
        sol = _solve(problem, grid, cfg)
        rmap = classify(sol)
        widen = 0
        while auto and rmap.touches_edge and widen < gcfg["max_widen"]:
            widen += 1
            log.info("z=%g: no-trade set reaches the grid edge; widening (%d)", z, widen)
            grid = Grid.symmetric(np.asarray(grid.upper) * WIDEN, grid.counts)
            sol = _solve(problem, grid, cfg)
            rmap = classify(sol)
        if rmap.touches_edge:
            if auto:
                raise SolverError(f"no-trade set still reaches the grid edge after {widen} widenings")
            log.warning("z=%g: no-trade set reaches the grid edge; results unreliable", z)
        refit = False
        if gcfg["refit"]:
            stage = "refit"
            g2 = refit_grid(sol, points, margin=float(gcfg["refit"]))
            sol2 = _solve(problem, g2, cfg)
            r2 = classify(sol2)
            if r2.touches_edge:
                log.warning("z=%g: refitted grid too tight; keeping the first pass", z)
            else:
                sol, rmap, refit = sol2, r2, True
        return ZResult(float(z), sol, rmap, widen, refit)
    except (ModelError, SolverError) as exc:
        raise StageError(z, stage, exc) from exc


def benchmark_1d(res: ZResult) -> dict:
    """Policy iteration against the smooth-fit solution, in mesh units."""
    s = res.solution
    fit = smoothfit_1d(s.problem)
    h = float(s.grid.h[0])
    bnd = boundary_extract(res.regions)
    trig = np.array([float(p[0, 0]) for p in bnd.polylines])
    tg = bnd.targets[:, 0] if len(bnd.targets) else np.zeros(0)
    dev_b = float(np.max(np.abs(np.abs(trig) - fit.b))) / h
    dev_t = float(np.max(np.abs(np.abs(tg) - fit.xi_star))) / h if tg.size else np.inf
    return {
        "z": res.z,
        "h": h,
        "pi_trigger": trig,
        "pi_targets": tg,
        "pi_a": s.a,
        "fit_trigger": fit.b,
        "fit_target": fit.xi_star,
        "fit_a": fit.a,
        "trigger_dev_cells": dev_b,
        "target_dev_cells": dev_t,
        "a_rel_dev": abs(s.a - fit.a) / abs(fit.a),
        "max_dev_cells": max(dev_b, dev_t),
    }


def benchmark_2d_fixed(res: ZResult) -> dict:
    rep = fixedcost_2d_report(res.solution)
    Q = rep["Q"]
    vals, vecs = np.linalg.eigh(Q)
    rep["semi_axes"] = (1.0 / np.sqrt(vals)).tolist()
    rep["axes_directions"] = vecs.T.tolist()
    rep["z"] = res.z
    rep["a"] = res.solution.a
    return rep
