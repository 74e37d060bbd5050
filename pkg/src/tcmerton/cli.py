"""Command-line entry point: ``python -m tcmerton <command> --config FILE``.

Commands
--------
solve               policy iteration per wealth level; summaries and boundaries
export              ``solve`` plus per-cell CSV and PPM heatmaps (w, density)
simulate            ``solve`` plus Monte Carlo occupation against the exact law
sweep               all wealth levels concurrently, one table row per level
benchmark-1d        policy iteration against the smooth-fit solution
benchmark-2d-fixed  target offsets and ellipse fit for two assets, fixed cost

Exit codes: 0 success, 2 configuration or output-location error, 3 solver
error.  Files written by a failed run are removed.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np
import scipy

from . import export
from .config import ConfigError, RunConfig, from_document, load_config
from .longterm import simulate_occupation, stationary_distribution
from .runner import StageError, ZResult, benchmark_1d, benchmark_2d_fixed, solve_at

log = logging.getLogger("tcmerton")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3


def _package_version() -> str:
    try:
        return version("tcmerton")
    except PackageNotFoundError:
        return "unknown"


class Outputs:
    """Files written during one run, so a failure can take them back."""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.files: list[Path] = []
        self.dirs: list[Path] = []

    def _track_dirs(self, path: Path):
        missing = []
        p = path.parent
        while not p.exists():
            missing.append(p)
            p = p.parent
        self.dirs.extend(reversed(missing))

    def path(self, *parts) -> Path:
        p = self.root.joinpath(*parts)
        self._track_dirs(p)
        self.files.append(p)
        return p

    def rollback(self):
        for f in self.files:
            try:
                f.unlink(missing_ok=True)
            except OSError:  # never written, e.g. a parent is not a directory
                pass
        for d in sorted(set(self.dirs), key=lambda q: len(q.parts), reverse=True):
            try:
                d.rmdir()
            except OSError:
                pass


def manifest(cfg: RunConfig, command: str) -> dict:
    return {
        "command": command,
        "config": cfg.document,
        "versions": {
            "tcmerton": _package_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }


def _zdir(k: int) -> str:
    return f"z{k:02d}"


def _solve_all(cfg: RunConfig, threads: int) -> list[ZResult]:
    zs = cfg.z
    if threads > 1 and len(zs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda z: solve_at(cfg, z), zs))
    return [solve_at(cfg, z) for z in zs]


def _write_solutions(out: Outputs, results):
    rows = []
    for k, res in enumerate(results):
        s = res.summary()
        export.write_json(out.path(_zdir(k), "summary.json"), s)
        export.write_json(out.path(_zdir(k), "boundary.json"), res.boundary())
        rows.append(s)
    return rows


def _write_cells(out: Outputs, k: int, res: ZResult, density, stem="cells"):
    grid = res.solution.grid
    r = res.regions
    export.write_csv(out.path(_zdir(k), f"{stem}.csv"), grid, r.labels, r.targets, res.solution.w, density)


def _heatmaps(out: Outputs, k: int, res: ZResult, density, stem="density"):
    grid = res.solution.grid
    if grid.d > 2:
        return
    tgt = np.unique(res.regions.target_index[res.regions.target_index >= 0])
    export.write_ppm(out.path(_zdir(k), "w.ppm"), res.solution.w, grid, tgt)
    export.write_ppm(out.path(_zdir(k), f"{stem}.ppm"), density, grid, tgt)


def cmd_solve(cfg, out, args):
    results = _solve_all(cfg, args.threads)
    rows = _write_solutions(out, results)
    export.write_json(out.path("summary.json"), {"results": rows})
    for row in rows:
        print(f"z={row['z']:g}  a={row['a']:.10g}  iterations={row['iterations']}  "
              f"no-trade cells={row['no_trade_cells']}")


def cmd_export(cfg, out, args):
    results = _solve_all(cfg, args.threads)
    rows = _write_solutions(out, results)
    for k, res in enumerate(results):
        mu = stationary_distribution(res.solution.rate_matrix(), res.solution.grid).density
        _write_cells(out, k, res, mu)
        _heatmaps(out, k, res, mu)
    export.write_json(out.path("summary.json"), {"results": rows})
    print(f"wrote {len(out.files)} files to {out.root}")


def cmd_simulate(cfg, out, args):
    results = _solve_all(cfg, 1)
    sim = cfg.simulation
    rows = []
    for k, res in enumerate(results):
        Lm = res.solution.rate_matrix()
        exact = stationary_distribution(Lm, res.solution.grid)
        mc = simulate_occupation(Lm, sim["steps"], sim["seed"], res.solution.grid,
                                 replicas=sim["replicas"], threads=args.threads)
        tv = exact.total_variation(mc)
        res.extra.update({"steps": sim["steps"], "seed": sim["seed"], "tv_to_exact": tv})
        _write_cells(out, k, res, mc.density, stem="occupation")
        _heatmaps(out, k, res, mc.density, stem="occupation")
        rows.append(res.summary())
        print(f"z={res.z:g}  steps={sim['steps']}  TV(simulated, exact)={tv:.4g}")
    for k, res in enumerate(results):
        export.write_json(out.path(_zdir(k), "summary.json"), rows[k])
        export.write_json(out.path(_zdir(k), "boundary.json"), res.boundary())
    export.write_json(out.path("summary.json"), {"results": rows})


def cmd_sweep(cfg, out, args):
    results = _solve_all(cfg, args.threads)
    rows = [r.summary() for r in results]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    one_d = cfg.d == 1
    head = ["z", "a", "a_over_vz", "iterations", "no_trade_cells", "relative_size"]
    if one_d:
        head += ["trigger", "target"]
    w.writerow(head)
    for row in rows:
        line = [export._fmt(row["z"]), export._fmt(row["a"]), export._fmt(row["a_over_vz"]),
                str(row["iterations"]), str(row["no_trade_cells"]), export._fmt(row["relative_size"])]
        if one_d:
            tg = np.abs(np.asarray(row["targets"], dtype=float)).ravel()
            line += [export._fmt(max(row["trigger"])), export._fmt(tg.max() if tg.size else np.nan)]
        w.writerow(line)
    export._write_bytes(out.path("sweep.csv"), buf.getvalue().encode())
    export.write_json(out.path("summary.json"), {"results": rows})
    sys.stdout.write(buf.getvalue())


def cmd_benchmark_1d(cfg, out, args):
    if cfg.d != 1:
        raise ConfigError("benchmark-1d needs a one-asset market")
    results = _solve_all(cfg, args.threads)
    rows = []
    for res in results:
        try:
            rows.append(benchmark_1d(res))
        except Exception as exc:  # smooth fit raises model/solver errors
            raise StageError(res.z, "smooth fit", exc) from exc
    _write_solutions(out, results)
    export.write_json(out.path("benchmark.json"), {"results": rows})
    print(f"{'z':>10} {'b (PI)':>12} {'b (fit)':>12} {'xi* (PI)':>12} {'xi* (fit)':>12} "
          f"{'a (PI)':>14} {'a (fit)':>14} {'cells':>6}")
    for r in rows:
        print(f"{r['z']:10.4g} {max(r['pi_trigger']):12.6g} {r['fit_trigger']:12.6g} "
              f"{np.abs(r['pi_targets']).max():12.6g} {r['fit_target']:12.6g} "
              f"{r['pi_a']:14.8g} {r['fit_a']:14.8g} {r['max_dev_cells']:6.2f}")
    print(f"max deviation: {max(r['max_dev_cells'] for r in rows):.3f} mesh widths, "
          f"{max(r['a_rel_dev'] for r in rows):.3g} relative in a")


def cmd_benchmark_2d(cfg, out, args):
    if cfg.d != 2 or cfg.costs.lambda_p != 0 or cfg.costs.variant.value != "single_fixed":
        raise ConfigError("benchmark-2d-fixed needs two assets and a single fixed cost without lambda_p")
    results = _solve_all(cfg, args.threads)
    rows = []
    for res in results:
        rows.append(benchmark_2d_fixed(res))
        print(f"z={res.z:g}  max target offset={rows[-1]['max_target_offset']:.3g} cells  "
              f"ellipse fit residual={rows[-1]['fit_residual']:.4g}  "
              f"semi-axes={rows[-1]['semi_axes'][0]:.5g}, {rows[-1]['semi_axes'][1]:.5g}")
    _write_solutions(out, results)
    export.write_json(out.path("benchmark.json"), {"results": rows})


COMMANDS = {
    "solve": cmd_solve,
    "export": cmd_export,
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "benchmark-1d": cmd_benchmark_1d,
    "benchmark-2d-fixed": cmd_benchmark_2d,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="python -m tcmerton", description=__doc__.split("\n")[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--seed", type=int, help="simulation seed (overrides the config)")
    p.add_argument("--threads", type=int, default=1, help="worker threads; never changes results")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _effective_config(args) -> RunConfig:
    cfg = load_config(args.config)
    doc = copy.deepcopy(cfg.document)
    if args.out is not None:
        doc["output"] = args.out
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be nonnegative")
        doc["simulation"]["seed"] = args.seed
    return from_document(doc)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = _effective_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Outputs(Path(cfg.output))
    try:
        COMMANDS[args.command](cfg, out, args)
        export.write_json(out.path("manifest.json"), manifest(cfg, args.command))
    except ConfigError as exc:
        out.rollback()
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        out.rollback()
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        out.rollback()
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # anything else is a failure of the computation
        out.rollback()
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK
