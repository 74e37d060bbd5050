import csv
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from tcmerton import Grid
from tcmerton.cli import main
from tcmerton.config import ConfigError, from_document, load_config
from tcmerton.export import cells_csv, read_ppm, write_ppm
from tcmerton.errors import ModelError

BASE = {
    "market": {"r": 0.01, "mu": [0.04], "sigma": [[0.2]]},
    "preferences": {"beta": 1.0, "gamma": 5.0},
    "costs": {"lambda_f": 1.0, "lambda_p": 0.03},
    "z": [1000.0, 5000.0],
    "grid": {"points": 61},
    "simulation": {"steps": 20000, "seed": 5, "replicas": 4},
}


def _write(tmp_path, doc, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def _tree(root: Path) -> dict:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def _run(tmp_path, command, doc=BASE, out="out", *extra):
    cfg = _write(tmp_path, doc)
    dest = tmp_path / out
    code = main([command, "--config", str(cfg), "--out", str(dest), *extra])
    return code, dest


def test_unknown_key_rejected(tmp_path, capsys):
    doc = {**BASE, "colour": "blue"}
    code, dest = _run(tmp_path, "solve", doc)
    err = capsys.readouterr().err
    assert code == 2 and "config error" in err and len(err.strip().splitlines()) == 1
    assert not dest.exists()


@pytest.mark.parametrize("gamma", [0.0, -1.0])
def test_nonpositive_risk_aversion_rejected(tmp_path, gamma):
    doc = {**BASE, "preferences": {"beta": 1.0, "gamma": gamma}}
    assert _run(tmp_path, "solve", doc)[0] == 2


def test_bad_json_and_missing_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["solve", "--config", str(bad)]) == 2
    assert main(["solve", "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["solve", "--config", str(_write(tmp_path, BASE)), "--threads", "0"]) == 2


def test_config_defaults_and_validation():
    cfg = from_document(BASE)
    assert cfg.solver["K"] == "auto" and cfg.grid["extents"] == "auto"
    assert cfg.costs.variant.value == "single_fixed"
    with pytest.raises(ConfigError, match="extents"):
        from_document({**BASE, "grid": {"extents": [1.0, 2.0]}})
    with pytest.raises(ConfigError):
        from_document({**BASE, "costs": {"lambda_f": 1.0, "lambda_p": 1.5}})
    corr = from_document({**BASE, "market": {"r": 0.03, "mu": [0.08, 0.08, 0.06], "sigmas": [0.4, 0.3, 0.2],
                                             "rho": [[1, 0.3, 0], [0.3, 1, 0.1], [0, 0.1, 1]]}})
    assert corr.d == 3
    np.testing.assert_allclose(np.diag(corr.market.cov), [0.16, 0.09, 0.04])


def test_shipped_configs_validate():
    paths = sorted(Path("configs").glob("*.json"))
    assert len(paths) >= 20
    for p in paths:
        load_config(p)


def test_export_is_byte_identical(tmp_path):
    c1, d1 = _run(tmp_path, "export", BASE, "a")
    c2, d2 = _run(tmp_path, "export", BASE, "b")
    assert c1 == c2 == 0
    t1, t2 = _tree(d1), _tree(d2)
    assert t1.keys() == t2.keys() and "z00/cells.csv" in t1 and "z01/w.ppm" in t1
    for k in t1:
        if k != "manifest.json":
            assert t1[k] == t2[k], k


def test_density_column_sums_to_one(tmp_path):
    code, dest = _run(tmp_path, "export")
    assert code == 0
    with open(dest / "z00" / "cells.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 61
    assert abs(sum(float(r["density"]) for r in rows) - 1.0) < 1e-9
    trading = [r for r in rows if r["label"] != "0"]
    assert trading and all(r["target0"] for r in trading)
    assert all(r["target0"] == "" for r in rows if r["label"] == "0")


def test_manifest_round_trip(tmp_path):
    code, dest = _run(tmp_path, "simulate", BASE, "first")
    assert code == 0
    manifest = json.loads((dest / "manifest.json").read_text())
    assert manifest["command"] == "simulate" and "numpy" in manifest["versions"]
    again = dict(manifest["config"], output=str(tmp_path / "second"))
    cfg2 = _write(tmp_path, again, "again.json")
    assert main(["simulate", "--config", str(cfg2)]) == 0
    t1, t2 = _tree(dest), _tree(tmp_path / "second")
    for k in t1:
        if k != "manifest.json":
            assert t1[k] == t2[k], k


@pytest.mark.parametrize("command", ["sweep", "simulate"])
def test_threads_do_not_change_results(tmp_path, command):
    _, d1 = _run(tmp_path, command, BASE, "one", "--threads", "1")
    _, d4 = _run(tmp_path, command, BASE, "four", "--threads", "4")
    t1, t4 = _tree(d1), _tree(d4)
    assert t1.keys() == t4.keys()
    assert all(t1[k] == t4[k] for k in t1 if k != "manifest.json")


def test_seed_override(tmp_path):
    _, d1 = _run(tmp_path, "simulate", BASE, "s1", "--seed", "1")
    _, d2 = _run(tmp_path, "simulate", BASE, "s2", "--seed", "2")
    assert (d1 / "z00" / "occupation.csv").read_bytes() != (d2 / "z00" / "occupation.csv").read_bytes()
    assert json.loads((d1 / "manifest.json").read_text())["config"]["simulation"]["seed"] == 1


def test_solver_failure_rolls_back(tmp_path, capsys):
    doc = {**BASE, "z": [1000.0, 2000.0], "solver": {"max_iters": 1}}
    code, dest = _run(tmp_path, "solve", doc)
    err = capsys.readouterr().err
    assert code == 3 and "z=1000" in err and "policy iteration" in err
    assert not dest.exists()


def test_rollback_keeps_existing_files(tmp_path):
    dest = tmp_path / "out"
    dest.mkdir()
    (dest / "keep.txt").write_text("x")
    doc = {**BASE, "solver": {"max_iters": 1}}
    assert _run(tmp_path, "solve", doc)[0] == 3
    assert [p.name for p in dest.iterdir()] == ["keep.txt"]


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    code, _ = _run(tmp_path, "solve", BASE, "file/sub")
    assert code == 2


def test_benchmark_requires_matching_dimension(tmp_path):
    doc = {**BASE, "market": {"r": 0.03, "mu": [0.08, 0.08], "sigmas": [0.4, 0.4], "rho": 0.3}}
    assert _run(tmp_path, "benchmark-1d", doc)[0] == 2
    assert _run(tmp_path, "benchmark-2d-fixed", BASE)[0] == 2


def test_benchmark_1d_output(tmp_path, capsys):
    code, dest = _run(tmp_path, "benchmark-1d", {**BASE, "grid": {"points": 201}})
    assert code == 0
    rows = json.loads((dest / "benchmark.json").read_text())["results"]
    assert len(rows) == 2 and all(r["max_dev_cells"] <= 2 for r in rows)
    assert "max deviation" in capsys.readouterr().out


def test_sweep_table(tmp_path, capsys):
    code, dest = _run(tmp_path, "sweep")
    lines = (dest / "sweep.csv").read_text().splitlines()
    assert code == 0 and lines[0].startswith("z,a,") and len(lines) == 3
    assert capsys.readouterr().out.splitlines() == lines


def test_ppm_layout_and_highlight(tmp_path):
    g = Grid((-1.0, -1.0), (1.0, 2.0), (3, 4))
    vals = np.arange(g.N, dtype=float)
    path = write_ppm(tmp_path / "x.ppm", vals, g, highlight=[0])
    img = read_ppm(path)
    assert img.shape == (4, 3)
    # first axis runs across, second upwards
    assert img[-1, 0] == 255 and img[0, -1] == 255
    assert img[-1, 1] == round(255 * g.ravel([1, 0]) / (g.N - 1))
    assert path.read_bytes().startswith(b"P6\n3 4\n255\n")


def test_csv_rejects_mismatched_arrays():
    g = Grid.symmetric([1.0], [3])
    with pytest.raises(ModelError):
        cells_csv(g, np.zeros(2), np.zeros((3, 1)), np.zeros(3), np.zeros(3))


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "tcmerton", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "benchmark-2d-fixed" in out.stdout
