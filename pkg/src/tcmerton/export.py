"""Byte-exact writers for run results.

* CSV: one row per grid cell with the multi-index, xi coordinates, region
  label, target coordinates (blank when not trading), potential ``w`` and
  occupation density.  Floats use ``%.17g`` so they round-trip exactly.
* JSON: sorted keys, no timestamps.
* PPM (P6, 8-bit): linear grayscale from the minimum (black) to the maximum
  (white) of the field; target cells are forced to full intensity.  Rows run
  from the largest second coordinate at the top, columns along the first.
"""

from __future__ import annotations

import csv
import io
import json
import threading
from pathlib import Path

import numpy as np

from .errors import ModelError
from .grid import Grid

_locks: dict = {}
_locks_guard = threading.Lock()


def _lock_for(path: Path) -> threading.Lock:
    with _locks_guard:
        return _locks.setdefault(str(path.resolve()), threading.Lock())


def _fmt(v) -> str:
    return "%.17g" % v


def _write_bytes(path, data: bytes) -> Path:
    path = Path(path)
    with _lock_for(path):
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(data)
        except OSError as exc:
            raise OSError(f"cannot write {path}: {exc.strerror}") from exc
    return path


def _to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _to_jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def json_bytes(obj) -> bytes:
    return (json.dumps(_to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n").encode()


def write_json(path, obj) -> Path:
    return _write_bytes(path, json_bytes(obj))


def cells_csv(grid: Grid, labels, targets, w, density) -> bytes:
    if grid.N == 0:
        raise ModelError("empty grid")
    d = grid.d
    labels = np.asarray(labels)
    targets = np.asarray(targets, dtype=float)
    w = np.asarray(w, dtype=float)
    density = np.asarray(density, dtype=float)
    for arr in (labels, w, density):
        if arr.shape[0] != grid.N:
            raise ModelError("per-cell arrays must have one entry per grid point")
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    header = [f"i{k}" for k in range(d)] + [f"xi{k}" for k in range(d)] + ["label"]
    header += [f"target{k}" for k in range(d)] + ["w", "density"]
    out.writerow(header)
    idx = grid.multi_index
    pts = grid.points
    for n in range(grid.N):
        tgt = ["" if np.isnan(t) else _fmt(t) for t in targets[n]]
        out.writerow(
            [str(i) for i in idx[n]] + [_fmt(v) for v in pts[n]] + [str(int(labels[n]))]
            + tgt + [_fmt(w[n]), _fmt(density[n])]
        )
    return buf.getvalue().encode()


def grayscale(values, grid: Grid, highlight=None) -> np.ndarray:
    """8-bit image of a per-cell field; ``highlight`` cells are set to 255."""
    v = np.asarray(values, dtype=float)
    lo, hi = float(v.min()), float(v.max())
    if hi > lo:
        g = np.rint(255.0 * (v - lo) / (hi - lo)).astype(np.uint8)
    else:
        g = np.zeros(v.shape, dtype=np.uint8)
    if highlight is not None:
        g[np.asarray(highlight, dtype=int)] = 255
    img = g.reshape(grid.shape)
    if grid.d == 1:
        return img[None, :]
    if grid.d == 2:
        # axis 0 across, axis 1 upwards
        return img.T[::-1]
    raise ModelError("heatmaps need a one- or two-dimensional grid")


def ppm_bytes(image) -> bytes:
    img = np.asarray(image, dtype=np.uint8)
    if img.ndim != 2 or img.size == 0:
        raise ModelError("image must be a nonempty 2-D array")
    h, w = img.shape
    rgb = np.repeat(img[:, :, None], 3, axis=2)
    return b"P6\n%d %d\n255\n" % (w, h) + rgb.tobytes()


def write_ppm(path, values, grid: Grid, highlight=None) -> Path:
    return _write_bytes(path, ppm_bytes(grayscale(values, grid, highlight)))


def read_ppm(path) -> np.ndarray:
    """Inverse of :func:`write_ppm` for the grayscale images it writes."""
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P6":
        raise ModelError("not a binary PPM")
    w, h = (int(t) for t in parts[1].split())
    rgb = np.frombuffer(parts[3], dtype=np.uint8).reshape(h, w, 3)
    return rgb[:, :, 0].copy()


def write_csv(path, grid: Grid, labels, targets, w, density) -> Path:
    return _write_bytes(path, cells_csv(grid, labels, targets, w, density))
