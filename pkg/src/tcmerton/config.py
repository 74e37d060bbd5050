"""Run configuration: one JSON document checked against a published schema.

:func:`load_config` validates the document, fills defaults and builds the
model objects, so every precondition is checked before any compute starts.
The normalised document (defaults included) is what the run manifest stores,
and feeding it back reproduces the run.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .errors import ModelError
from .geometry import CostStructure, CostVariant
from .market import MarketModel, Preferences, merton_solution

DEFAULTS = {
    "grid": {"points": 101, "extents": "auto", "factor": 3.0, "refit": False, "max_widen": 3},
    "solver": {"K": "auto", "K_factor": 100.0, "tau": 0.0, "max_iters": 100, "method": "fast"},
    "simulation": {"steps": 1000000, "seed": 0, "replicas": 8},
    "output": "out",
}


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


def schema() -> dict:
    text = resources.files("tcmerton").joinpath("data/run_config.schema.json").read_text()
    return json.loads(text)


@dataclass(frozen=True)
class RunConfig:
    document: dict
    market: MarketModel
    prefs: Preferences
    costs: CostStructure

    @property
    def z(self) -> list:
        return list(self.document["z"])

    @property
    def d(self) -> int:
        return self.market.d

    @property
    def grid(self) -> dict:
        return self.document["grid"]

    @property
    def solver(self) -> dict:
        return self.document["solver"]

    @property
    def simulation(self) -> dict:
        return self.document["simulation"]

    @property
    def output(self) -> str:
        return self.document["output"]

    def points(self) -> np.ndarray:
        pts = np.atleast_1d(self.grid["points"]).astype(int)
        if pts.size == 1:
            pts = np.repeat(pts, self.d)
        return pts


def _build_market(block: dict) -> MarketModel:
    if "sigma" in block:
        return MarketModel(block["r"], block["mu"], block["sigma"])
    sigmas = np.asarray(block["sigmas"], dtype=float)
    d = sigmas.size
    rho = block.get("rho", 0.0)
    if np.ndim(rho) == 0:
        if d == 1:
            return MarketModel(block["r"], block["mu"], [[sigmas[0]]])
        if d == 2:
            return MarketModel.from_correlation(block["r"], block["mu"], sigmas, float(rho))
        corr = np.full((d, d), float(rho))
        np.fill_diagonal(corr, 1.0)
    else:
        corr = np.asarray(rho, dtype=float)
    if corr.shape != (d, d) or not np.allclose(corr, corr.T):
        raise ModelError("correlation matrix must be symmetric with one row per asset")
    try:
        chol = np.linalg.cholesky(corr)
    except np.linalg.LinAlgError as exc:
        raise ModelError("correlation matrix is not positive definite") from exc
    return MarketModel(block["r"], block["mu"], np.diag(sigmas) @ chol)


def normalise(doc: dict) -> dict:
    """Schema-check ``doc`` and return a copy with all defaults filled in."""
    try:
        jsonschema.validate(doc, schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None
    out = copy.deepcopy(doc)
    for key, default in DEFAULTS.items():
        if isinstance(default, dict):
            out[key] = {**default, **out.get(key, {})}
        else:
            out.setdefault(key, default)
    out["costs"].setdefault("lambda_p", 0.0)
    out["costs"].setdefault("variant", CostVariant.SINGLE_FIXED.value)
    return out


def from_document(doc: dict) -> RunConfig:
    doc = normalise(doc)
    try:
        market = _build_market(doc["market"])
        prefs = Preferences(doc["preferences"]["beta"], doc["preferences"]["gamma"])
        costs = CostStructure(**doc["costs"])
        merton_solution(market, prefs)
    except ModelError as exc:
        raise ConfigError(str(exc)) from None
    d = market.d
    grid = doc["grid"]
    pts = np.atleast_1d(grid["points"])
    if pts.size not in (1, d):
        raise ConfigError("grid/points: need one count or one per asset")
    if grid["extents"] != "auto" and len(grid["extents"]) != d:
        raise ConfigError("grid/extents: need one half-width per asset")
    return RunConfig(doc, market, prefs, costs)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    return from_document(doc)
