"""JSON run configuration: schema validation with precise messages."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

from .branch import SolverSettings
from .errors import ConfigError
from .expressions import compile_expression
from .geometry import RiemannianModel, WarpingProfile
from .nonlinearity import Nonlinearity
from .operators import OperatorConfig, RadialGrid

__all__ = ["RunConfig", "parse_config", "DEFAULTS"]

DEFAULTS = {"n": 1024, "grading": "uniform", "eps_reg": 1e-8,
            "tol_newton": 1e-10}

_TOP_KEYS = {"geometry", "p", "nonlinearity", "grid", "operator", "solver",
             "lambda", "lambdas", "alphas"}
_GEOM_KEYS = {"kind", "N", "psi", "psi_prime", "psi_second", "R"}
_NL_KEYS = {"kind", "m", "f", "fprime"}
_GRID_KEYS = {"n", "grading"}
_OP_KEYS = {"eps_reg", "tol_newton"}
_SOLVER_KEYS = {"tol_fix", "max_recursion", "blowup_cutoff", "bisect_tol"}


@dataclass(frozen=True)
class RunConfig:
    model: RiemannianModel
    operator: OperatorConfig
    nonlinearity: Nonlinearity
    grid: RadialGrid
    settings: SolverSettings
    lam: Optional[float]
    lambdas: Optional[tuple[float, ...]]
    alphas: Optional[tuple[float, ...]]
    raw: dict


def _reject_unknown(d: dict, allowed: set, where: str) -> None:
    unknown = set(d) - allowed
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"unknown key {where}{key!r}")


def _number(d: dict, key: str, where: str, *, required=False, default=None):
    if key not in d:
        if required:
            raise ConfigError(f"{where}{key} is required")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}{key} must be a number")
    return float(v)


def _geometry(section) -> RiemannianModel:
    if not isinstance(section, dict):
        raise ConfigError("geometry must be an object")
    _reject_unknown(section, _GEOM_KEYS, "geometry.")
    kind = section.get("kind")
    if kind not in ("euclidean", "hyperbolic", "spherical", "custom"):
        raise ConfigError("geometry.kind must be one of euclidean, hyperbolic, "
                          "spherical, custom")
    n_raw = section.get("N")
    if not isinstance(n_raw, int) or isinstance(n_raw, bool) or n_raw < 2:
        raise ConfigError("geometry.N must be >= 2 (integer)")
    if kind != "custom":
        for key in ("psi", "psi_prime", "psi_second", "R"):
            if key in section:
                raise ConfigError(f"geometry.{key} is only valid for the "
                                  "custom kind")
        profile = WarpingProfile.from_kind(kind)
    else:
        for key in ("psi", "psi_prime"):
            if not isinstance(section.get(key), str):
                raise ConfigError(f"geometry.{key} (expression string) is "
                                  "required for the custom kind")
        horizon = section.get("R", math.inf)
        if horizon == "inf":
            horizon = math.inf
        if isinstance(horizon, bool) or not isinstance(horizon, (int, float)):
            raise ConfigError("geometry.R must be a number or \"inf\"")
        second = section.get("psi_second")
        if second is not None and not isinstance(second, str):
            raise ConfigError("geometry.psi_second must be an expression string")
        profile = WarpingProfile.custom(
            compile_expression(section["psi"], "r"),
            compile_expression(section["psi_prime"], "r"),
            compile_expression(second, "r") if second is not None else None,
            horizon=float(horizon))
    return RiemannianModel(n_raw, profile)


def _reaction(section) -> Nonlinearity:
    if not isinstance(section, dict):
        raise ConfigError("nonlinearity must be an object")
    _reject_unknown(section, _NL_KEYS, "nonlinearity.")
    kind = section.get("kind")
    per_kind = {"exp": {"kind"}, "power": {"kind", "m"},
                "custom": {"kind", "f", "fprime"}}
    if kind in per_kind:
        _reject_unknown(section, per_kind[kind], "nonlinearity.")
    if kind == "exp":
        return Nonlinearity.exponential()
    if kind == "power":
        m = _number(section, "m", "nonlinearity.", required=True)
        return Nonlinearity.power(m)
    if kind == "custom":
        for key in ("f", "fprime"):
            if not isinstance(section.get(key), str):
                raise ConfigError(f"nonlinearity.{key} (expression string) is "
                                  "required for the custom kind")
        return Nonlinearity.custom(compile_expression(section["f"], "s"),
                                   compile_expression(section["fprime"], "s"))
    raise ConfigError("nonlinearity.kind must be one of exp, power, custom")


def _grid(section) -> RadialGrid:
    section = section if section is not None else {}
    if not isinstance(section, dict):
        raise ConfigError("grid must be an object")
    _reject_unknown(section, _GRID_KEYS, "grid.")
    n = section.get("n", DEFAULTS["n"])
    if not isinstance(n, int) or isinstance(n, bool) or n < 16:
        raise ConfigError("grid.n must be an integer >= 16")
    grading = section.get("grading", DEFAULTS["grading"])
    if grading not in ("uniform", "boundary-refined"):
        raise ConfigError("grid.grading must be uniform or boundary-refined")
    return RadialGrid.make(n, grading)


def _operator(section, p: float) -> OperatorConfig:
    section = section if section is not None else {}
    if not isinstance(section, dict):
        raise ConfigError("operator must be an object")
    _reject_unknown(section, _OP_KEYS, "operator.")
    eps = _number(section, "eps_reg", "operator.", default=DEFAULTS["eps_reg"])
    tol = _number(section, "tol_newton", "operator.",
                  default=DEFAULTS["tol_newton"])
    if not 0 < eps <= 1e-4:
        raise ConfigError("operator.eps_reg must lie in (0, 1e-4]")
    if not tol > 0:
        raise ConfigError("operator.tol_newton must be positive")
    return OperatorConfig(p=p, eps_reg=eps, tol_newton=tol)


def _solver(section) -> SolverSettings:
    section = section if section is not None else {}
    if not isinstance(section, dict):
        raise ConfigError("solver must be an object")
    _reject_unknown(section, _SOLVER_KEYS, "solver.")
    kw = {}
    for key in _SOLVER_KEYS:
        if key in section:
            v = _number(section, key, "solver.", required=True)
            if not v > 0:
                raise ConfigError(f"solver.{key} must be positive")
            kw[key] = int(v) if key == "max_recursion" else v
    return SolverSettings(**kw)


def parse_config(source: Union[str, Path, dict]) -> RunConfig:
    """Parse and validate a configuration given as a path, JSON text or dict."""
    if isinstance(source, dict):
        doc = source
    else:
        looks_like_path = isinstance(source, Path) or (
            "\n" not in str(source) and not str(source).lstrip().startswith("{"))
        if looks_like_path:
            path = Path(source)
            if not path.exists():
                raise ConfigError(f"config file {str(path)!r} does not exist")
            text = path.read_text(encoding="utf-8")
        else:
            text = str(source)
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc.msg} at "
                              f"line {exc.lineno}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    _reject_unknown(doc, _TOP_KEYS, "")
    if "geometry" not in doc:
        raise ConfigError("geometry is required")
    if "nonlinearity" not in doc:
        raise ConfigError("nonlinearity is required")
    p = _number(doc, "p", "", required=True)
    if not p > 1:
        raise ConfigError("p must exceed 1")
    model = _geometry(doc["geometry"])
    reaction = _reaction(doc["nonlinearity"])
    grid = _grid(doc.get("grid"))
    operator = _operator(doc.get("operator"), p)
    settings = _solver(doc.get("solver"))
    lam = _number(doc, "lambda", "", default=None)
    if lam is not None and not lam > 0:
        raise ConfigError("lambda must be positive")
    lambdas = None
    if "lambdas" in doc:
        seq = doc["lambdas"]
        if not isinstance(seq, list) or not seq or \
                any(isinstance(v, bool) or not isinstance(v, (int, float))
                    or v <= 0 for v in seq):
            raise ConfigError("lambdas must be a nonempty list of positive "
                              "numbers")
        lambdas = tuple(float(v) for v in seq)
    alphas = None
    if "alphas" in doc:
        seq = doc["alphas"]
        if not isinstance(seq, list) or not seq or \
                any(isinstance(v, bool) or not isinstance(v, (int, float))
                    for v in seq):
            raise ConfigError("alphas must be a nonempty list of numbers")
        alphas = tuple(float(v) for v in seq)
    return RunConfig(model, operator, reaction, grid, settings, lam, lambdas,
                     alphas, doc)
