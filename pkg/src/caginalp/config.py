"""
Run configuration: a YAML tree with sections ``grid``, ``time``, ``physics``,
``nonlinearity``, ``solver``, ``output`` (plus optional ``verify`` and a
top-level ``seed``).  ``normalize`` fills defaults and validates;
``config_hash`` fingerprints everything except ``output``.

Data fields (``physics.u0``, ``physics.phi0``, ``physics.f``) take one of

    {type: zero}
    {type: constant, value: c}
    {type: cosine, mean: m, amplitude: a, modes: [k1, ...], decay: d}

where the cosine form is ``m + a exp(-d t) prod cos(pi k_i x_i / L_i)``
(``decay`` only matters for ``f``).
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .coupled_solver import METHODS, SystemConfig
from .errors import ConfigError
from .linear_parabolic import ThetaScheme
from .mesh import Field, Grid, Trajectory
from .nonlinearity import (
    M4Params,
    NonlinearityDescriptor,
    Verdict,
    builtin_double_well,
    builtin_hoffman_jiang,
    builtin_linear,
    builtin_power_law,
    builtin_zero,
    validate_H3,
)
from .phase_solver import DEFAULT_SCHEDULE, FixedPointConfig


DEFAULTS = {
    "seed": 0,
    "grid": {"nodes": [41], "extents": [1.0]},
    "time": {"T": 1.0, "dt": 0.01},
    "physics": {
        "l": 1.0,
        "p": 2.0,
        "u0": {"type": "zero"},
        "phi0": {"type": "zero"},
        "f": {"type": "zero"},
    },
    "nonlinearity": {"name": "double_well", "box": 10.0, "samples": 400},
    "solver": {
        "method": "stepping",
        "theta": 0.5,
        "linear_tol": 1e-12,
        "linear_max_iter": 2000,
        "schedule": list(DEFAULT_SCHEDULE),
        "damping": 1.0,
        "tol": 1e-8,
        "max_iter": 200,
        "inner_tol": 1e-8,
        "inner_max_iter": 200,
    },
    "output": {"dir": "run"},
    "verify": {"criteria": list(range(1, 11)), "overrides": {}},
}

NONLINEARITIES = {
    "double_well": ((), lambda: builtin_double_well()),
    "power_law": (("r1", "r2"), lambda r1, r2: builtin_power_law(r1, r2)),
    "hoffman_jiang": (("a", "b"), lambda a, b: builtin_hoffman_jiang(a, b)),
    "linear": (("slope",), lambda slope: builtin_linear(slope)),
    "zero": ((), lambda: builtin_zero()),
}

DATA_KEYS = {"zero": set(), "constant": {"value"}, "cosine": {"mean", "amplitude", "modes", "decay"}}


def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if k not in base:
            raise ConfigError(f"unknown config key {path}{k}")
        if isinstance(base[k], dict) and k not in ("u0", "phi0", "f", "overrides", "m4"):
            if not isinstance(v, dict):
                raise ConfigError(f"config key {path}{k} must be a mapping")
            out[k] = _merge(base[k], v, f"{path}{k}.")
        else:
            out[k] = copy.deepcopy(v)
    return out


def _canonical(x):
    """Numbers as floats (so 1 and 1.0 hash alike), containers recursively."""
    if isinstance(x, bool) or x is None or isinstance(x, str):
        return x
    if isinstance(x, (int, float)):
        return float(x)
    if isinstance(x, dict):
        return {str(k): _canonical(v) for k, v in sorted(x.items())}
    if isinstance(x, (list, tuple)):
        return [_canonical(v) for v in x]
    raise ConfigError(f"unsupported config value {x!r}")


def _data_spec(spec, name: str) -> dict:
    if not isinstance(spec, dict) or "type" not in spec:
        raise ConfigError(f"physics.{name} must be a mapping with a 'type'")
    kind = spec["type"]
    if kind not in DATA_KEYS:
        raise ConfigError(f"physics.{name}: unknown type {kind!r}; expected one of {sorted(DATA_KEYS)}")
    extra = set(spec) - DATA_KEYS[kind] - {"type"}
    if extra:
        raise ConfigError(f"physics.{name}: unexpected keys {sorted(extra)} for type {kind}")
    out = {"type": kind}
    if kind == "constant":
        out["value"] = float(spec.get("value", 0.0))
    elif kind == "cosine":
        out["mean"] = float(spec.get("mean", 0.0))
        out["amplitude"] = float(spec.get("amplitude", 1.0))
        out["modes"] = [int(k) for k in spec.get("modes", [1])]
        out["decay"] = float(spec.get("decay", 0.0))
    return out


def normalize(raw: dict | None) -> dict:
    """Defaults filled in, types coerced, unknown keys rejected."""
    raw = raw or {}
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a mapping")
    raw = dict(raw)
    nl = raw.pop("nonlinearity", {}) or {}
    if not isinstance(nl, dict):
        raise ConfigError("config key nonlinearity must be a mapping")
    cfg = _merge(DEFAULTS, raw)
    # nonlinearity parameters depend on the family, so the section stays open
    cfg["nonlinearity"] = {**DEFAULTS["nonlinearity"], **copy.deepcopy(nl)}
    build_nonlinearity(cfg)
    g = cfg["grid"]
    g["nodes"] = [int(n) for n in np.atleast_1d(g["nodes"])]
    g["extents"] = [float(e) for e in np.atleast_1d(g["extents"])]
    if len(g["nodes"]) != len(g["extents"]):
        raise ConfigError("grid.nodes and grid.extents need the same length")
    for k in ("u0", "phi0", "f"):
        cfg["physics"][k] = _data_spec(cfg["physics"][k], k)
        if cfg["physics"][k]["type"] == "cosine" and len(cfg["physics"][k]["modes"]) != len(g["nodes"]):
            raise ConfigError(f"physics.{k}.modes needs one entry per grid axis")
    if cfg["solver"]["method"] not in METHODS:
        raise ConfigError(f"solver.method must be one of {METHODS}")
    cfg["seed"] = int(cfg["seed"])
    return cfg


def config_hash(cfg: dict) -> str:
    """sha256 of the canonical normalized config without the ``output`` section."""
    body = {k: v for k, v in normalize(cfg).items() if k != "output"}
    text = json.dumps(_canonical(body), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def read_config(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    return normalize(raw)


# ---------------------------------------------------------------------------
# building solver objects
# ---------------------------------------------------------------------------


def build_grid(cfg: dict) -> Grid:
    g = cfg["grid"]
    return Grid(tuple(g["extents"]), tuple(g["nodes"]))


def build_nonlinearity(cfg: dict) -> NonlinearityDescriptor:
    spec = dict(cfg["nonlinearity"])
    name = spec.pop("name")
    spec.pop("box", None)
    spec.pop("samples", None)
    spec.pop("m4", None)
    if name not in NONLINEARITIES:
        raise ConfigError(f"unknown nonlinearity {name!r}; expected one of {sorted(NONLINEARITIES)}")
    keys, make = NONLINEARITIES[name]
    missing = [k for k in keys if k not in spec]
    extra = set(spec) - set(keys)
    if missing or extra:
        raise ConfigError(f"nonlinearity {name} takes parameters {list(keys)}; missing {missing}, unexpected {sorted(extra)}")
    return make(*(float(spec[k]) for k in keys))


def build_m4(cfg: dict) -> M4Params | None:
    spec = cfg["nonlinearity"].get("m4")
    if spec is None:
        return None
    nl = cfg["nonlinearity"]
    r1 = spec.get("r1", nl.get("r1"))
    r2 = spec.get("r2", nl.get("r2"))
    return M4Params(
        alpha=float(spec["alpha"]),
        beta=float(spec["beta"]),
        p=float(spec.get("p", cfg["physics"]["p"])),
        r=float(spec.get("r", 4.0)),
        r1=None if r1 is None else float(r1),
        r2=None if r2 is None else float(r2),
    )


def _profile(spec: dict, grid: Grid) -> np.ndarray:
    if spec["type"] == "zero":
        return np.zeros(grid.size)
    if spec["type"] == "constant":
        return np.full(grid.size, spec["value"])
    C = np.ones(grid.size)
    for ax, k, L in zip(grid.points.T, spec["modes"], grid.extents):
        C = C * np.cos(math.pi * k * ax / L)
    return C


def build_field(spec: dict, grid: Grid) -> Field:
    if spec["type"] == "cosine":
        return Field(grid, spec["mean"] + spec["amplitude"] * _profile(spec, grid))
    return Field(grid, _profile(spec, grid))


def build_source(spec: dict, grid: Grid, dt: float, steps: int) -> Trajectory:
    t = (np.arange(steps + 1) * dt)[:, None]
    if spec["type"] == "cosine":
        vals = spec["mean"] + spec["amplitude"] * np.exp(-spec["decay"] * t) * _profile(spec, grid)[None, :]
    else:
        vals = np.broadcast_to(_profile(spec, grid), (steps + 1, grid.size)).copy()
    return Trajectory(grid, dt, vals)


def time_steps(cfg: dict) -> tuple[float, int]:
    T, dt = float(cfg["time"]["T"]), float(cfg["time"]["dt"])
    if not (T > 0 and dt > 0):
        raise ConfigError("time.T and time.dt must be positive")
    steps = int(round(T / dt))
    if steps < 1 or not math.isclose(steps * dt, T, rel_tol=1e-9):
        raise ConfigError(f"time.dt={dt} must divide time.T={T}")
    return dt, steps


@dataclass
class RunConfig:
    """Validated config plus the objects built from it."""

    raw: dict
    system: SystemConfig
    method: str
    seed: int
    out_dir: Path
    hash: str


def check_exponents(cfg: dict, F: NonlinearityDescriptor, allow_unverified: bool) -> None:
    p = float(cfg["physics"]["p"])
    if not p >= 2:
        raise ConfigError(f"physics.p must be >= 2, got {p}")
    N = len(cfg["grid"]["nodes"])
    if validate_H3(p, N, F.r) != Verdict.PASS and not allow_unverified:
        raise ConfigError(
            f"growth exponent r={F.r:g} is not admissible for p={p:g}, N={N}; "
            "pass --allow-unverified-exponents to run anyway"
        )


def build_run(cfg: dict, allow_unverified: bool = False) -> RunConfig:
    cfg = normalize(cfg)
    grid = build_grid(cfg)
    dt, steps = time_steps(cfg)
    F = build_nonlinearity(cfg)
    check_exponents(cfg, F, allow_unverified)
    ph, so = cfg["physics"], cfg["solver"]
    scheme = ThetaScheme(float(so["theta"]), float(so["linear_tol"]), int(so["linear_max_iter"]))
    p = float(ph["p"])
    outer = FixedPointConfig(tuple(so["schedule"]), float(so["damping"]), float(so["tol"]), int(so["max_iter"]), p, 1.0)
    inner = FixedPointConfig(tuple(so["schedule"]), float(so["damping"]), float(so["inner_tol"]), int(so["inner_max_iter"]), p)
    system = SystemConfig(
        float(ph["l"]),
        build_source(ph["f"], grid, dt, steps),
        build_field(ph["u0"], grid),
        build_field(ph["phi0"], grid),
        F,
        p=p,
        outer=outer,
        inner=inner,
        scheme=scheme,
    )
    return RunConfig(cfg, system, so["method"], cfg["seed"], Path(cfg["output"]["dir"]), config_hash(cfg))
