"""
Coupled temperature / phase system

    u_t + l phi_t = lap u + f,     phi_t = lap phi + F(phi) + u,

with zero-flux boundaries.  The homotopy path iterates the outer operator
``g -> LL(g, lam)``: solve the phase problem driven by ``g``, then the heat
problem with source ``lam (f - l phi_t)`` and initial value ``lam u0``.  The
stepping path marches both equations once, phase first.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._io import atomic_write, atomic_write_json
from .errors import BlowUpError, ConfigError, FixedPointError, InconclusiveError, SolverError
from .linear_parabolic import NOT_APPLICABLE, ThetaScheme, initial_data_surrogate, propagate, w21p_surrogate
from .mesh import Field, Trajectory, norm_Lp_Q, space_norms, time_norm, write_trajectory_csv
from .nonlinearity import NonlinearityDescriptor
from .phase_solver import (
    BLOWUP_GUARD,
    AprioriLedger,
    FixedPointConfig,
    picard_continuation,
    solve_auxiliary_fixed_point,
)

METHODS = ("homotopy", "stepping")


@dataclass(frozen=True)
class SystemConfig:
    """Data and solver settings for one coupled run.

    ``f`` fixes the space-time slab (grid, dt, steps).  ``s_phi`` is an
    optional extra source in the phase equation, used only by manufactured
    solutions.
    """

    l: float
    f: Trajectory
    u0: Field
    phi0: Field
    F: NonlinearityDescriptor
    s_phi: Trajectory | None = None
    p: float = 2.0
    outer: FixedPointConfig = FixedPointConfig()
    inner: FixedPointConfig = FixedPointConfig()
    scheme: ThetaScheme = ThetaScheme()

    def __post_init__(self):
        if not (self.l > 0 and math.isfinite(self.l)):
            raise ConfigError(f"latent heat l must be positive, got {self.l}")
        if not self.p >= 2:
            raise ConfigError(f"integrability exponent p must be >= 2, got {self.p}")
        grid = self.f.grid
        if self.u0.grid != grid or self.phi0.grid != grid:
            raise ConfigError("initial data and heat source live on different grids")
        if self.s_phi is not None and not self.s_phi.same_slab(self.f):
            raise ConfigError("phase source and heat source live on different space-time slabs")

    @property
    def grid(self):
        return self.f.grid

    @property
    def dt(self) -> float:
        return self.f.dt

    @property
    def steps(self) -> int:
        return self.f.steps

    @property
    def zero_heat_source(self) -> bool:
        return not np.any(self.f.values)

    def replace(self, **kw) -> "SystemConfig":
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update(kw)
        return SystemConfig(**d)


@dataclass
class SolutionPair:
    u: Trajectory
    phi: Trajectory
    method: str
    iterations: int = 0
    residual: float | None = None
    outer_ledger: AprioriLedger | None = None
    inner_ledger: AprioriLedger | None = None
    inner_iterations: int = 0
    rho: float | None = None
    ut_ratio: float | None = None

    def __post_init__(self):
        if not self.u.same_slab(self.phi):
            raise ConfigError("u and phi must share grid, dt and step count")

    def ledgers(self) -> dict:
        out = {}
        if self.outer_ledger is not None:
            out["outer"] = self.outer_ledger.to_dict()
        if self.inner_ledger is not None:
            out["inner"] = self.inner_ledger.to_dict()
        return out


# ---------------------------------------------------------------------------
# heat half-step shared by both methods
# ---------------------------------------------------------------------------


def heat_sources(phi_values: np.ndarray, cfg: SystemConfig, lam: float = 1.0) -> np.ndarray:
    """Per-step sources ``lam (theta f+ + (1-theta) f - l (phi+ - phi)/dt)``.

    The latent-heat term uses the forward difference of consecutive phase
    frames, which makes ``sum w (u + l phi)`` change by exactly the ``f``
    contribution.
    """
    th = cfg.scheme.theta
    fv = cfg.f.values
    s = th * fv[1:] + (1.0 - th) * fv[:-1] - cfg.l * np.diff(phi_values, axis=0) / cfg.dt
    return lam * s


def _lp_q(cfg: SystemConfig, values: np.ndarray, p: float) -> float:
    return time_norm(cfg.dt, space_norms(cfg.grid, values, p), p)


class _OuterOperator:
    """``g -> LL(g, lam)`` with the last phase solution kept for warm starts."""

    def __init__(self, cfg: SystemConfig):
        self.cfg = cfg
        self.last_phi: Trajectory | None = None
        self.inner_ledger: AprioriLedger | None = None
        self.inner_iterations = 0
        self.extra = None if cfg.s_phi is None else cfg.s_phi.values

    def phase(self, g_values: np.ndarray) -> Trajectory:
        cfg = self.cfg
        g = Trajectory(cfg.grid, cfg.dt, g_values)
        try:
            if self.last_phi is not None:
                try:
                    phi, led = solve_auxiliary_fixed_point(
                        g, cfg.phi0, cfg.F, cfg.inner, cfg.scheme, self.last_phi, False, self.extra
                    )
                except FixedPointError:
                    phi, led = solve_auxiliary_fixed_point(
                        g, cfg.phi0, cfg.F, cfg.inner, cfg.scheme, None, True, self.extra
                    )
            else:
                phi, led = solve_auxiliary_fixed_point(g, cfg.phi0, cfg.F, cfg.inner, cfg.scheme, None, True, self.extra)
        except FixedPointError as exc:
            raise FixedPointError(f"inner phase solve failed inside the outer operator: {exc}", exc.ledger) from exc
        self.last_phi = phi
        self.inner_ledger = led
        self.inner_iterations += led.total_iterations
        return phi

    def __call__(self, g_values: np.ndarray, lam: float):
        cfg = self.cfg
        if lam == 0:
            return np.zeros_like(g_values), None
        phi = self.phase(g_values)
        u = propagate(cfg.grid, cfg.dt, cfg.scheme, lam * cfg.u0.values, heat_sources(phi.values, cfg, lam))
        return u, phi


def apply_outer_L(g: Trajectory, lam: float, cfg: SystemConfig) -> Trajectory:
    """One evaluation of the outer operator; identically zero at ``lam = 0``.

    Raises:
        FixedPointError: the inner phase solve did not converge.
    """
    if not 0.0 <= lam <= 1.0:
        raise ConfigError(f"lambda must lie in [0, 1], got {lam}")
    if not g.same_slab(cfg.f):
        raise ConfigError("outer iterate lives on a different space-time slab")
    u, _ = _OuterOperator(cfg)(g.values, lam)
    return Trajectory(cfg.grid, cfg.dt, u)


# ---------------------------------------------------------------------------
# solvers
# ---------------------------------------------------------------------------


def data_norm(cfg: SystemConfig) -> float:
    """``|phi0| + |u0| + |f|_{Lp(Q)}`` with the initial-data surrogate."""
    p = cfg.p
    return initial_data_surrogate(cfg.phi0, p) + initial_data_surrogate(cfg.u0, p) + norm_Lp_Q(cfg.f, p)


def _solve_homotopy(cfg: SystemConfig, initial: Trajectory | None, continuation: bool) -> SolutionPair:
    op = _OuterOperator(cfg)
    ledger = AprioriLedger(damping=cfg.outer.damping, norm_exponent=cfg.p)
    start = np.zeros_like(cfg.f.values) if initial is None else np.array(initial.values)
    if initial is not None and not initial.same_slab(cfg.f):
        raise ConfigError("initial outer iterate lives on a different space-time slab")
    schedule = cfg.outer.schedule if continuation else (1.0,)
    u, phi = picard_continuation(
        op, start, schedule, lambda e: _lp_q(cfg, e, cfg.p), cfg.outer, ledger, "outer fixed point"
    )
    if phi is None:
        # only reachable with a schedule that never leaves lambda = 0
        phi = op.phase(u)
    residual = ledger.residuals[-1]
    norms = ledger.notes.get("fixed_point_norms", {})
    rho = max(norms.values()) if norms else None
    u_t = Trajectory(cfg.grid, cfg.dt, u)
    return SolutionPair(
        u_t,
        phi,
        "homotopy",
        iterations=ledger.total_iterations,
        residual=residual,
        outer_ledger=ledger,
        inner_ledger=op.inner_ledger,
        inner_iterations=op.inner_iterations,
        rho=rho,
        ut_ratio=norm_Lp_Q(u_t, cfg.p) / (1.0 + data_norm(cfg)),
    )


def _solve_stepping(cfg: SystemConfig) -> SolutionPair:
    grid, dt, th = cfg.grid, cfg.dt, cfg.scheme.theta
    n = cfg.steps
    F = cfg.F
    u = np.empty_like(cfg.f.values)
    phi = np.empty_like(u)
    u[0], phi[0] = cfg.u0.values, cfg.phi0.values
    extra = None
    if cfg.s_phi is not None:
        extra = th * cfg.s_phi.values[1:] + (1.0 - th) * cfg.s_phi.values[:-1]
    fsrc = th * cfg.f.values[1:] + (1.0 - th) * cfg.f.values[:-1]
    for k in range(n):
        with np.errstate(over="ignore", invalid="ignore"):
            Fk = F(phi[k]) if F.autonomous else F(phi[k], grid.points, k * dt)
        peak = float(np.max(np.abs(Fk))) if np.all(np.isfinite(Fk)) else math.inf
        if peak > BLOWUP_GUARD:
            raise BlowUpError(f"step {k}: |F| reached {peak:.3e} (guard {BLOWUP_GUARD:.0e})", k, peak)
        s = Fk + u[k] if extra is None else Fk + u[k] + extra[k]
        phi[k + 1] = propagate(grid, dt, cfg.scheme, phi[k], s[None, :])[1]
        hs = fsrc[k] - cfg.l * (phi[k + 1] - phi[k]) / dt
        u[k + 1] = propagate(grid, dt, cfg.scheme, u[k], hs[None, :])[1]
    u_t = Trajectory(grid, dt, u)
    return SolutionPair(
        u_t,
        Trajectory(grid, dt, phi),
        "stepping",
        iterations=n,
        ut_ratio=norm_Lp_Q(u_t, cfg.p) / (1.0 + data_norm(cfg)),
    )


def solve_system(
    cfg: SystemConfig,
    method: str = "homotopy",
    initial: Trajectory | None = None,
    continuation: bool = True,
) -> SolutionPair:
    """Solve the coupled system.

    ``homotopy``: damped Picard iteration on the outer operator in discrete
    ``L^p(Q)`` with lambda continuation; ``initial`` is the first outer
    iterate (zero by default) and ``continuation=False`` iterates at
    ``lam = 1`` only.  ``stepping``: one semi-implicit pass.

    Raises:
        FixedPointError: outer or inner non-convergence.
        BlowUpError: stepping path tripped the 1e12 guard.
    """
    if method == "homotopy":
        return _solve_homotopy(cfg, initial, continuation)
    if method == "stepping":
        return _solve_stepping(cfg)
    raise ConfigError(f"unknown method {method!r}; expected one of {METHODS}")


# ---------------------------------------------------------------------------
# monitors
# ---------------------------------------------------------------------------


def l2q_distance(a: Trajectory, b: Trajectory) -> float:
    return norm_Lp_Q(a - b, 2)


@dataclass
class UniquenessReport:
    distance_u: float | None
    distance_phi: float | None
    threshold: float
    verdict: str
    note: str = ""

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def random_iterate(cfg: SystemConfig, seed: int = 0, amplitude: float = 1.0) -> Trajectory:
    """Seeded bounded random space-time field on the slab of ``cfg``."""
    rng = np.random.default_rng(seed)
    return Trajectory(cfg.grid, cfg.dt, amplitude * rng.uniform(-1.0, 1.0, cfg.f.values.shape))


def check_uniqueness(cfg: SystemConfig, seed: int = 0) -> UniquenessReport:
    """Solve from ``g0 = 0`` (with continuation) and from a random ``g0`` (at lam = 1).

    Passes iff both ``L2(Q)`` distances are below ``10 * outer.tol``; a
    failed solve makes the report inconclusive.
    """
    threshold = 10.0 * cfg.outer.tol
    try:
        a = solve_system(cfg, "homotopy")
        b = solve_system(cfg, "homotopy", initial=random_iterate(cfg, seed), continuation=False)
    except SolverError as exc:
        return UniquenessReport(None, None, threshold, "inconclusive", str(exc))
    du, dp = l2q_distance(a.u, b.u), l2q_distance(a.phi, b.phi)
    verdict = "pass" if du < threshold and dp < threshold else "fail"
    return UniquenessReport(du, dp, threshold, verdict)


@dataclass
class ConservationReport:
    integrals: np.ndarray
    drift: np.ndarray
    max_relative_drift: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_relative_drift < self.tolerance

    def to_dict(self) -> dict:
        return {
            "max_relative_drift": self.max_relative_drift,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def conservation_series(u: Trajectory, phi: Trajectory, cfg: SystemConfig) -> tuple[np.ndarray, np.ndarray]:
    """``int (u + l phi)`` per frame and its deviation from the balance with ``f``.

    The balance adds ``dt * int (theta f+ + (1-theta) f)`` per step, which is
    zero when ``f`` vanishes.
    """
    w = cfg.grid.weights
    total = (u.values + cfg.l * phi.values) @ w
    th = cfg.scheme.theta
    fint = cfg.f.values @ w
    supplied = np.concatenate([[0.0], np.cumsum(cfg.dt * (th * fint[1:] + (1.0 - th) * fint[:-1]))])
    return total, total - total[0] - supplied


def check_conservation(pair: SolutionPair, cfg: SystemConfig, tolerance: float = 1e-8) -> ConservationReport:
    """Max drift of ``int (u + l phi)`` relative to ``max(|I_0|, int |u0| + l |phi0|)``."""
    total, drift = conservation_series(pair.u, pair.phi, cfg)
    w = cfg.grid.weights
    scale = max(abs(total[0]), float((np.abs(cfg.u0.values) + cfg.l * np.abs(cfg.phi0.values)) @ w))
    worst = float(np.abs(drift).max())
    rel = 0.0 if worst == 0 else (worst / scale if scale > 0 else math.inf)
    return ConservationReport(total, drift, rel, tolerance)


@dataclass
class MainEstimateEntry:
    norm_u: float
    norm_phi: float
    data_norm: float
    ratio: float | None
    grid: dict
    dt: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def measure_main_estimate(pair: SolutionPair, cfg: SystemConfig) -> MainEstimateEntry:
    """``(|u|_W + |phi|_W) / (1 + |phi0| + |u0| + |f|_{Lp(Q)})`` with W21p surrogates.

    The ratio is None when all data vanish (the bound is then vacuous).
    """
    nu = w21p_surrogate(pair.u, cfg.p)["total"]
    nphi = w21p_surrogate(pair.phi, cfg.p)["total"]
    data = data_norm(cfg)
    ratio = (nu + nphi) / (1.0 + data) if data >= NOT_APPLICABLE else None
    return MainEstimateEntry(
        nu, nphi, data, ratio, {"extents": list(cfg.grid.extents), "nodes": list(cfg.grid.nodes)}, cfg.dt
    )


def method_gap(cfg: SystemConfig) -> dict:
    """``L2(Q)`` distances between the homotopy and stepping solutions."""
    a = solve_system(cfg, "homotopy")
    b = solve_system(cfg, "stepping")
    return {"u": l2q_distance(a.u, b.u), "phi": l2q_distance(a.phi, b.phi)}


def system_stability_sweep(
    cfg: SystemConfig,
    du0: Field,
    dphi0: Field,
    df: Trajectory,
    eps=(1e-1, 1e-2, 1e-3, 1e-4),
    method: str = "homotopy",
) -> tuple[float, ...]:
    """``(|u1-u2| + |phi1-phi2|)_{L2(Q)}`` over the data perturbation size, per eps.

    Data perturbation size is ``eps (|du0| + |dphi0| + |df|_{Lp(Q)})``.
    """
    base = solve_system(cfg, method)
    p = cfg.p
    unit = initial_data_surrogate(du0, p) + initial_data_surrogate(dphi0, p) + norm_Lp_Q(df, p)
    if unit < NOT_APPLICABLE:
        raise InconclusiveError("perturbation direction is zero")
    out = []
    for e in eps:
        other_cfg = cfg.replace(u0=cfg.u0 + e * du0, phi0=cfg.phi0 + e * dphi0, f=cfg.f + e * df)
        other = solve_system(other_cfg, method)
        out.append((l2q_distance(base.u, other.u) + l2q_distance(base.phi, other.phi)) / (e * unit))
    return tuple(out)


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def frame_norms(traj: Trajectory) -> dict:
    g = traj.grid
    return {
        "L2": space_norms(g, traj.values, 2).tolist(),
        "Linf": space_norms(g, traj.values, math.inf).tolist(),
    }


def build_manifest(pair: SolutionPair, cfg: SystemConfig, config_hash: str, extra: dict | None = None) -> dict:
    total, drift = conservation_series(pair.u, pair.phi, cfg)
    manifest = {
        "config_hash": config_hash,
        "method": pair.method,
        "iterations": pair.iterations,
        "inner_iterations": pair.inner_iterations,
        "residual": pair.residual,
        "rho": pair.rho,
        "ut_ratio": pair.ut_ratio,
        "manufactured_phase_source": cfg.s_phi is not None,
        "grid": {"extents": list(cfg.grid.extents), "nodes": list(cfg.grid.nodes)},
        "dt": cfg.dt,
        "steps": cfg.steps,
        "times": pair.u.times.tolist(),
        "norms": {"u": frame_norms(pair.u), "phi": frame_norms(pair.phi)},
        "conservation": {"integral": total.tolist(), "drift": drift.tolist()},
        "ledgers": pair.ledgers(),
        "files": {"u": "u.csv", "phi": "phi.csv"},
    }
    if extra:
        manifest.update(extra)
    return manifest


def save_solution(pair: SolutionPair, cfg: SystemConfig, out_dir, config_hash: str, extra: dict | None = None) -> Path:
    """Write ``u.csv``, ``phi.csv`` and ``manifest.json`` (last) atomically.

    Raises:
        ConfigError: ``out_dir`` already holds a manifest.
    """
    out = Path(out_dir)
    manifest_path = out / "manifest.json"
    if manifest_path.exists():
        raise ConfigError(f"{manifest_path} already exists; refusing to overwrite a finished run")
    atomic_write(out / "u.csv", lambda tmp: write_trajectory_csv(tmp, pair.u))
    atomic_write(out / "phi.csv", lambda tmp: write_trajectory_csv(tmp, pair.phi))
    atomic_write_json(manifest_path, build_manifest(pair, cfg, config_hash, extra))
    return manifest_path


def load_manifest(run_dir) -> dict:
    path = Path(run_dir) / "manifest.json"
    if not path.is_file():
        raise ConfigError(f"no manifest.json in {run_dir}")
    return json.loads(path.read_text())
