"""
Auxiliary phase problem ``phi_t - lap phi = F(x, t, phi) + g``.

Two solvers:

* ``solve_auxiliary_fixed_point``: damped Picard iteration on the homotopy
  operator ``L(w, lam)`` (the linear solve with right-hand side
  ``lam (F(w) + g)``), continued in ``lam`` from 0 to 1.
* ``solve_auxiliary_stepping``: one linear solve per step with ``F``
  evaluated at the current frame.

Plus monitors for the energy inequality and the continuous-dependence
estimate.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import BlowUpError, ConfigError, FixedPointError, NonFiniteFieldError
from .linear_parabolic import (
    NOT_APPLICABLE,
    ThetaScheme,
    initial_data_surrogate,
    propagate,
    theta_average,
    w21p_surrogate,
)
from .mesh import Field, Grid, Trajectory, gradient_values, norm_Lp_Q, space_norms, time_norm
from .nonlinearity import NonlinearityDescriptor, estimate_d0

log = logging.getLogger(__name__)

BLOWUP_GUARD = 1e12
MIN_DAMPING = 1e-4
DEFAULT_SCHEDULE = (0.0, 0.25, 0.5, 0.75, 1.0)


@dataclass(frozen=True)
class FixedPointConfig:
    """Continuation schedule, damping and stopping rule for Picard iteration.

    ``r = None`` takes the growth exponent of the nonlinearity; the
    iteration norm is the discrete ``L^{p r}(Q)`` norm.
    """

    schedule: tuple[float, ...] = DEFAULT_SCHEDULE
    damping: float = 1.0
    tol: float = 1e-8
    max_iter: int = 200
    p: float = 2.0
    r: float | None = None

    def __post_init__(self):
        s = tuple(float(x) for x in self.schedule)
        object.__setattr__(self, "schedule", s)
        if len(s) < 1 or s[0] != 0.0 or s[-1] != 1.0:
            raise ConfigError(f"lambda schedule must start at 0 and end at 1, got {s}")
        if any(b <= a for a, b in zip(s, s[1:])):
            raise ConfigError(f"lambda schedule must be strictly increasing, got {s}")
        if not 0 < self.damping <= 1:
            raise ConfigError(f"damping must lie in (0, 1], got {self.damping}")
        if not self.tol > 0:
            raise ConfigError(f"tolerance must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be >= 1")
        if not self.p >= 1 or (self.r is not None and not self.r >= 1):
            raise ConfigError("norm exponents p and r must be >= 1")

    def norm_exponent(self, F: NonlinearityDescriptor) -> float:
        return self.p * (F.r if self.r is None else self.r)


@dataclass
class AprioriLedger:
    """History of one solve plus whatever monitors were attached to it.

    ``rows`` follow the JSON layout ``{lambda, iter, residual, norm_phi_Lpr,
    energy_lhs, energy_rhs, stability_ratio}``; entries that do not apply to
    a row are None.
    """

    rows: list[dict] = field(default_factory=list)
    iterations: dict = field(default_factory=dict)
    converged: bool = False
    damping: float = 1.0
    norm_exponent: float | None = None
    notes: dict = field(default_factory=dict)

    def add(self, lam=None, it=None, residual=None, norm_phi=None, energy_lhs=None, energy_rhs=None, stability=None):
        self.rows.append(
            {
                "lambda": lam,
                "iter": it,
                "residual": residual,
                "norm_phi_Lpr": norm_phi,
                "energy_lhs": energy_lhs,
                "energy_rhs": energy_rhs,
                "stability_ratio": stability,
            }
        )

    @property
    def residuals(self) -> list[float]:
        return [r["residual"] for r in self.rows if r["residual"] is not None]

    @property
    def total_iterations(self) -> int:
        return int(sum(self.iterations.values()))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["iterations"] = {str(k): v for k, v in self.iterations.items()}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


# ---------------------------------------------------------------------------
# helpers on raw arrays
# ---------------------------------------------------------------------------


def _check_slab(g: Trajectory, phi0: Field) -> None:
    if g.grid != phi0.grid:
        raise ConfigError("source and initial datum live on different grids")


def _q_norm(grid: Grid, dt: float, values: np.ndarray, q: float) -> float:
    return time_norm(dt, space_norms(grid, values, q), q)


def evaluate_along(F: NonlinearityDescriptor, grid: Grid, dt: float, values: np.ndarray) -> np.ndarray:
    """F at every frame of ``values``; raises on overflow."""
    if F.autonomous:
        with np.errstate(over="ignore", invalid="ignore"):
            out = F(values)
    else:
        t = (np.arange(values.shape[0]) * dt)[:, None]
        with np.errstate(over="ignore", invalid="ignore"):
            out = F(values, grid.points, t)
    if not np.all(np.isfinite(out)):
        raise NonFiniteFieldError(f"nonlinearity {F.name} overflowed on the current iterate")
    return out


def _apply_L_values(w, lam, g, phi0, F, scheme, extra=None):
    grid, dt = g.grid, g.dt
    rhs = np.zeros_like(g.values)
    if lam != 0:
        rhs = lam * (evaluate_along(F, grid, dt, w) + g.values)
    if extra is not None:
        rhs = rhs + extra
    return propagate(grid, dt, scheme, phi0.values, theta_average(rhs, scheme.theta))


def apply_L(
    w: Trajectory,
    lam: float,
    g: Trajectory,
    phi0: Field,
    F: NonlinearityDescriptor,
    scheme: ThetaScheme = ThetaScheme(),
) -> Trajectory:
    """Linear solve of ``phi_t - lap phi = lam (F(w) + g)`` with ``phi(0) = phi0``.

    At ``lam = 0`` neither ``F`` nor ``w`` is touched, so the result is the
    heat flow of ``phi0`` for any ``w``.
    """
    if not 0.0 <= lam <= 1.0:
        raise ConfigError(f"lambda must lie in [0, 1], got {lam}")
    if not w.same_slab(g):
        raise ConfigError("iterate and source live on different space-time slabs")
    _check_slab(g, phi0)
    return Trajectory(g.grid, g.dt, _apply_L_values(w.values, lam, g, phi0, F, scheme))


# ---------------------------------------------------------------------------
# fixed point
# ---------------------------------------------------------------------------


def picard_continuation(apply, start, schedule, norm, cfg: FixedPointConfig, ledger: AprioriLedger, label: str):
    """Damped Picard iteration ``w <- (1-om) w + om T_lam(w)`` over a lambda schedule.

    ``apply(w, lam)`` returns ``(T_lam(w), payload)``.  A residual increase
    rejects the step and halves the damping factor; the factor is kept for
    the rest of the solve.  Returns ``(T(w), payload)`` of the last accepted
    iterate at the final lambda.
    """
    w = start
    omega = cfg.damping
    out = None
    for lam in schedule:
        Tw, payload = apply(w, lam)
        res = norm(w - Tw)
        it = 0
        ledger.add(lam, it, res, None)
        while res > cfg.tol:
            if it >= cfg.max_iter:
                ledger.damping = omega
                raise FixedPointError(
                    f"{label}: no convergence at lambda={lam} after {it} iterations (residual {res:.3e})", ledger
                )
            trial = w + omega * (Tw - w) if omega < 1 else Tw
            Tt, pt = apply(trial, lam)
            rt = norm(trial - Tt)
            if not rt <= res:
                omega *= 0.5
                log.debug("%s: residual rose to %.3e at lambda=%g, damping -> %g", label, rt, lam, omega)
                if omega < MIN_DAMPING:
                    ledger.damping = omega
                    raise FixedPointError(f"{label}: damping underflow at lambda={lam} (omega={omega:.2e})", ledger)
                continue
            w, Tw, payload, res = trial, Tt, pt, rt
            it += 1
            ledger.add(lam, it, res, None)
        ledger.iterations[lam] = it
        ledger.notes.setdefault("fixed_point_norms", {})[lam] = norm(Tw)
        out = (Tw, payload)
    ledger.damping = omega
    ledger.converged = True
    return out


def solve_auxiliary_fixed_point(
    g: Trajectory,
    phi0: Field,
    F: NonlinearityDescriptor,
    cfg: FixedPointConfig = FixedPointConfig(),
    scheme: ThetaScheme = ThetaScheme(),
    initial: Trajectory | None = None,
    continuation: bool = True,
    extra_source: np.ndarray | None = None,
) -> tuple[Trajectory, AprioriLedger]:
    """Solve the auxiliary problem through ``L(., lam)`` with lambda continuation.

    ``initial`` is the first iterate (zero by default).  With
    ``continuation=False`` only ``lam = 1`` is iterated, which is how warm
    restarts from a nearby solution are done.  ``extra_source`` (frame
    values, not scaled by lambda) is added to the right-hand side.

    Returns the last ``L``-output and the ledger.

    Raises:
        FixedPointError: no convergence or damping underflow; ``.ledger``
            carries the history.
    """
    _check_slab(g, phi0)
    q = cfg.norm_exponent(F)
    grid, dt = g.grid, g.dt
    w0 = np.zeros_like(g.values) if initial is None else np.array(initial.values)
    if initial is not None and not initial.same_slab(g):
        raise ConfigError("initial iterate lives on a different space-time slab")
    ledger = AprioriLedger(damping=cfg.damping, norm_exponent=q)

    def apply(w, lam):
        return _apply_L_values(w, lam, g, phi0, F, scheme, extra_source), None

    schedule = cfg.schedule if continuation else (1.0,)
    try:
        phi, _ = picard_continuation(
            apply, w0, schedule, lambda e: _q_norm(grid, dt, e, q), cfg, ledger, "auxiliary fixed point"
        )
    except NonFiniteFieldError as exc:
        raise FixedPointError(f"auxiliary fixed point: {exc}", ledger) from exc
    ledger.add(1.0, None, None, _q_norm(grid, dt, phi, q))
    return Trajectory(grid, dt, phi), ledger


def solve_auxiliary_stepping(
    g: Trajectory,
    phi0: Field,
    F: NonlinearityDescriptor,
    scheme: ThetaScheme = ThetaScheme(),
    extra_source: np.ndarray | None = None,
) -> Trajectory:
    """Semi-implicit march: diffusion by the theta scheme, ``F`` at frame k.

    Raises:
        BlowUpError: |F(phi_k)| exceeded 1e12.
    """
    _check_slab(g, phi0)
    grid, dt = g.grid, g.dt
    th = scheme.theta
    src = theta_average(g.values if extra_source is None else g.values + extra_source, th)
    out = np.empty_like(g.values)
    out[0] = phi0.values
    one = np.empty((1, grid.size))
    for k in range(g.steps):
        one[0] = out[k]
        with np.errstate(over="ignore", invalid="ignore"):
            Fk = F(out[k]) if F.autonomous else F(out[k], grid.points, k * dt)
        peak = float(np.max(np.abs(Fk))) if np.all(np.isfinite(Fk)) else math.inf
        if peak > BLOWUP_GUARD:
            raise BlowUpError(f"step {k}: |F| reached {peak:.3e} (guard {BLOWUP_GUARD:.0e})", k, peak)
        out[k + 1] = propagate(grid, dt, scheme, out[k], (Fk + src[k])[None, :])[1]
    return Trajectory(grid, dt, out)


# ---------------------------------------------------------------------------
# monitors
# ---------------------------------------------------------------------------


def energy_constant(d0: float, volume: float, T: float) -> float:
    """Gronwall constant C0 with LHS(t) <= C0 (1 + |phi0|^2 + |g|^2_{L2(Q)}).

    From ``F(z) z <= d0 (1 + z^2)`` and ``g phi <= (g^2 + phi^2)/2``:
    ``C0 = exp((2 d0+ + 1) T) (1 + d0+ |Omega| T)``.
    """
    d = max(d0, 0.0)
    return math.exp((2.0 * d + 1.0) * T) * (1.0 + d * volume * T)


def energy_lhs_series(phi: Trajectory) -> np.ndarray:
    """``1/2 |phi(t_k)|^2 + int_0^{t_k} |grad phi|^2`` for every frame."""
    grid = phi.grid
    half_sq = 0.5 * (phi.values**2 @ grid.weights)
    grad_sq = sum(gr**2 for gr in gradient_values(grid, phi.values)) @ grid.weights
    acc = np.concatenate([[0.0], np.cumsum(0.5 * phi.dt * (grad_sq[1:] + grad_sq[:-1]))])
    return half_sq + acc


@dataclass
class EnergyEntry:
    lhs: np.ndarray
    rhs: float
    d0: float
    C0: float
    worst_margin: float
    worst_frame: int

    @property
    def holds(self) -> bool:
        return self.worst_margin >= 0

    def to_row(self) -> dict:
        return {
            "lambda": 1.0,
            "iter": None,
            "residual": None,
            "norm_phi_Lpr": None,
            "energy_lhs": float(self.lhs[self.worst_frame]),
            "energy_rhs": self.rhs,
            "stability_ratio": None,
        }


def measure_energy_inequality(
    phi: Trajectory,
    g: Trajectory,
    phi0: Field,
    F: NonlinearityDescriptor,
    box: float | None = None,
    ledger: AprioriLedger | None = None,
) -> EnergyEntry:
    """Check the energy bound at every frame with ``d0`` from ``estimate_d0``.

    ``box`` defaults to ``max(10, 2 max|phi|)`` so the sampled supremum covers
    the values the solution actually took.
    """
    if box is None:
        box = max(10.0, 2.0 * float(np.abs(phi.values).max()))
    d0 = estimate_d0(F, box=box)
    C0 = energy_constant(d0, phi.grid.volume, phi.T)
    l2 = float(np.sqrt(phi0.values**2 @ phi0.grid.weights))
    rhs = C0 * (1.0 + l2**2 + norm_Lp_Q(g, 2) ** 2)
    lhs = energy_lhs_series(phi)
    margins = rhs - lhs
    k = int(np.argmin(margins))
    entry = EnergyEntry(lhs, float(rhs), d0, C0, float(margins[k]), k)
    if ledger is not None:
        ledger.rows.append(entry.to_row())
    return entry


def lpr_bound_ratio(phi: Trajectory, phi0: Field, g: Trajectory, p: float, r: float) -> float:
    """``|phi|_{L^{pr}(Q)} / (1 + |phi0| + |g|_{L^p(Q)})``: empirical C of the L^{pr} a-priori bound."""
    return norm_Lp_Q(phi, p * r) / (1.0 + initial_data_surrogate(phi0, p) + norm_Lp_Q(g, p))


@dataclass
class StabilityEntry:
    solution_diff: float
    data_diff: float
    ratio: float | None

    def to_row(self) -> dict:
        return {
            "lambda": 1.0,
            "iter": None,
            "residual": None,
            "norm_phi_Lpr": None,
            "energy_lhs": None,
            "energy_rhs": None,
            "stability_ratio": self.ratio,
        }


def stability_ratio(phi_a: Trajectory, phi_b: Trajectory, data_diff: float, p: float) -> StabilityEntry:
    diff = Trajectory(phi_a.grid, phi_a.dt, phi_a.values - phi_b.values)
    sol = w21p_surrogate(diff, p)["total"]
    return StabilityEntry(sol, data_diff, sol / data_diff if data_diff >= NOT_APPLICABLE else None)


def data_difference(phi0_a: Field, g_a: Trajectory, phi0_b: Field, g_b: Trajectory, p: float) -> float:
    return initial_data_surrogate(phi0_a - phi0_b, p) + norm_Lp_Q(g_a - g_b, p)


def measure_stability(
    phi0_a: Field,
    g_a: Trajectory,
    phi0_b: Field,
    g_b: Trajectory,
    F: NonlinearityDescriptor,
    cfg: FixedPointConfig = FixedPointConfig(),
    scheme: ThetaScheme = ThetaScheme(),
    ledger: AprioriLedger | None = None,
) -> StabilityEntry:
    """Empirical constant of the continuous-dependence estimate.

    ratio = W21p surrogate of ``phi_a - phi_b`` over
    ``|phi0_a - phi0_b|_{Lp + H1} + |g_a - g_b|_{Lp(Q)}``; None when the
    data differ by less than 1e-14.
    """
    p = cfg.p
    data = data_difference(phi0_a, g_a, phi0_b, g_b, p)
    phi_a, _ = solve_auxiliary_fixed_point(g_a, phi0_a, F, cfg, scheme)
    if data < NOT_APPLICABLE:
        entry = StabilityEntry(0.0, data, None)
    else:
        phi_b, _ = solve_auxiliary_fixed_point(g_b, phi0_b, F, cfg, scheme, initial=phi_a, continuation=False)
        entry = stability_ratio(phi_a, phi_b, data, p)
    if ledger is not None:
        ledger.rows.append(entry.to_row())
    return entry


@dataclass
class StabilitySweep:
    eps: tuple[float, ...]
    ratios: tuple[float, ...]

    @property
    def spread(self) -> float:
        """max/min of the ratios; 1 means perfectly linear response."""
        return max(self.ratios) / min(self.ratios)

    def within(self, factor: float = 2.0) -> bool:
        return self.spread <= factor


def stability_sweep(
    phi0: Field,
    g: Trajectory,
    dphi0: Field,
    dg: Trajectory,
    F: NonlinearityDescriptor,
    eps: Sequence[float] = (1e-1, 1e-2, 1e-3, 1e-4),
    cfg: FixedPointConfig = FixedPointConfig(tol=1e-12),
    scheme: ThetaScheme = ThetaScheme(),
) -> StabilitySweep:
    """Stability ratio for data ``(phi0 + e dphi0, g + e dg)`` against the base data, per ``e``."""
    base, _ = solve_auxiliary_fixed_point(g, phi0, F, cfg, scheme)
    ratios = []
    for e in eps:
        pa, ga = phi0 + e * dphi0, g + e * dg
        other, _ = solve_auxiliary_fixed_point(ga, pa, F, cfg, scheme, initial=base, continuation=False)
        entry = stability_ratio(other, base, data_difference(pa, ga, phi0, g, cfg.p), cfg.p)
        if entry.ratio is None:
            raise ConfigError(f"perturbation at eps={e} is below the applicability threshold")
        ratios.append(entry.ratio)
    return StabilitySweep(tuple(float(e) for e in eps), tuple(ratios))
