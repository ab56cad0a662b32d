"""
Pluggable reaction terms F(x, t, z) and sampling-based hypothesis checks.

The checks estimate the constants of the one-sided Lipschitz bound (a0),
the quadratic difference envelope (c0), the growth bound (a) and the sign
bound (d0) by sampling a box ``[-box, box]``.  They are estimates, never
proofs: the sup over all of R is replaced by a max over finitely many
points, so each returned constant is a lower bound of the true sup on the
box.

Sampling is multi-scale: ``samples`` uniform points on ``[-B, B]`` for
``B = box, box/2, box/4, ...`` down to ``MIN_LEVEL``.  Pairs are formed
inside each level.  For boxes related by a factor ``2**k`` the sample sets
are nested, so enlarging the box by doubling never lowers an estimate.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, InconclusiveError

Evaluator = Callable[[np.ndarray, object, object], np.ndarray]

DEFAULT_SAMPLES = 400
MIN_LEVEL = 2.0**-6
# Violations within this relative distance of equality are rounding noise.
M4_RTOL = 1e-12


class Verdict(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class NonlinearityDescriptor:
    """F(x, t, z) plus its declared growth exponent and optional constants.

    ``evaluator(z, x, t)`` must be vectorised in ``z``.  ``x`` is an array of
    node coordinates (shape ``(nodes, dim)``) or None, ``t`` an array of
    frame times shaped to broadcast against ``z`` or None.  Autonomous
    evaluators ignore both.
    """

    name: str
    evaluator: Evaluator
    r: float
    a0: float | None = None
    c0: float | None = None
    a: float | None = None
    d0: float | None = None
    autonomous: bool = True
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.r >= 1:
            raise ConfigError(f"growth exponent r must be >= 1, got {self.r}")

    def __call__(self, z, x=None, t=None) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        return np.broadcast_to(np.asarray(self.evaluator(z, x, t), dtype=float), z.shape)


def builtin_double_well() -> NonlinearityDescriptor:
    """Classical two-well term F(z) = (z - z^3)/2."""
    return NonlinearityDescriptor("double_well", lambda z, x, t: 0.5 * (z - z**3), r=3.0)


def builtin_power_law(r1: float, r2: float) -> NonlinearityDescriptor:
    """F(z) = |z|^(r2-1) z - |z|^(r1-1) z with 1 <= r2 < r1."""
    r1, r2 = float(r1), float(r2)
    if not (1 <= r2 < r1):
        raise ConfigError(f"power law needs 1 <= r2 < r1, got r1={r1}, r2={r2}")

    def F(z, x, t):
        az = np.abs(z)
        return az ** (r2 - 1) * z - az ** (r1 - 1) * z

    return NonlinearityDescriptor(f"power_law(r1={r1:g},r2={r2:g})", F, r=r1, params={"r1": r1, "r2": r2})


def builtin_hoffman_jiang(a_coef: float, b_coef: float) -> NonlinearityDescriptor:
    """F(z) = a z + b z^2 - z^3 (constant coefficients)."""
    a_coef, b_coef = float(a_coef), float(b_coef)
    return NonlinearityDescriptor(
        f"hoffman_jiang(a={a_coef:g},b={b_coef:g})",
        lambda z, x, t: a_coef * z + b_coef * z**2 - z**3,
        r=3.0,
        params={"a": a_coef, "b": b_coef},
    )


def builtin_linear(slope: float) -> NonlinearityDescriptor:
    """F(z) = slope * z."""
    slope = float(slope)
    return NonlinearityDescriptor(f"linear({slope:g})", lambda z, x, t: slope * z, r=1.0, params={"slope": slope})


def builtin_zero() -> NonlinearityDescriptor:
    return NonlinearityDescriptor("zero", lambda z, x, t: np.zeros_like(z), r=1.0)


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def _check_box(box: float, samples: int) -> tuple[float, int]:
    box = float(box)
    if not (box > 0 and math.isfinite(box)):
        raise ConfigError(f"sampling box must be positive, got {box}")
    if samples < 100:
        raise ConfigError(f"need at least 100 samples per axis, got {samples}")
    # odd count keeps the origin on every level
    return box, int(samples) | 1


def sample_levels(box: float, samples: int = DEFAULT_SAMPLES) -> list[np.ndarray]:
    """Nested uniform levels on ``[-box/2^k, box/2^k]``."""
    box, n = _check_box(box, samples)
    levels = [np.linspace(-box, box, n)]
    b = box / 2
    while b >= MIN_LEVEL:
        levels.append(np.linspace(-b, b, n))
        b /= 2
    return levels


def _evaluate(F: NonlinearityDescriptor, z: np.ndarray, x, t) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore"):
        vals = F(z, x, t)
    if not np.all(np.isfinite(vals)):
        bad = z[~np.isfinite(vals)][0]
        raise InconclusiveError(f"{F.name} is not finite at z={bad:g}")
    return vals


def _xt_points(xt):
    return [(None, None)] if xt is None else list(xt)


class _Sup(NamedTuple):
    value: float
    z1: float
    z2: float
    x: object
    t: object


def _sup_pairs(F, box, samples, kernel, xt=None) -> _Sup:
    """Max of ``kernel(z1, z2, F1, F2)`` over off-diagonal pairs of every level."""
    best = _Sup(-math.inf, math.nan, math.nan, None, None)
    for x, t in _xt_points(xt):
        for z in sample_levels(box, samples):
            Fz = _evaluate(F, z, x, t)
            with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
                q = kernel(z[:, None], z[None, :], Fz[:, None], Fz[None, :])
            np.fill_diagonal(q, -np.inf)
            if np.any(np.isnan(q)) or np.any(q == np.inf):
                raise InconclusiveError(f"{F.name}: difference quotient overflowed in box {box:g}")
            i, j = np.unravel_index(np.argmax(q), q.shape)
            if q[i, j] > best.value:
                best = _Sup(float(q[i, j]), float(z[i]), float(z[j]), x, t)
    return best


def _sup_points(F, box, samples, kernel, xt=None) -> _Sup:
    best = _Sup(-math.inf, math.nan, math.nan, None, None)
    for x, t in _xt_points(xt):
        z = np.unique(np.concatenate(sample_levels(box, samples)))
        Fz = _evaluate(F, z, x, t)
        with np.errstate(over="ignore", invalid="ignore"):
            q = kernel(z, Fz)
        if not np.all(np.isfinite(q)):
            raise InconclusiveError(f"{F.name}: bound ratio overflowed in box {box:g}")
        i = int(np.argmax(q))
        if q[i] > best.value:
            best = _Sup(float(q[i]), float(z[i]), float(z[i]), x, t)
    return best


def _a0_kernel(z1, z2, F1, F2):
    return (F1 - F2) / (z1 - z2)


def _c0_kernel(r):
    def k(z1, z2, F1, F2):
        return (F1 - F2) ** 2 / ((z1 - z2) ** 2 * (1 + np.abs(z1) ** (2 * r - 2) + np.abs(z2) ** (2 * r - 2)))

    return k


def _growth_kernel(r):
    return lambda z, Fz: np.abs(Fz) / (1 + np.abs(z) ** r)


def _d0_kernel(z, Fz):
    return Fz * z / (1 + z**2)


def estimate_a0(F: NonlinearityDescriptor, box: float = 10.0, samples: int = DEFAULT_SAMPLES, xt=None) -> float:
    """Largest sampled ``(F(z1)-F(z2))/(z1-z2)``: the one-sided Lipschitz constant.

    Raises:
        InconclusiveError: F overflows inside the box.
    """
    return _sup_pairs(F, box, samples, _a0_kernel, xt).value


def estimate_growth_envelope(
    F: NonlinearityDescriptor, box: float = 10.0, samples: int = DEFAULT_SAMPLES, xt=None
) -> tuple[float, float]:
    """Return ``(c0_est, a_est)`` for exponent ``F.r``.

    c0_est = max (F1-F2)^2 / ((z1-z2)^2 (1 + |z1|^(2r-2) + |z2|^(2r-2)))
    a_est  = max |F(z)| / (1 + |z|^r)
    """
    c0 = _sup_pairs(F, box, samples, _c0_kernel(F.r), xt).value
    a = _sup_points(F, box, samples, _growth_kernel(F.r), xt).value
    return c0, a


def estimate_d0(F: NonlinearityDescriptor, box: float = 10.0, samples: int = DEFAULT_SAMPLES, xt=None) -> float:
    """Largest sampled ``F(z) z / (1 + z^2)``."""
    return _sup_points(F, box, samples, _d0_kernel, xt).value


# ---------------------------------------------------------------------------
# (M4) counterexample search
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class M4Params:
    """Constants of the bound F(z)|z|^(pr-r-1) z <= alpha(1+|z|^(pr-1)) - beta|z|^pr."""

    alpha: float
    beta: float
    p: float = 2.0
    r: float = 4.0
    r1: float | None = None
    r2: float | None = None

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ConfigError(f"alpha and beta must be positive, got {self.alpha}, {self.beta}")
        if not self.p >= 2:
            raise ConfigError(f"p must be >= 2, got {self.p}")
        if not self.r >= 1:
            raise ConfigError(f"r must be >= 1, got {self.r}")
        if self.r1 is not None and self.r2 is not None and not self.r2 < self.r1:
            raise ConfigError(f"need r2 < r1, got r1={self.r1}, r2={self.r2}")


def m4_sides(F: NonlinearityDescriptor, params: M4Params, z, x=None, t=None) -> tuple[np.ndarray, np.ndarray]:
    """Both sides of the (M4) inequality evaluated directly at ``z``."""
    z = np.asarray(z, dtype=float)
    pr, r = params.p * params.r, params.r
    az = np.abs(z)
    lhs = F(z, x, t) * az ** (pr - r - 1) * z
    rhs = params.alpha * (1 + az ** (pr - 1)) - params.beta * az**pr
    return lhs, rhs


def _m4_scaled(F, params, z, x, t):
    """Sides divided by ``max(1, |z|)^pr`` so large |z| stays representable."""
    pr, r = params.p * params.r, params.r
    az = np.abs(z)
    s = np.maximum(az, 1.0)
    Fz = _evaluate(F, z, x, t)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        lhs = Fz * np.sign(z) * az ** (pr - r) / s**pr
        lhs = np.where(z == 0, 0.0, lhs)
        a_term = params.alpha * (1 / s**pr + az ** (pr - 1) / s**pr)
        b_term = params.beta * (az / s) ** pr
    scale = np.abs(lhs) + a_term + b_term
    return lhs, a_term - b_term, scale


def m4_search_points(box: float, n: int = 4000) -> np.ndarray:
    """Candidate |z| values, log-spaced (dense at large |z|) plus a uniform sweep."""
    box = float(box)
    mags = np.concatenate([np.geomspace(min(1e-3, box), box, n), np.linspace(0, box, n // 4)])
    return np.unique(mags)


def check_M4_violation(
    F: NonlinearityDescriptor, params: M4Params, box: float = 10.0, xt=None, n: int = 4000
) -> float | None:
    """Return the smallest-|z| sampled point violating (M4), or None.

    None means no violation was found in the bounded search, which is
    inconclusive rather than a proof that (M4) holds.
    """
    mags = m4_search_points(box, n)
    z = np.stack([mags, -mags], axis=1).ravel()
    for x, t in _xt_points(xt):
        lhs, rhs, scale = _m4_scaled(F, params, z, x, t)
        bad = lhs - rhs > M4_RTOL * scale
        if np.any(bad):
            return float(z[np.argmax(bad)])
    return None


def m4_box(params: M4Params, r1: float) -> float:
    """Search radius that provably contains a violation for the power law with exponent r1 < r.

    For |z| >= 1 the power law gives LHS >= -|z|^(pr-r+r1) and
    RHS <= 2 alpha |z|^(pr-1) - beta |z|^pr, so LHS > RHS as soon as
    |z| >= 4 alpha/beta and |z|^(r-r1) > 2/beta.
    """
    a, b = params.alpha, params.beta
    if not r1 < params.r:
        raise ConfigError(f"no violation radius: need r1 < r, got r1={r1}, r={params.r}")
    z = max(1.0, 4 * a / b, (2 / b) ** (1 / (params.r - r1)))
    return max(10.0, 1.1 * z + 1)


# ---------------------------------------------------------------------------
# exponent logic
# ---------------------------------------------------------------------------


class EmbeddingExponent(NamedTuple):
    """Admissible q for W^{2,1}_p(Q) -> L^q(Q).

    kind is "unbounded" (q = inf allowed), "any" (every finite q >= 1) or
    "finite" (q = q_max).
    """

    kind: str
    q_max: float

    @property
    def unbounded(self) -> bool:
        return self.kind != "finite"


def compute_embedding_exponent(p: float, N: int) -> EmbeddingExponent:
    if not p >= 1 or N < 1:
        raise ConfigError(f"need p >= 1 and N >= 1, got p={p}, N={N}")
    crit = (N + 2) / 2
    if p > crit:
        return EmbeddingExponent("unbounded", math.inf)
    if p == crit:
        return EmbeddingExponent("any", math.inf)
    return EmbeddingExponent("finite", p * (N + 2) / (N + 2 - 2 * p))


def validate_H3(p: float, N: int, r: float) -> Verdict:
    """Allowed growth exponents: any r >= 1 if p >= (N+2)/2, else 1 <= r < (N+2)/(N+2-2p)."""
    if not r >= 1:
        return Verdict.FAIL
    if p >= (N + 2) / 2:
        return Verdict.PASS
    return Verdict.PASS if r < (N + 2) / (N + 2 - 2 * p) else Verdict.FAIL


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


@dataclass
class HypothesisReport:
    hypothesis: str
    verdict: Verdict
    constant_estimate: float | None
    witness: tuple | None
    box: float
    samples: int
    note: str = ""

    def __post_init__(self):
        if self.verdict == Verdict.FAIL and self.witness is None:
            raise ValueError(f"{self.hypothesis}: a failing verdict needs a witness")

    def to_json(self) -> dict:
        d = asdict(self)
        d["verdict"] = self.verdict.value
        d["witness"] = None if self.witness is None else [_jsonable(v) for v in self.witness]
        return d


def _jsonable(v):
    if v is None or isinstance(v, (int, float, str)):
        return v
    arr = np.asarray(v)
    return arr.item() if arr.ndim == 0 else arr.tolist()


def _witness(s: _Sup) -> tuple:
    return (s.z1, s.z2, s.x, s.t)


def _constant_check(name, sup: _Sup, declared, box, samples, note) -> HypothesisReport:
    if declared is not None and sup.value > declared * (1 + 1e-9) + 1e-12:
        return HypothesisReport(
            name, Verdict.FAIL, sup.value, _witness(sup), box, samples, f"declared constant {declared:g} exceeded"
        )
    return HypothesisReport(name, Verdict.PASS, sup.value, None, box, samples, note)


def check_hypotheses(
    F: NonlinearityDescriptor,
    box: float = 10.0,
    samples: int = DEFAULT_SAMPLES,
    p: float | None = None,
    N: int | None = None,
    m4: M4Params | None = None,
    xt=None,
) -> list[HypothesisReport]:
    """Run every check on F and collect one report per hypothesis."""
    box, n = _check_box(box, samples)
    lower = "sampled sup; a lower bound of the true sup on the box"
    reports: list[HypothesisReport] = []

    def guarded(name, fn):
        try:
            reports.append(fn())
        except InconclusiveError as exc:
            reports.append(HypothesisReport(name, Verdict.INCONCLUSIVE, None, None, box, n, str(exc)))

    guarded("H1", lambda: _constant_check("H1", _sup_pairs(F, box, n, _a0_kernel, xt), F.a0, box, n, lower))
    guarded("H2", lambda: _constant_check("H2", _sup_pairs(F, box, n, _c0_kernel(F.r), xt), F.c0, box, n, lower))
    guarded(
        "growth",
        lambda: _constant_check("growth", _sup_points(F, box, n, _growth_kernel(F.r), xt), F.a, box, n, lower),
    )
    guarded("sign", lambda: _constant_check("sign", _sup_points(F, box, n, _d0_kernel, xt), F.d0, box, n, lower))

    if p is None or N is None:
        reports.append(HypothesisReport("H3", Verdict.INCONCLUSIVE, None, None, box, n, "p and N not supplied"))
    else:
        q = compute_embedding_exponent(p, N)
        reports.append(
            HypothesisReport("H3", validate_H3(p, N, F.r), F.r, None, box, n, f"embedding exponent {q.kind} {q.q_max:g}")
        )

    def h4():
        for x, t in _xt_points(xt):
            _evaluate(F, np.concatenate(sample_levels(box, n)), x, t)
        return HypothesisReport("H4", Verdict.PASS, None, None, box, n, "finite on every sample")

    guarded("H4", h4)

    if m4 is not None:
        mbox = box if m4.r1 is None or not m4.r1 < m4.r else max(box, m4_box(m4, m4.r1))
        try:
            w = check_M4_violation(F, m4, mbox, xt)
        except InconclusiveError as exc:
            reports.append(HypothesisReport("M4", Verdict.INCONCLUSIVE, None, None, mbox, n, str(exc)))
        else:
            if w is None:
                reports.append(HypothesisReport("M4", Verdict.INCONCLUSIVE, None, None, mbox, n, "no violation in box"))
            else:
                lhs, rhs = m4_sides(F, m4, w)
                reports.append(
                    HypothesisReport(
                        "M4", Verdict.FAIL, None, (w, w, None, None), mbox, n, f"lhs={float(lhs):.6g} > rhs={float(rhs):.6g}"
                    )
                )
    return reports


def reports_to_json(reports: Sequence[HypothesisReport]) -> str:
    return json.dumps([r.to_json() for r in reports], indent=2)
