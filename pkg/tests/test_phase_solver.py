import math

import numpy as np
import pytest

from caginalp.errors import BlowUpError, ConfigError, FixedPointError
from caginalp.mesh import Field, Grid, Trajectory, norm_Lp_Q
from caginalp.nonlinearity import NonlinearityDescriptor, builtin_double_well, builtin_linear, builtin_zero
from caginalp.phase_solver import (
    AprioriLedger,
    FixedPointConfig,
    apply_L,
    energy_constant,
    measure_energy_inequality,
    measure_stability,
    solve_auxiliary_fixed_point,
    solve_auxiliary_stepping,
    stability_sweep,
)

G = Grid.line(11)


def logistic_phi(phi0, t):
    return 1.0 / np.sqrt(1.0 + (1.0 / phi0**2 - 1.0) * np.exp(-t))


def test_apply_L_lambda0_ignores_iterate():
    rng = np.random.default_rng(0)
    g = Trajectory(G, 0.01, rng.normal(size=(21, G.size)))
    phi0 = Field(G, rng.normal(size=G.size))
    w1 = Trajectory(G, 0.01, rng.normal(size=g.values.shape) * 5)
    w2 = Trajectory(G, 0.01, rng.normal(size=g.values.shape) * 5)
    F = builtin_double_well()
    a, b = apply_L(w1, 0.0, g, phi0, F), apply_L(w2, 0.0, g, phi0, F)
    assert np.array_equal(a.values, b.values)
    with pytest.raises(ConfigError):
        apply_L(w1, 1.5, g, phi0, F)


def test_apply_L_linear_ode():
    # spatially constant w = 1, g = 0, F = -z: phi' = -1, so phi(t) = phi0 - t
    w = Trajectory.constant(G, 1e-3, 500, 1.0)
    out = apply_L(w, 1.0, Trajectory.zeros(G, 1e-3, 500), Field.constant(G, 1.0), builtin_linear(-1.0))
    np.testing.assert_allclose(out.values[:, 0], 1.0 - out.times, atol=1e-10)


def test_zero_nonlinearity_converges_immediately():
    g = Trajectory.from_function(G, 0.01, 50, lambda t, x: np.cos(np.pi * x) * t)
    phi, led = solve_auxiliary_fixed_point(g, Field.zeros(G), builtin_zero())
    assert all(led.iterations[lam] <= 1 for lam in led.iterations)
    assert led.converged


def test_zero_data_gives_zero_solution():
    phi, led = solve_auxiliary_fixed_point(Trajectory.zeros(G, 0.01, 20), Field.zeros(G), builtin_double_well())
    assert np.all(phi.values == 0)
    assert led.total_iterations == 0


def test_linear_decay_fixed_point():
    phi, _ = solve_auxiliary_fixed_point(
        Trajectory.zeros(G, 1e-3, 1000), Field.constant(G, 1.0), builtin_linear(-1.0), FixedPointConfig(tol=1e-12)
    )
    np.testing.assert_allclose(phi.values[:, 3], np.exp(-phi.times), atol=1e-6)


def test_logistic_closed_form():
    phi, led = solve_auxiliary_fixed_point(Trajectory.zeros(G, 1e-3, 4000), Field.constant(G, 0.1), builtin_double_well())
    err = np.abs(phi.values - logistic_phi(0.1, phi.times)[:, None]).max()
    assert err < 1e-4
    assert led.converged and led.damping == 1.0


def test_residuals_decrease_within_each_lambda():
    g = Trajectory.from_function(G, 0.01, 100, lambda t, x: 0.3 * np.cos(np.pi * x))
    _, led = solve_auxiliary_fixed_point(g, Field.constant(G, 0.4), builtin_double_well())
    by_lam = {}
    for row in led.rows:
        if row["residual"] is not None:
            by_lam.setdefault(row["lambda"], []).append(row["residual"])
    for lam, res in by_lam.items():
        assert all(b <= a for a, b in zip(res, res[1:]))
        assert res[-1] <= 1e-8
    assert led.rows[-1]["norm_phi_Lpr"] is not None
    assert set(led.notes["fixed_point_norms"]) == set(FixedPointConfig().schedule)


def test_random_start_reaches_same_solution():
    g = Trajectory.from_function(G, 0.01, 100, lambda t, x: 0.3 * np.cos(np.pi * x))
    phi0 = Field.constant(G, 0.4)
    F = builtin_double_well()
    a, _ = solve_auxiliary_fixed_point(g, phi0, F, FixedPointConfig(tol=1e-12))
    rng = np.random.default_rng(5)
    start = Trajectory(G, 0.01, rng.uniform(-1, 1, g.values.shape))
    b, _ = solve_auxiliary_fixed_point(g, phi0, F, FixedPointConfig(tol=1e-12), initial=start, continuation=False)
    assert norm_Lp_Q(a - b, 2) < 1e-7


def test_stepping_logistic_and_guard():
    phi = solve_auxiliary_stepping(Trajectory.zeros(G, 1e-3, 4000), Field.constant(G, 0.1), builtin_double_well())
    assert np.abs(phi.values - logistic_phi(0.1, phi.times)[:, None]).max() < 1e-3
    cube = NonlinearityDescriptor("cube", lambda z, x, t: z**3, r=3.0)
    with pytest.raises(BlowUpError) as info:
        solve_auxiliary_stepping(Trajectory.zeros(G, 0.01, 100), Field.constant(G, 2.0), cube)
    assert info.value.step < 100


def test_fixed_point_failure_carries_ledger():
    g = Trajectory.from_function(G, 0.01, 100, lambda t, x: np.cos(np.pi * x))
    with pytest.raises(FixedPointError) as info:
        solve_auxiliary_fixed_point(g, Field.constant(G, 0.5), builtin_double_well(), FixedPointConfig(tol=1e-15, max_iter=1))
    assert isinstance(info.value.ledger, AprioriLedger)
    assert not info.value.ledger.converged


def test_config_validation():
    with pytest.raises(ConfigError):
        FixedPointConfig(schedule=(0.5, 1.0))
    with pytest.raises(ConfigError):
        FixedPointConfig(schedule=(0.0, 0.5, 0.5, 1.0))
    with pytest.raises(ConfigError):
        FixedPointConfig(damping=0.0)
    with pytest.raises(ConfigError):
        FixedPointConfig(tol=0)


def test_energy_zero_and_linear_decay():
    z = measure_energy_inequality(Trajectory.zeros(G, 0.01, 10), Trajectory.zeros(G, 0.01, 10), Field.zeros(G), builtin_zero())
    assert np.all(z.lhs == 0) and z.holds
    F = builtin_linear(-1.0)
    phi, _ = solve_auxiliary_fixed_point(Trajectory.zeros(G, 1e-3, 1000), Field.constant(G, 2.0), F, FixedPointConfig(tol=1e-12))
    e = measure_energy_inequality(phi, Trajectory.zeros(G, 1e-3, 1000), Field.constant(G, 2.0), F)
    np.testing.assert_allclose(e.lhs, 0.5 * 4.0 * np.exp(-2 * phi.times), rtol=1e-5)
    assert e.holds


def test_energy_cosine_balance():
    # heat flow of c cos(pi x): 1/2 |phi|^2 + int |grad phi|^2 stays c^2/4
    g = Grid.line(201)
    phi0 = Field.from_function(g, lambda x: 0.8 * np.cos(np.pi * x))
    phi, _ = solve_auxiliary_fixed_point(Trajectory.zeros(g, 1e-3, 500), phi0, builtin_zero())
    e = measure_energy_inequality(phi, Trajectory.zeros(g, 1e-3, 500), phi0, builtin_zero())
    np.testing.assert_allclose(e.lhs, 0.16, rtol=1e-3)


def test_energy_constant_counterexample():
    # F = 0, g = 1, phi0 = 0 on |Omega| = 1: phi = t, so 1/2 phi(T)^2 = T^2/2
    T = 4.0
    lhs = T**2 / 2
    assert lhs > math.exp(0 * T) * (1 + 0 * T) * (1 + T)
    assert lhs <= energy_constant(0.0, 1.0, T) * (1 + T)


def test_energy_double_well_margin():
    g = Trajectory.from_function(G, 0.01, 100, lambda t, x: 0.5 * np.cos(np.pi * x))
    phi0 = Field.constant(G, 0.3)
    phi, _ = solve_auxiliary_fixed_point(g, phi0, builtin_double_well())
    e = measure_energy_inequality(phi, g, phi0, builtin_double_well())
    assert e.holds and e.d0 == pytest.approx(1.5 - math.sqrt(2), abs=1e-6)


def test_stability_identical_data_not_applicable():
    g = Trajectory.zeros(G, 0.01, 20)
    entry = measure_stability(Field.constant(G, 0.2), g, Field.constant(G, 0.2), g, builtin_double_well())
    assert entry.ratio is None


def test_stability_linear_is_eps_independent():
    g = Trajectory.from_function(G, 0.01, 100, lambda t, x: np.cos(np.pi * x))
    sweep = stability_sweep(
        Field.constant(G, 0.2), g, Field.from_function(G, lambda x: np.cos(np.pi * x)), Trajectory.constant(G, 0.01, 100, 1.0),
        builtin_linear(-0.5),
    )
    assert sweep.spread - 1 < 1e-10


def test_stability_double_well_sweep():
    g = Trajectory.from_function(G, 0.01, 100, lambda t, x: 0.2 * np.exp(-t) * np.cos(np.pi * x))
    sweep = stability_sweep(
        Field.constant(G, 0.1), g, Field.from_function(G, lambda x: np.cos(np.pi * x)), Trajectory.constant(G, 0.01, 100, 1.0),
        builtin_double_well(),
    )
    assert sweep.within(2.0)
