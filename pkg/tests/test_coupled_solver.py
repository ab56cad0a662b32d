import json
import math

import numpy as np
import pytest

from caginalp.coupled_solver import (
    SystemConfig,
    apply_outer_L,
    check_conservation,
    check_uniqueness,
    load_manifest,
    measure_main_estimate,
    method_gap,
    save_solution,
    solve_system,
    system_stability_sweep,
)
from caginalp.errors import ConfigError
from caginalp.mesh import Field, Grid, Trajectory
from caginalp.nonlinearity import builtin_double_well, builtin_power_law, builtin_zero
from caginalp.phase_solver import FixedPointConfig
from caginalp.verification import default_corpus, ode_reduction_case, ode_reduction_oracle

G = Grid.line(11)


def constant_case(F, u0, phi0, dt=1e-3, T=1.0, l=1.0):
    steps = int(round(T / dt))
    return SystemConfig(l, Trajectory.zeros(G, dt, steps), Field.constant(G, u0), Field.constant(G, phi0), F)


def test_outer_operator_lambda0_is_zero():
    cfg = default_corpus()[2].config(21, 0.02)
    rng = np.random.default_rng(2)
    g = Trajectory(cfg.grid, cfg.dt, rng.normal(size=cfg.f.values.shape) * 3)
    assert np.all(apply_outer_L(g, 0.0, cfg).values == 0)


def test_zero_data_gives_zero_pair():
    cfg = constant_case(builtin_zero(), 0.0, 0.0, dt=0.01)
    for method in ("homotopy", "stepping"):
        pair = solve_system(cfg, method)
        assert np.all(pair.u.values == 0) and np.all(pair.phi.values == 0)


def test_ode_reduction_closed_form():
    pair = solve_system(ode_reduction_case(), "homotopy")
    assert np.abs(pair.u.values[-1] - math.exp(-1)).max() < 1e-4
    assert np.abs(pair.phi.values[-1] - (1 - math.exp(-1))).max() < 1e-4
    assert pair.residual <= 1e-8


def test_double_well_pair_matches_ode_oracle():
    cfg = constant_case(builtin_double_well(), 0.0, 0.1)
    ref = ode_reduction_oracle(cfg)
    pair = solve_system(cfg, "homotopy")
    assert np.abs(pair.u.values - ref.u.values).max() < 1e-3
    assert np.abs(pair.phi.values - ref.phi.values).max() < 1e-3


def test_outer_residuals_non_increasing():
    pair = solve_system(default_corpus()[3].config(21, 0.02), "homotopy")
    led = pair.outer_ledger
    by_lam = {}
    for row in led.rows:
        if row["residual"] is not None:
            by_lam.setdefault(row["lambda"], []).append(row["residual"])
    for res in by_lam.values():
        assert all(b <= a for a, b in zip(res, res[1:]))
    assert by_lam[1.0][-1] <= 1e-8


def test_uniqueness_zero_nonlinearity():
    # the distance tracks the outer tolerance, so tighten it for the 1e-12 target
    cfg = constant_case(builtin_zero(), 1.0, 0.0, dt=0.01)
    cfg = cfg.replace(outer=FixedPointConfig(tol=1e-12, r=1.0), inner=FixedPointConfig(tol=1e-12))
    rep = check_uniqueness(cfg)
    assert rep.passed and rep.distance_u < 1e-12 and rep.distance_phi < 1e-12


@pytest.mark.parametrize("F", [builtin_double_well(), builtin_power_law(3, 1)], ids=["dw", "pl"])
def test_uniqueness_nonlinear(F):
    grid = Grid.line(21)
    cfg = SystemConfig(
        1.0,
        Trajectory.zeros(grid, 0.02, 50),
        Field.from_function(grid, lambda x: 0.2 * np.cos(np.pi * x)),
        Field.from_function(grid, lambda x: 0.3 + 0.2 * np.cos(np.pi * x)),
        F,
    )
    rep = check_uniqueness(cfg, seed=3)
    assert rep.passed and rep.distance_u < 1e-7 and rep.distance_phi < 1e-7


def test_conservation_examples():
    zero = constant_case(builtin_zero(), 0.0, 0.0, dt=0.01)
    assert check_conservation(solve_system(zero), zero).max_relative_drift == 0.0
    ode = ode_reduction_case()
    assert check_conservation(solve_system(ode), ode, 1e-10).passed
    dw = default_corpus()[3].config(41, 0.01)
    for method in ("homotopy", "stepping"):
        assert check_conservation(solve_system(dw, method), dw).passed


def test_main_estimate():
    zero = constant_case(builtin_zero(), 0.0, 0.0, dt=0.01)
    assert measure_main_estimate(solve_system(zero), zero).ratio is None
    ode = ode_reduction_case()
    r = measure_main_estimate(solve_system(ode), ode).ratio
    assert r is not None and math.isfinite(r) and r > 0


def test_cross_method_agreement():
    cfg = default_corpus()[2].config(41, 0.01)
    gap = method_gap(cfg)
    assert gap["u"] + gap["phi"] < 1e-5 + cfg.dt


def test_system_eps_sweep_linear_response():
    cfg = default_corpus()[3].config(21, 0.02)
    grid = cfg.grid
    ratios = system_stability_sweep(
        cfg,
        Field.from_function(grid, lambda x: np.cos(np.pi * x)),
        Field.constant(grid, 1.0),
        Trajectory.zeros(grid, cfg.dt, cfg.steps),
    )
    assert max(ratios) / min(ratios) <= 2.0


def test_manifest_written_and_not_overwritten(tmp_path):
    cfg = constant_case(builtin_double_well(), 0.1, 0.2, dt=0.01)
    pair = solve_system(cfg, "stepping")
    path = save_solution(pair, cfg, tmp_path, "abc")
    m = load_manifest(tmp_path)
    assert m["config_hash"] == "abc" and m["method"] == "stepping"
    assert len(m["times"]) == cfg.steps + 1
    assert not m["manufactured_phase_source"]
    json.loads(path.read_text())
    with pytest.raises(ConfigError):
        save_solution(pair, cfg, tmp_path, "abc")
    assert not any(p.name.endswith(".tmp") for p in tmp_path.iterdir())


def test_config_validation():
    with pytest.raises(ConfigError):
        constant_case(builtin_zero(), 0, 0, l=0.0)
    cfg = constant_case(builtin_zero(), 0, 0, dt=0.01)
    with pytest.raises(ConfigError):
        cfg.replace(p=1.5)
    with pytest.raises(ConfigError):
        cfg.replace(u0=Field.zeros(Grid.line(5)))
    with pytest.raises(ConfigError):
        solve_system(cfg, "newton")
