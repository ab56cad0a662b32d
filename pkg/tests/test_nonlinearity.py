import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from caginalp.errors import ConfigError
from caginalp.nonlinearity import (
    M4Params,
    NonlinearityDescriptor,
    Verdict,
    builtin_double_well,
    builtin_hoffman_jiang,
    builtin_linear,
    builtin_power_law,
    builtin_zero,
    check_hypotheses,
    check_M4_violation,
    compute_embedding_exponent,
    estimate_a0,
    estimate_d0,
    estimate_growth_envelope,
    m4_box,
    m4_sides,
    reports_to_json,
    validate_H3,
)


def cube_down():
    return NonlinearityDescriptor("minus_cube", lambda z, x, t: -(z**3), r=3.0)


def test_builtin_values():
    dw = builtin_double_well()
    assert dw(0.0) == 0 and dw(1.0) == 0 and dw(-1.0) == 0
    assert dw(2.0) == -3.0
    pl = builtin_power_law(3, 1)
    assert pl(2.0) == -6.0
    for r1, r2 in [(3, 1), (2.5, 1.5), (4, 2)]:
        F = builtin_power_law(r1, r2)
        assert F(0.0) == 0 and F(-1.0) == 0
    hj = builtin_hoffman_jiang(1, 0)
    assert hj(0.0) == 0 and hj(1.0) == 0
    assert builtin_hoffman_jiang(1, 1)(2.0) == -2.0
    assert np.all(builtin_zero()(np.linspace(-3, 3, 7)) == 0)
    with pytest.raises(ConfigError):
        builtin_power_law(1, 2)
    with pytest.raises(ConfigError):
        NonlinearityDescriptor("bad", lambda z, x, t: z, r=0.5)


def test_a0_estimates():
    assert estimate_a0(builtin_double_well()) == pytest.approx(0.5, abs=1e-3)
    assert estimate_a0(builtin_power_law(2, 1)) == pytest.approx(1.0, abs=1e-3)
    assert estimate_a0(builtin_linear(-1.0)) == pytest.approx(-1.0, abs=1e-6)


@pytest.mark.parametrize("lam", [-2.0, -0.5, 0.3, 1.0, 3.0])
def test_linear_constants_are_exact(lam):
    F = builtin_linear(lam)
    assert estimate_a0(F) == pytest.approx(lam, abs=1e-6)
    c0, a = estimate_growth_envelope(F)
    # with r = 1 the envelope denominator is 1 + 1 + 1
    assert c0 == pytest.approx(lam**2 / 3, abs=1e-6)
    assert a <= abs(lam) + 1e-12


def test_growth_envelope_double_well_against_dense_oracle():
    F = builtin_double_well()
    _, a = estimate_growth_envelope(F)
    z = np.linspace(-10, 10, 2_000_001)
    oracle = float(np.max(np.abs(0.5 * (z - z**3)) / (1 + np.abs(z) ** 3)))
    assert a == pytest.approx(oracle, abs=1e-3)
    assert a <= 0.5
    c0, _ = estimate_growth_envelope(builtin_power_law(3, 1))
    assert math.isfinite(c0)


def test_d0_estimates():
    # sup of (z^2 - z^4) / (2 (1 + z^2)) sits at z^2 = sqrt(2) - 1
    assert estimate_d0(builtin_double_well()) == pytest.approx(1.5 - math.sqrt(2), abs=1e-6)
    assert estimate_d0(builtin_linear(-1.0)) == pytest.approx(0.0, abs=1e-12)
    d = estimate_d0(builtin_power_law(3, 1))
    assert 0 < d <= 0.25


@given(st.sampled_from([0.5, 1.0, 3.0, 10.0]), st.integers(1, 4))
def test_estimates_monotone_under_dyadic_enlargement(box, k):
    F = builtin_hoffman_jiang(0.7, 0.3)
    big = box * 2**k
    assert estimate_a0(F, big, 101) >= estimate_a0(F, box, 101)
    assert estimate_d0(F, big, 101) >= estimate_d0(F, box, 101)
    c_small, a_small = estimate_growth_envelope(F, box, 101)
    c_big, a_big = estimate_growth_envelope(F, big, 101)
    assert c_big >= c_small and a_big >= a_small


def test_m4_spot_value():
    F = builtin_power_law(3, 1)
    lhs, rhs = m4_sides(F, M4Params(1.0, 1.0, 2, 4, 3, 1), np.array([10.0]))
    assert float(lhs[0]) == pytest.approx(-9.9e6, rel=1e-12)
    assert float(rhs[0]) == pytest.approx(-9.0e7, rel=0.01)
    assert lhs[0] > rhs[0]


@pytest.mark.parametrize("alpha", np.geomspace(0.1, 10, 5))
@pytest.mark.parametrize("beta", np.geomspace(0.1, 10, 5))
def test_m4_witness_on_parameter_grid(alpha, beta):
    F = builtin_power_law(3, 1)
    prm = M4Params(float(alpha), float(beta), 2, 4, 3, 1)
    w = check_M4_violation(F, prm, box=m4_box(prm, 3.0))
    assert w is not None
    lhs, rhs = m4_sides(F, prm, w)
    assert lhs > rhs


def test_polynomial_box_formula_is_too_small():
    # (2 alpha/beta + 2)^(1/(r - r1)) + 1 stops short of the first violation here
    F = builtin_power_law(3, 1)
    prm = M4Params(float(np.geomspace(0.1, 10, 5)[1]), 0.1, 2, 4, 3, 1)
    small = max(10.0, (2 * prm.alpha / prm.beta + 2) + 1)
    assert check_M4_violation(F, prm, box=small) is None
    assert check_M4_violation(F, prm, box=m4_box(prm, 3.0)) is not None


def test_m4_no_witness_cases():
    assert check_M4_violation(cube_down(), M4Params(5.0, 1.0, 2, 3), box=10) is None
    assert check_M4_violation(builtin_zero(), M4Params(10.0, 1.0, 2, 4), box=10) is None
    with pytest.raises(ConfigError):
        m4_box(M4Params(1.0, 1.0, 2, 3), 3.0)


def test_embedding_and_h3_examples():
    assert compute_embedding_exponent(2, 1).kind == "unbounded"
    assert compute_embedding_exponent(2, 2).kind == "any"
    e = compute_embedding_exponent(2, 5)
    assert e.kind == "finite" and e.q_max == pytest.approx(14 / 3)
    assert validate_H3(2, 1, 100) == Verdict.PASS
    assert validate_H3(2, 5, 2) == Verdict.PASS
    assert validate_H3(2, 5, 3) == Verdict.FAIL


@given(st.floats(1.0, 6.0), st.integers(1, 6), st.floats(1.0, 10.0))
def test_h3_agrees_with_embedding(p, N, r):
    e = compute_embedding_exponent(p, N)
    expected = e.unbounded or p * r < e.q_max
    assert (validate_H3(p, N, r) == Verdict.PASS) == expected


def test_report_json_and_witnesses():
    F = NonlinearityDescriptor("dw_declared", builtin_double_well().evaluator, r=3.0, a0=0.1)
    reports = check_hypotheses(F, p=2, N=1, m4=M4Params(1.0, 1.0, 2, 4))
    by = {r.hypothesis: r for r in reports}
    assert by["H1"].verdict == Verdict.FAIL and by["H1"].witness is not None
    assert by["H3"].verdict == Verdict.PASS
    assert by["H4"].verdict == Verdict.PASS
    data = json.loads(reports_to_json(reports))
    assert {d["hypothesis"] for d in data} >= {"H1", "H2", "growth", "sign", "H3", "H4", "M4"}
    pl = check_hypotheses(builtin_power_law(3, 1), m4=M4Params(1.0, 1.0, 2, 4, 3, 1))
    m4 = [r for r in pl if r.hypothesis == "M4"][0]
    assert m4.verdict == Verdict.FAIL and m4.witness is not None
    for r in reports + pl:
        if r.verdict == Verdict.FAIL:
            assert r.witness is not None


def test_bad_box():
    with pytest.raises(ConfigError):
        estimate_a0(builtin_double_well(), box=-1)
    with pytest.raises(ConfigError):
        estimate_a0(builtin_double_well(), samples=10)
