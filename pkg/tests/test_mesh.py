import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from caginalp.errors import ConfigError, NonFiniteFieldError
from caginalp.mesh import (
    Field,
    Grid,
    Trajectory,
    h1_seminorm,
    laplacian_neumann,
    laplacian_values,
    mean,
    norm_Lp_omega,
    norm_Lp_Q,
    read_field_csv,
    read_trajectory_csv,
    write_field_csv,
    write_trajectory_csv,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def test_laplacian_three_nodes_unit_spacing():
    g = Grid((2.0,), (3,))
    out = laplacian_neumann(Field(g, np.array([1.0, 2.0, 4.0])))
    np.testing.assert_allclose(out.values, [2.0, 1.0, -4.0])


def test_laplacian_of_constant_is_zero():
    g = Grid.rectangle(7, 9)
    assert np.all(laplacian_neumann(Field.constant(g, 3.5)).values == 0.0)


def test_laplacian_cosine_eigenfunction():
    g = Grid.line(201)
    f = Field.from_function(g, lambda x: np.cos(np.pi * x))
    out = laplacian_neumann(f)
    np.testing.assert_allclose(out.values, -np.pi**2 * f.values, atol=1e-3)


def test_laplacian_2d_separable():
    g = Grid.rectangle(81, 41, 1.0, 2.0)
    f = Field.from_function(g, lambda x, y: np.cos(np.pi * x) * np.cos(np.pi * y / 2))
    lam = np.pi**2 * (1 + 0.25)
    np.testing.assert_allclose(laplacian_neumann(f).values, -lam * f.values, atol=5e-3)


@given(arrays(float, 9, elements=finite), arrays(float, 9, elements=finite))
def test_laplacian_symmetric_negative_semidefinite(a, b):
    g = Grid.line(9, 3.0)
    w = g.weights
    la, lb = laplacian_values(g, a), laplacian_values(g, b)
    scale = 1 + np.abs(a).max() * np.abs(b).max()
    assert abs(np.dot(w * la, b) - np.dot(w * a, lb)) <= 1e-9 * scale * 100
    assert np.dot(w * la, a) <= 1e-9 * (1 + np.abs(a).max() ** 2) * 100


@given(arrays(float, (5, 6), elements=finite))
def test_laplacian_weighted_sum_vanishes(a):
    g = Grid.rectangle(5, 6)
    lap = laplacian_values(g, a.ravel())
    assert abs(np.dot(g.weights, lap)) <= 1e-9 * (1 + np.abs(a).max()) * 100


def test_norms_examples():
    g = Grid.line(1001)
    assert norm_Lp_omega(Field.constant(g, 2.0), 2) == pytest.approx(2.0, rel=1e-12)
    x = Field.from_function(g, lambda x: x)
    assert norm_Lp_omega(x, 2) == pytest.approx(1 / math.sqrt(3), abs=1e-5)
    assert norm_Lp_omega(x, math.inf) == 1.0
    t = Trajectory.from_function(Grid.line(11), 1e-3, 1000, lambda t, x: np.exp(-t) + 0 * x)
    assert norm_Lp_Q(t, 2) == pytest.approx(math.sqrt((1 - math.exp(-2)) / 2), abs=1e-5)


def test_h1_seminorm_and_mean():
    g = Grid.line(2001)
    assert h1_seminorm(Field.from_function(g, lambda x: x)) == pytest.approx(1.0, abs=1e-10)
    c = Field.from_function(g, lambda x: np.cos(np.pi * x))
    assert h1_seminorm(c) == pytest.approx(math.sqrt(np.pi**2 / 2), abs=1e-3)
    assert mean(Field.from_function(g, lambda x: x)) == pytest.approx(0.5, abs=1e-12)


@given(arrays(float, 11, elements=finite), arrays(float, 11, elements=finite), finite, st.sampled_from([1, 2, 3.5, math.inf]))
def test_norm_homogeneity_and_triangle(a, b, c, p):
    g = Grid.line(11)
    fa, fb = Field(g, a), Field(g, b)
    na, nb = norm_Lp_omega(fa, p), norm_Lp_omega(fb, p)
    assert norm_Lp_omega(fa * c, p) == pytest.approx(abs(c) * na, rel=1e-9, abs=1e-9)
    assert norm_Lp_omega(fa + fb, p) <= (na + nb) * (1 + 1e-12) + 1e-9


def test_validation_errors():
    with pytest.raises(ConfigError):
        Grid((1.0,), (2,))
    with pytest.raises(ConfigError):
        Grid((1.0, 1.0), (5,))
    with pytest.raises(ConfigError):
        Grid((-1.0,), (5,))
    g = Grid.line(5)
    with pytest.raises(NonFiniteFieldError):
        Field(g, np.array([0, 1, np.nan, 0, 0.0]))
    with pytest.raises(ValueError):
        Field(g, np.zeros(4))
    with pytest.raises(ValueError):
        norm_Lp_omega(Field.zeros(g), 0.5)


def test_csv_round_trip_is_exact(tmp_path):
    g = Grid.rectangle(4, 3, 1.0, 0.5)
    rng = np.random.default_rng(1)
    tr = Trajectory(g, 0.1, rng.normal(size=(6, g.size)))
    write_trajectory_csv(tmp_path / "t.csv", tr)
    back = read_trajectory_csv(tmp_path / "t.csv", g, 0.1)
    assert np.array_equal(back.values, tr.values)
    f = Field(g, rng.normal(size=g.size))
    write_field_csv(tmp_path / "f.csv", f)
    assert np.array_equal(read_field_csv(tmp_path / "f.csv", g).values, f.values)
