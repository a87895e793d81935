from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dagame.errors import DomainError, FiniteEscape, OutOfRange
from dagame.riccati import (evaluate, sbgp_X_closed_form, sbgp_Y_closed_form, solve_X, solve_Y)

from conftest import scalar_model


def rk4_scalar(f, y0, t1, n):
    """Independent scalar RK4 oracle."""
    h = t1 / n
    y = y0
    for _ in range(n):
        k1 = f(y)
        k2 = f(y + 0.5 * h * k1)
        k3 = f(y + 0.5 * h * k2)
        k4 = f(y + h * k3)
        y += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def test_sbgp_X_value():
    m = scalar_model(gamma=2.0)
    X = solve_X(m, m.grid(1e-3))
    assert X(0.0)[0, 0] == pytest.approx(1.33156, abs=1e-5)
    assert X(0.0)[0, 0] == pytest.approx(sbgp_X_closed_form(1000, 2.0, 1.0), rel=1e-6)
    # fine-step oracle of Xdot = (1 - gamma^-2) X^2 backwards, i.e. dX/dtgo = -(0.75) X^2
    fine = rk4_scalar(lambda x: -0.75 * x * x, 1000.0, 1.0, 200_000)
    assert fine == pytest.approx(sbgp_X_closed_form(1000, 2.0, 1.0), rel=1e-12)
    assert X(0.0)[0, 0] == pytest.approx(fine, rel=1e-6)


def test_X_large_gamma_limit():
    m = scalar_model(gamma=1e9)
    X = solve_X(m, m.grid(1e-3))
    for t in (0.0, 0.5, 0.9):
        assert X(t)[0, 0] == pytest.approx(1 / (1e-3 + 1 - t), rel=1e-6)


def test_X_constant_at_gamma_one():
    m = scalar_model(gamma=1.0)
    X = solve_X(m, m.grid(1e-2))
    assert np.all(X.values == 1000.0)
    assert evaluate(X, 0.123)[0, 0] == 1000.0


def test_boundary_values_exact():
    m = scalar_model(gamma=3.0, Qf=123.456, Y0=0.789)
    g = m.grid(1e-3)
    assert solve_X(m, g).values[-1, 0, 0] == 123.456
    assert solve_Y(m, g).values[0, 0, 0] == 0.789


def test_Y_matches_closed_form_nominal():
    m = scalar_model()
    Y = solve_Y(m, m.grid(1e-4))
    ex = np.array([sbgp_Y_closed_form(1.0, 0.25e-6, t) for t in Y.times])
    assert np.max(np.abs(Y.values[:, 0, 0] - ex)) <= 1e-6
    assert Y(0.01)[0, 0] == pytest.approx(sbgp_Y_closed_form(1.0, 0.25e-6, 0.01), abs=1e-8)


def test_Y_fixed_point():
    s = math.sqrt(0.25e-6)
    m = scalar_model(Y0=s)
    Y = solve_Y(m, m.grid(1e-3))
    assert np.allclose(Y.values[:, 0, 0], s, rtol=1e-12)
    assert sbgp_Y_closed_form(s, 0.25e-6, 0.7) == s


def test_Y_closed_form_limits():
    assert sbgp_Y_closed_form(1.0, 1.0, 0.0) == pytest.approx(1.0, rel=1e-15)
    assert sbgp_Y_closed_form(1.0, 0.25e-6, 50.0) == pytest.approx(5e-4, rel=1e-12)
    # Y0 = 1, V = 1 is the fixed point; pick a non-trivial start for the oracle
    assert sbgp_Y_closed_form(3.0, 1.0, 1.0) == pytest.approx(
        rk4_scalar(lambda y: 1 - y * y, 3.0, 1.0, 20_000), abs=1e-10)
    assert sbgp_Y_closed_form(0.2, 1.0, 1.0) == pytest.approx(
        rk4_scalar(lambda y: 1 - y * y, 0.2, 1.0, 20_000), abs=1e-10)
    with pytest.raises(DomainError):
        sbgp_Y_closed_form(1.0, 0.0, 1.0)


def test_kalman_Y_equals_game_Y_when_Q_zero():
    m = scalar_model()
    g = m.grid(1e-3)
    assert np.array_equal(solve_Y(m, g).values, solve_Y(m, g, kalman=True).values)


def test_evaluate_interpolation():
    m = scalar_model(gamma=3.0)
    X = solve_X(m, m.grid(0.1))
    assert np.array_equal(X(0.3), X.values[3])
    assert np.allclose(X(0.35), 0.5 * (X.values[3] + X.values[4]), rtol=0, atol=1e-15)
    with pytest.raises(OutOfRange):
        X(1.5)
    with pytest.raises(OutOfRange):
        X(-0.1)


def test_finite_escape_below_unity():
    m = scalar_model(gamma=0.5, Qf=1000.0)
    with pytest.raises(FiniteEscape):
        solve_X(m, m.grid(1e-3))


def test_symmetry_and_positivity_mge(mge_solutions):
    for sol in (mge_solutions.X, mge_solutions.Y_game):
        v = sol.values
        asym = np.linalg.norm(v - v.transpose(0, 2, 1), axis=(1, 2)) / np.linalg.norm(v, axis=(1, 2))
        assert asym.max() <= 1e-8
    # X(tf) = Qf is singular, so X is only semidefinite up to rounding
    X = mge_solutions.X
    assert np.all(X.min_eigenvalues() >= -1e-9 * np.abs(X.values).max(axis=(1, 2)))
    assert mge_solutions.Y_game.min_eigenvalues().min() > 0


def _halving_errors(solver, exact, m, dts):
    errs = []
    for dt in dts:
        sol = solver(m, m.grid(dt))
        errs.append(np.max(np.abs(sol.values[:, 0, 0] - exact(sol.times))))
    return errs


def test_step_halving_order():
    # non-stiff parameters so the grid step, not a stability substep, sets the error
    m = scalar_model(Qf=10.0, gamma=2.0, V=1.0, Y0=2.0)
    eX = _halving_errors(lambda mm, g: solve_X(mm, g, substeps=1),
                         lambda t: np.array([sbgp_X_closed_form(10.0, 2.0, 1.0 - s) for s in t]),
                         m, (0.1, 0.05))
    eY = _halving_errors(lambda mm, g: solve_Y(mm, g, substeps=1),
                         lambda t: np.array([sbgp_Y_closed_form(2.0, 1.0, s) for s in t]),
                         m, (0.1, 0.05))
    assert eX[0] / eX[1] >= 8
    assert eY[0] / eY[1] >= 8


@settings(max_examples=25, deadline=None)
@given(b=st.floats(1.0, 1e4), gamma=st.floats(1.05, 20.0), t_go=st.floats(0.0, 5.0))
def test_X_closed_form_solves_its_ode(b, gamma, t_go):
    # dX/dt_go = -(1 - gamma^-2) X^2, checked by central difference
    h = 1e-6
    d = (sbgp_X_closed_form(b, gamma, t_go + h) - sbgp_X_closed_form(b, gamma, t_go)) / h
    X = sbgp_X_closed_form(b, gamma, t_go + 0.5 * h)
    assert d == pytest.approx(-(1 - gamma ** -2) * X * X, rel=1e-4, abs=1e-6)


@settings(max_examples=25, deadline=None)
@given(Y0=st.floats(1e-3, 10.0), V=st.floats(1e-4, 10.0), t=st.floats(0.0, 3.0))
def test_Y_closed_form_bounded_between_start_and_sqrtV(Y0, V, t):
    y = sbgp_Y_closed_form(Y0, V, t)
    s = math.sqrt(V)
    lo, hi = min(Y0, s), max(Y0, s)
    assert lo * (1 - 1e-12) <= y <= hi * (1 + 1e-12)
