"""Integrator unit tests: order, dense output, monitor, failure modes."""

import math

import numpy as np
import pytest

from plantfield.solver import DenseSolution, StepSizeUnderflowError, solve_ode

# A smooth 5-dimensional linear benchmark with cosine forcing.
_A = np.diag([-1.0, -0.5, -2.0, -0.3, -1.5])
_B = np.array([0.3, -0.2, 0.5, 0.1, -0.4])
_Y0 = np.array([1.0, 2.0, -1.0, 0.5, 1.5])


def _f(t, y):
    return _A @ y + _B * np.cos(t)


def _exact(t):
    # Componentwise: y' = -a y + b cos t  =>
    # y = (y0 - b a/(a^2+1)) e^{-a t} + b (a cos t + sin t)/(a^2+1)
    a = -np.diag(_A)
    part = _B * (a * np.cos(t) + np.sin(t)) / (a**2 + 1.0)
    part0 = _B * a / (a**2 + 1.0)
    return (_Y0 - part0) * np.exp(-a * t) + part


def test_fixed_step_is_fourth_order():
    errs = []
    for dt in (0.1, 0.05):
        sol = solve_ode(_f, 0.0, 2.0, _Y0, method="rk4-fixed", dt_init=dt)
        errs.append(np.abs(sol(2.0) - _exact(2.0)).max())
    assert errs[0] / errs[1] >= 16.0


def test_adaptive_meets_tolerance():
    sol = solve_ode(_f, 0.0, 2.0, _Y0, rel_tol=1e-8, abs_tol=1e-10)
    err = np.abs(sol(2.0) - _exact(2.0)).max()
    assert err < 1e-7


def test_adaptive_tightening_reduces_error():
    loose = solve_ode(_f, 0.0, 2.0, _Y0, rel_tol=1e-5, abs_tol=1e-7)
    tight = solve_ode(_f, 0.0, 2.0, _Y0, rel_tol=1e-10, abs_tol=1e-12)
    e_loose = np.abs(loose(2.0) - _exact(2.0)).max()
    e_tight = np.abs(tight(2.0) - _exact(2.0)).max()
    assert e_tight < e_loose / 10.0


def test_dense_output_interpolates_whole_range():
    sol = solve_ode(_f, 0.0, 2.0, _Y0, rel_tol=1e-8, abs_tol=1e-10, max_step=0.05)
    worst = max(
        np.abs(sol(t) - _exact(t)).max() for t in np.linspace(0.0, 2.0, 401)
    )
    assert worst < 1e-6


def test_dense_output_exact_at_nodes():
    sol = solve_ode(_f, 0.0, 2.0, _Y0)
    for k in range(len(sol.ts)):
        assert np.array_equal(sol(float(sol.ts[k])), sol.ys[k])


def test_dense_output_rejects_outside_range():
    sol = solve_ode(_f, 0.0, 2.0, _Y0)
    with pytest.raises(ValueError):
        sol(-0.001)
    with pytest.raises(ValueError):
        sol(2.001)


def test_eval_many_stacks_rows():
    sol = solve_ode(_f, 0.0, 2.0, _Y0)
    out = sol.eval_many([0.0, 1.0, 2.0])
    assert out.shape == (3, 5)
    assert np.array_equal(out[0], _Y0)


def test_final_node_is_exactly_t_end():
    for method, kw in (("rk45-adaptive", {}), ("rk4-fixed", {"dt_init": 0.03})):
        sol = solve_ode(_f, 0.0, 2.0, _Y0, method=method, **kw)
        assert sol.t_end == 2.0


def test_zero_length_interval():
    sol = solve_ode(_f, 1.0, 1.0, _Y0)
    assert len(sol.ts) == 1
    assert np.array_equal(sol(1.0), _Y0)


def test_step_size_underflow_raises():
    with pytest.raises(StepSizeUnderflowError):
        solve_ode(_f, 0.0, 2.0, _Y0, max_step=1e-300)


def test_monitor_sees_every_accepted_step():
    seen = []

    def monitor(t, y, step_index):
        seen.append((step_index, t))
        return y

    sol = solve_ode(_f, 0.0, 1.0, _Y0, monitor=monitor)
    assert [s[0] for s in seen] == list(range(len(sol.ts) - 1))
    assert seen[-1][1] == 1.0


def test_monitor_repair_is_committed():
    # Clamp the first component at 1.05; the recorded states must obey it
    # and the stored slope must be re-evaluated at the repaired state.
    def monitor(t, y, step_index):
        if y[0] > 1.05:
            y = y.copy()
            y[0] = 1.05
        return y

    def grower(t, y):
        return np.array([y[0]])  # exponential growth

    sol = solve_ode(grower, 0.0, 1.0, np.array([1.0]), monitor=monitor)
    assert sol.ys[:, 0].max() <= 1.05 + 1e-15
    k = int(np.argmax(sol.ys[:, 0] >= 1.05))
    assert sol.fs[k, 0] == pytest.approx(1.05)


def test_input_validation():
    with pytest.raises(ValueError):
        solve_ode(_f, 1.0, 0.0, _Y0)
    with pytest.raises(ValueError):
        solve_ode(_f, 0.0, 1.0, _Y0, rel_tol=0.0)
    with pytest.raises(ValueError):
        solve_ode(_f, 0.0, 1.0, _Y0, method="euler")
    with pytest.raises(ValueError):
        solve_ode(_f, 0.0, 1.0, _Y0, method="rk4-fixed", dt_init=0.0)


def test_rk4_partial_final_step():
    sol = solve_ode(_f, 0.0, 1.0, _Y0, method="rk4-fixed", dt_init=0.3)
    assert sol.t_end == 1.0
    # Coarse steps: only a sanity bound here (the halving test above
    # measures the order); the point is the exact final node placement.
    assert np.abs(sol(1.0) - _exact(1.0)).max() < 5e-3


def test_dense_solution_single_segment_formula():
    # One cubic segment reproducing t^3 exactly: values and slopes of
    # y = t^3 at t = 0, 1 define the Hermite cubic t^3 itself.
    dense = DenseSolution(
        ts=np.array([0.0, 1.0]),
        ys=np.array([[0.0], [1.0]]),
        fs=np.array([[0.0], [3.0]]),
    )
    for t in (0.0, 0.25, 0.5, 0.75, 1.0):
        assert dense(t)[0] == pytest.approx(t**3, abs=1e-15)
