"""Explicit Runge-Kutta integration with Hermite dense output.

Provides the classical fixed-step RK4 and the adaptive Dormand-Prince 5(4)
embedded pair.  Every accepted step is recorded as a cubic Hermite segment
(endpoint values and slopes), so the solution can be evaluated anywhere in
the integration range with fourth-order interpolation accuracy.  The
segments are what downstream code interpolates when a frozen trajectory
serves as the background of another integration.

The right-hand side is called as ``f(t, y)`` with ``y`` a 1-D float array.
An optional per-step ``monitor`` callback can repair (or reject, by
raising) each accepted state before it is committed.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["DenseSolution", "StepSizeUnderflowError", "solve_ode"]

# Dormand-Prince 5(4) tableau.  The last stage row equals the 5th-order
# weights (FSAL), so the derivative at the accepted point is free.
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)
_DP_ERR = _DP_B5 - _DP_B4

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0


class StepSizeUnderflowError(RuntimeError):
    """Raised when the adaptive controller cannot make progress."""


class DenseSolution:
    """Piecewise cubic Hermite interpolant of an accepted-step sequence.

    Stores the node times, states and slopes of every accepted step.
    Evaluation between nodes matches values and derivatives at both ends
    of the bracketing step (fourth-order accuracy in the step size).
    """

    def __init__(self, ts: np.ndarray, ys: np.ndarray, fs: np.ndarray):
        self.ts = ts
        self.ys = ys
        self.fs = fs

    @property
    def t0(self) -> float:
        return float(self.ts[0])

    @property
    def t_end(self) -> float:
        return float(self.ts[-1])

    def __call__(self, t: float) -> np.ndarray:
        """Evaluate the interpolant at a single time ``t``."""
        ts = self.ts
        if not (ts[0] <= t <= ts[-1]):
            raise ValueError(
                f"time {t} outside the integrated range [{ts[0]}, {ts[-1]}]"
            )
        k = int(np.searchsorted(ts, t, side="right")) - 1
        k = min(max(k, 0), len(ts) - 2)
        h = ts[k + 1] - ts[k]
        if h == 0.0:
            return self.ys[k].copy()
        u = (t - ts[k]) / h
        u2 = u * u
        u3 = u2 * u
        h00 = 2.0 * u3 - 3.0 * u2 + 1.0
        h10 = u3 - 2.0 * u2 + u
        h01 = -2.0 * u3 + 3.0 * u2
        h11 = u3 - u2
        return (
            h00 * self.ys[k]
            + h01 * self.ys[k + 1]
            + h * (h10 * self.fs[k] + h11 * self.fs[k + 1])
        )

    def eval_many(self, times) -> np.ndarray:
        """Evaluate at several times; returns an array of shape (len(times), dim)."""
        times = np.asarray(times, dtype=float)
        return np.stack([self(t) for t in times])


def _error_norm(err: np.ndarray, y_old: np.ndarray, y_new: np.ndarray, rel_tol, abs_tol):
    scale = abs_tol + rel_tol * np.maximum(np.abs(y_old), np.abs(y_new))
    return math.sqrt(float(np.mean((err / scale) ** 2)))


def solve_ode(
    f,
    t0: float,
    t_end: float,
    y0,
    *,
    method: str = "rk45-adaptive",
    rel_tol: float = 1e-8,
    abs_tol: float = 1e-10,
    dt_init: float = 0.01,
    max_step: float = math.inf,
    monitor=None,
) -> DenseSolution:
    """Integrate ``y' = f(t, y)`` from ``t0`` to ``t_end``.

    ``method`` is ``"rk45-adaptive"`` (Dormand-Prince pair with PI-free
    elementary step control) or ``"rk4-fixed"`` (classical RK4 with step
    ``dt_init``).  ``monitor(t, y, step_index) -> y`` runs on every
    accepted state and may return a repaired copy or raise to abort.

    Returns the dense solution over ``[t0, t_end]``.
    """
    y0 = np.asarray(y0, dtype=float)
    if t_end < t0:
        raise ValueError("t_end must be >= t0")
    if rel_tol <= 0.0 or abs_tol <= 0.0:
        raise ValueError("tolerances must be strictly positive")
    if method == "rk4-fixed":
        return _solve_rk4(f, t0, t_end, y0, dt_init, monitor)
    if method == "rk45-adaptive":
        return _solve_rk45(
            f, t0, t_end, y0, rel_tol, abs_tol, dt_init, max_step, monitor
        )
    raise ValueError(f"unknown method {method!r}")


def _solve_rk45(f, t0, t_end, y0, rel_tol, abs_tol, dt_init, max_step, monitor):
    ts = [t0]
    ys = [y0.copy()]
    k1 = np.asarray(f(t0, y0), dtype=float)
    fs = [k1.copy()]
    if t_end == t0:
        return DenseSolution(np.array(ts), np.stack(ys), np.stack(fs))

    t = t0
    y = y0.copy()
    h = min(dt_init, max_step, t_end - t0)
    k = [np.empty_like(y0) for _ in range(7)]
    k[0] = k1
    step_index = 0
    while t < t_end:
        h = min(h, max_step, t_end - t)
        if h < 16.0 * np.finfo(float).eps * max(abs(t), 1.0):
            raise StepSizeUnderflowError(
                f"step size underflow at t={t!r} (step {step_index})"
            )
        for i in range(1, 7):
            yi = y + h * sum(_DP_A[i][j] * k[j] for j in range(i))
            k[i] = np.asarray(f(t + _DP_C[i] * h, yi), dtype=float)
        y_new = y + h * sum(_DP_B5[j] * k[j] for j in range(7) if _DP_B5[j] != 0.0)
        # k[6] was evaluated at (t + h, y_new): the FSAL derivative.
        err = h * sum(_DP_ERR[j] * k[j] for j in range(7) if _DP_ERR[j] != 0.0)
        norm = _error_norm(err, y, y_new, rel_tol, abs_tol)
        if norm <= 1.0:
            t = t + h
            if abs(t_end - t) <= 1e-12 * max(abs(t_end), 1.0):
                t = t_end
            f_new = k[6]
            if monitor is not None:
                y_fixed = monitor(t, y_new, step_index)
                if y_fixed is not y_new and not np.array_equal(y_fixed, y_new):
                    y_new = np.asarray(y_fixed, dtype=float)
                    f_new = np.asarray(f(t, y_new), dtype=float)
                else:
                    y_new = np.asarray(y_fixed, dtype=float)
            y = y_new
            ts.append(t)
            ys.append(y.copy())
            fs.append(f_new.copy())
            k[0] = f_new
            step_index += 1
            factor = _MAX_FACTOR if norm == 0.0 else _SAFETY * norm ** -0.2
            h *= min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
        else:
            h *= max(_MIN_FACTOR, _SAFETY * norm ** -0.2)
    return DenseSolution(np.array(ts), np.stack(ys), np.stack(fs))


def _solve_rk4(f, t0, t_end, y0, dt, monitor):
    if dt <= 0.0:
        raise ValueError("dt_init must be strictly positive for rk4-fixed")
    ts = [t0]
    ys = [y0.copy()]
    k1 = np.asarray(f(t0, y0), dtype=float)
    fs = [k1.copy()]
    t = t0
    y = y0.copy()
    step_index = 0
    while t < t_end - 1e-12 * max(abs(t_end), 1.0):
        h = min(dt, t_end - t)
        k2 = np.asarray(f(t + 0.5 * h, y + 0.5 * h * k1), dtype=float)
        k3 = np.asarray(f(t + 0.5 * h, y + 0.5 * h * k2), dtype=float)
        k4 = np.asarray(f(t + h, y + h * k3), dtype=float)
        y_new = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = t + h
        if abs(t_end - t) <= 1e-12 * max(abs(t_end), 1.0):
            t = t_end
        if monitor is not None:
            y_new = np.asarray(monitor(t, y_new, step_index), dtype=float)
        f_new = np.asarray(f(t, y_new), dtype=float)
        y = y_new
        ts.append(t)
        ys.append(y.copy())
        fs.append(f_new.copy())
        k1 = f_new
        step_index += 1
    return DenseSolution(np.array(ts), np.stack(ys), np.stack(fs))
