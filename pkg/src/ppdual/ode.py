"""Dormand-Prince 5(4) embedded Runge-Kutta stepper with PI step control.

The stepper works on arrays of any shape. With a leading batch axis, each row
is one independent system; the error norm is the worst row's RMS norm, so all
rows share one step size that satisfies every row's tolerance.
"""

from __future__ import annotations

import math

import numpy as np

# Butcher tableau (Dormand & Prince 1980)
C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
B_LOW = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
E = B - B_LOW
_ROWS = [np.array(row) for row in A]
_EPS = float(np.finfo(float).eps)

SAFETY = 0.9
FAC_MIN, FAC_MAX = 0.2, 5.0
BETA = 0.04  # PI controller (Gustafsson); alpha = 1/5 - 0.75 * beta
ALPHA = 0.2 - 0.75 * BETA


class StepUnderflowError(RuntimeError):
    def __init__(self, t: float, h: float):
        super().__init__(f"step size underflow at t={t!r} (h={h!r})")
        self.t = t
        self.h = h


def _error_norm(err, y, y_new, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
    ratio = err / scale
    ratio *= ratio
    if ratio.ndim <= 1:
        return math.sqrt(ratio.mean())
    rows = ratio.reshape(ratio.shape[0], -1).mean(axis=1)
    return math.sqrt(rows.max())


def _initial_step(f, t0, y0, f0, rtol, atol):
    # Hairer, Norsett & Wanner, Solving ODEs I, sec. II.4
    scale = atol + rtol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    f1 = f(t0 + h0, y0 + h0 * f0)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1)


def dopri5(f, t0: float, y0, t_end: float, rtol: float = 1e-10, atol: float = 1e-10,
           h0: float = None, max_steps: int = 10_000_000):
    """Yield ``(t, y)`` after every accepted step until ``t_end`` (inclusive).

    Raises :class:`StepUnderflowError` when the controller asks for a step too
    small to advance ``t``.
    """
    if rtol <= 0 or atol <= 0:
        raise ValueError("tolerances must be positive")
    t = float(t0)
    y = np.array(y0, dtype=float)
    direction = 1.0 if t_end >= t0 else -1.0
    k0 = np.asarray(f(t, y), dtype=float)
    K = np.empty((7,) + y.shape)
    flat = K.reshape(7, -1)  # view used for the stage combinations
    K[0] = k0
    h = abs(h0) if h0 else _initial_step(f, t, y, K[0], rtol, atol)
    err_old = 1e-4
    steps = 0
    while direction * (t_end - t) > 0:
        if steps >= max_steps:
            raise RuntimeError(f"maximum number of steps ({max_steps}) exceeded at t={t}")
        min_h = 16 * _EPS * max(abs(t), 1.0)
        if h < min_h:
            raise StepUnderflowError(t, h)
        last = h >= abs(t_end - t)
        hs = direction * (abs(t_end - t) if last else h)
        for s in range(1, 7):
            ys = y + hs * (_ROWS[s] @ flat[:s]).reshape(y.shape)
            K[s] = f(t + C[s] * hs, ys)
        y_new = ys  # stage 7 is evaluated at the 5th-order solution (FSAL)
        err = hs * (E @ flat).reshape(y.shape)
        en = _error_norm(err, y, y_new, rtol, atol)
        if en <= 1.0:
            steps += 1
            t = t_end if last else t + hs
            y = y_new
            K[0] = K[6]
            fac = SAFETY * max(en, 1e-10) ** -ALPHA * err_old**BETA
            h = abs(hs) * min(FAC_MAX, max(FAC_MIN, fac))
            err_old = max(en, 1e-4)
            yield t, y
        else:
            h = abs(hs) * max(FAC_MIN, SAFETY * en ** -0.2)
