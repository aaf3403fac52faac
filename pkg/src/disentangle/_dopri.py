"""Adaptive Dormand-Prince 5(4) stepping for real or complex array ODEs."""
from __future__ import annotations

import numpy as np

# Dormand & Prince (1980) tableau
_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_E = _B - np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640,
                    -92097 / 339200, 187 / 2100, 1 / 40])

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0


class StiffnessError(RuntimeError):
    """Step size fell below the underflow floor.

    ``partial`` holds whatever the caller had recorded up to the failure.
    """

    def __init__(self, message, t=None, partial=None):
        super().__init__(message)
        self.t = t
        self.partial = partial


def rms_norm(x):
    return np.sqrt(np.mean(np.abs(x) ** 2))


def batch_rms_norm(x):
    """Worst per-member RMS norm over the leading (batch) axis."""
    return np.sqrt(np.max(np.mean(np.abs(x.reshape(len(x), -1)) ** 2, axis=1)))


def integrate(f, y0, t_span, dt0, rtol, atol, on_step=None, post_step=None,
              min_dt=None, max_steps=10_000_000, norm=rms_norm):
    """Integrate ``y' = f(y)`` over ``t_span = (t0, t1)``.

    ``on_step(t, y)`` is called after every accepted step and
    ``post_step(y)`` may return a corrected state (e.g. renormalized) that
    replaces ``y`` before the next step. Returns ``(y, n_accepted, dt_next)``;
    ``dt_next`` lets a caller chain segments without restarting step control.
    ``norm`` reduces the scaled error estimate to one number; pass
    :func:`batch_rms_norm` to march a stack of independent systems with a
    shared step that satisfies the tolerance for every member.
    """
    t, t_end = map(float, t_span)
    y = np.array(y0, copy=True)
    if t_end <= t:
        return y, 0, dt0
    if min_dt is None:
        min_dt = 1e-12 * t_end
    dt = min(dt0, t_end - t)
    dt_next = dt
    k1 = f(y)
    n_acc = 0
    k = [None] * 7
    for _ in range(max_steps):
        if t >= t_end:
            break
        last = t + dt >= t_end - 1e-15 * abs(t_end)
        if last:
            dt_next = dt
            dt = t_end - t
        k[0] = k1
        for i in range(1, 7):
            yi = y
            for j, a in enumerate(_A[i]):
                if a:
                    yi = yi + (dt * a) * k[j]
            k[i] = f(yi)
        y_new = yi  # last stage is evaluated at the 5th-order solution (FSAL)
        err = dt * sum(e * kk for e, kk in zip(_E, k) if e)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err_norm = norm(err / scale)
        if not np.isfinite(err_norm):
            err_norm = np.inf
        if err_norm <= 1.0:
            t = t_end if last else t + dt
            y = y_new
            k1 = k[6]
            if post_step is not None:
                y_fix = post_step(y)
                if y_fix is not y:
                    y = y_fix
                    k1 = f(y)
            n_acc += 1
            if on_step is not None:
                on_step(t, y)
            factor = _MAX_FACTOR if err_norm == 0 else min(
                _MAX_FACTOR, _SAFETY * err_norm ** -0.2)
        else:
            last = False
            factor = max(_MIN_FACTOR, _SAFETY * err_norm ** -0.2)
        dt = dt * factor
        if t < t_end and dt < min_dt:
            raise StiffnessError(f"step size underflow at t={t:.6g} (dt={dt:.3g})", t=t)
    else:
        raise StiffnessError(f"exceeded {max_steps} steps at t={t:.6g}", t=t)
    if last:
        dt_next = max(dt_next, dt)
    else:
        dt_next = dt
    return y, n_acc, dt_next
