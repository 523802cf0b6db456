"""Explicit Runge-Kutta integrators for complex array-valued ODEs.

The state may be any complex ``ndarray`` (a state vector, a stack of state
vectors, a density matrix, ...). One step size is shared by every entry, so
batched trajectories advance in lock step. Output times are hit exactly by
clipping steps; there is no dense-output interpolation.
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from . import _dop853_tableau as _d8

RHS = Callable[[float, np.ndarray], np.ndarray]


class IntegrationError(RuntimeError):
    """Raised when the adaptive step size collapses."""


_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0


class _EmbeddedPair:
    c: tuple
    a: tuple
    b: tuple
    error_exponent: float

    def error_norm(self, k: list, step: float, scale: np.ndarray) -> float:
        raise NotImplementedError


class _DP54(_EmbeddedPair):
    c = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0)
    a = (
        (),
        (1 / 5,),
        (3 / 40, 9 / 40),
        (44 / 45, -56 / 15, 32 / 9),
        (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
        (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    )
    b = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84)
    # b - b_low, the last entry multiplies the FSAL stage f(t + h, y_new).
    e = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)
    error_exponent = -1 / 5

    def error_norm(self, k, step, scale):
        err = step * _combine(self.e, k) / scale
        return float(np.sqrt(np.mean(np.abs(err) ** 2)))


class _DOP853(_EmbeddedPair):
    c = _d8.C
    a = tuple(tuple(row[:i]) for i, row in enumerate(_d8.A))
    b = _d8.B
    e3 = _d8.E3
    e5 = _d8.E5
    error_exponent = -1 / 8

    def error_norm(self, k, step, scale):
        err5 = np.abs(_combine(self.e5, k) / scale) ** 2
        err3 = np.abs(_combine(self.e3, k) / scale) ** 2
        n5, n3 = float(err5.sum()), float(err3.sum())
        if n5 == 0.0 and n3 == 0.0:
            return 0.0
        return abs(step) * n5 / np.sqrt((n5 + 0.01 * n3) * scale.size)


PAIRS = {"dopri5": _DP54(), "dop853": _DOP853()}


def _combine(coeffs, k):
    acc = None
    for w, kj in zip(coeffs, k):
        if w != 0.0:
            acc = w * kj if acc is None else acc + w * kj
    return acc


def _initial_step(fun: RHS, t0: float, y0: np.ndarray, f0: np.ndarray, rtol: float,
                  atol: float, order: int) -> float:
    # Hairer, Norsett & Wanner, section II.4.
    scale = atol + rtol * np.abs(y0)
    d0 = np.sqrt(np.mean(np.abs(y0 / scale) ** 2))
    d1 = np.sqrt(np.mean(np.abs(f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    f1 = fun(t0 + h0, y0 + h0 * f0)
    d2 = np.sqrt(np.mean(np.abs((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / (order + 1))
    return min(100 * h0, h1)


def integrate_adaptive(
    fun: RHS,
    t0: float,
    y0: np.ndarray,
    t_out: Sequence[float],
    *,
    method: str = "dop853",
    rtol: float = 1e-10,
    atol: float = 1e-12,
    max_step: float = np.inf,
    min_step: float = 1e-13,
) -> list[np.ndarray]:
    """Integrate ``dy/dt = fun(t, y)`` and return ``y`` at each time in ``t_out``.

    ``method`` is ``"dop853"`` (8th order) or ``"dopri5"`` (5th order). The
    error norm is taken over every entry of the state, so a batch shares
    one step sequence.
    """
    pair = PAIRS[method]
    t_out = [float(t) for t in t_out]
    if any(b < a for a, b in zip(t_out, t_out[1:])) or (t_out and t_out[0] < t0):
        raise ValueError("output times must be nondecreasing and >= t0")
    if rtol <= 0 or atol <= 0:
        raise ValueError("tolerances must be positive")

    y = np.array(y0, dtype=complex)
    t = float(t0)
    out: list[np.ndarray] = []
    if not t_out:
        return out

    f = fun(t, y)
    order = 8 if method == "dop853" else 5
    h = min(_initial_step(fun, t, y, f, rtol, atol, order), max_step)
    n_stages = len(pair.c)
    k: list = [None] * (n_stages + 1)

    for target in t_out:
        while t < target:
            span = target - t
            last = h >= span or span - h < min_step
            step = span if last else h
            if step < min_step * max(1.0, abs(t)):
                raise IntegrationError(f"step size underflow at t={t:.6g} (step={step:.3g})")
            k[0] = f
            for i in range(1, n_stages):
                k[i] = fun(t + pair.c[i] * step, y + step * _combine(pair.a[i], k))
            y_new = y + step * _combine(pair.b, k)
            f_new = fun(t + step, y_new)
            k[n_stages] = f_new
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            norm = pair.error_norm(k, step, scale)
            if norm <= 1.0:
                t = target if last else t + step
                y, f = y_new, f_new
                if not last:
                    factor = _MAX_FACTOR if norm == 0.0 else min(
                        _MAX_FACTOR, _SAFETY * norm**pair.error_exponent)
                    h = min(step * factor, max_step)
            else:
                h = step * max(_MIN_FACTOR, _SAFETY * norm**pair.error_exponent)
                if h < min_step * max(1.0, abs(t)):
                    raise IntegrationError(
                        f"step size underflow at t={t:.6g} (error norm {norm:.3g})")
        out.append(y.copy())
    return out


def dopri5(fun: RHS, t0: float, y0: np.ndarray, t_out: Sequence[float], **kw) -> list[np.ndarray]:
    return integrate_adaptive(fun, t0, y0, t_out, method="dopri5", **kw)


def dop853(fun: RHS, t0: float, y0: np.ndarray, t_out: Sequence[float], **kw) -> list[np.ndarray]:
    return integrate_adaptive(fun, t0, y0, t_out, method="dop853", **kw)


def rk4(
    fun: RHS,
    t0: float,
    y0: np.ndarray,
    t_out: Sequence[float],
    *,
    dt: float,
) -> list[np.ndarray]:
    """Classical fixed-step RK4; each interval is split into equal steps no longer than ``dt``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    y = np.array(y0, dtype=complex)
    t = float(t0)
    out = []
    for target in t_out:
        if target < t:
            raise ValueError("output times must be nondecreasing and >= t0")
        n = int(np.ceil((target - t) / dt - 1e-9)) if target > t else 0
        h = (target - t) / n if n else 0.0
        for _ in range(n):
            k1 = fun(t, y)
            k2 = fun(t + h / 2, y + h / 2 * k1)
            k3 = fun(t + h / 2, y + h / 2 * k2)
            k4 = fun(t + h, y + h * k3)
            y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
        t = float(target)
        out.append(y.copy())
    return out
