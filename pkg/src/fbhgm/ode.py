"""Runge-Kutta integrators for the linear systems used by the package.

``rkf45`` is the Fehlberg 4(5) pair with a PI step controller and a tolerance
callback, so the absolute tolerance can follow the size of the solution.
``rk4_linear`` is the fixed-step classical scheme used to transport a state
along a parameter segment.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import MaxSteps, NonFinite, StepUnderflow

# Fehlberg tableau
_C = np.array([0.0, 1 / 4, 3 / 8, 12 / 13, 1.0, 1 / 2])
_A = np.array([
    [0, 0, 0, 0, 0],
    [1 / 4, 0, 0, 0, 0],
    [3 / 32, 9 / 32, 0, 0, 0],
    [1932 / 2197, -7200 / 2197, 7296 / 2197, 0, 0],
    [439 / 216, -8.0, 3680 / 513, -845 / 4104, 0],
    [-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40],
])
_B5 = np.array([16 / 135, 0.0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55])
_B4 = np.array([25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0])
_E = _B5 - _B4

METHOD = "rkf45-pi"


@dataclass(frozen=True)
class OdeSettings:
    """Step control for the r-direction extension.

    The absolute tolerance at each step is ``abs_tol_coeff * sum|G_i| / len(G)``.
    """
    abs_tol_coeff: float = 1e-6
    rel_tol: float = 1e-8
    initial_step: float | None = None
    max_steps: int = 100_000
    method: str = METHOD

    def __post_init__(self):
        if not (self.abs_tol_coeff > 0 and self.rel_tol > 0):
            raise ValueError("tolerances must be positive")
        if self.initial_step is not None and not self.initial_step > 0:
            raise ValueError("initial_step must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        if self.method != METHOD:
            raise ValueError(f"unknown method {self.method!r}; only {METHOD!r} is available")


@dataclass
class OdeStats:
    accepted: int = 0
    rejected: int = 0
    last_step: float = 0.0


def _mixed_tol(y, coeff):
    return coeff * float(np.sum(np.abs(y))) / y.size


def rkf45(rhs, t0, y0, t1, settings: OdeSettings = OdeSettings(), monitor=None):
    """Integrate ``y' = rhs(t, y)`` from ``t0`` to ``t1`` (either direction).

    The fifth-order solution is propagated (local extrapolation).  ``monitor``
    is called with ``(t, y)`` after every accepted step and may raise.

    Returns ``(y(t1), OdeStats)``.
    """
    y = np.array(y0, dtype=float)
    stats = OdeStats()
    span = t1 - t0
    if span == 0.0:
        return y, stats
    direction = math.copysign(1.0, span)
    t = t0
    h = settings.initial_step or min(abs(span), 0.01 * max(1.0, abs(t0)))
    h_min = 16 * np.finfo(float).eps * max(abs(t0), abs(t1))
    safety, alpha, beta = 0.9, 0.7 / 5, 0.4 / 5
    err_prev = 1.0
    k = np.empty((6, y.size))
    shape = y.shape
    y = y.reshape(-1)
    while direction * (t1 - t) > 0:
        if stats.accepted + stats.rejected >= settings.max_steps:
            raise MaxSteps(f"more than {settings.max_steps} steps between r={t0} and r={t1}")
        h = min(h, abs(t1 - t))
        if h < h_min:
            raise StepUnderflow(f"step {h:.3e} below {h_min:.3e} at r={t:.6g}")
        hs = direction * h
        for s in range(6):
            ys = y + hs * (_A[s, :s] @ k[:s]) if s else y
            k[s] = rhs(t + _C[s] * hs, ys.reshape(shape)).reshape(-1)
        y_new = y + hs * (_B5 @ k)
        if not np.all(np.isfinite(y_new)):
            raise NonFinite(f"non-finite state at r={t + hs:.6g}")
        err_vec = hs * (_E @ k)
        atol = _mixed_tol(y, settings.abs_tol_coeff)
        scale = atol + settings.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.max(np.abs(err_vec) / scale)) if np.all(scale > 0) else 0.0
        if err <= 1.0:
            t += hs
            y = y_new
            stats.accepted += 1
            stats.last_step = h
            if monitor is not None:
                monitor(t, y.reshape(shape))
            err = max(err, 1e-10)
            factor = safety * err ** -alpha * err_prev ** beta
            h *= min(5.0, max(0.2, factor))
            err_prev = err
        else:
            stats.rejected += 1
            h *= max(0.1, safety * err ** -0.2)
    return y.reshape(shape), stats


def rk4_linear(matrix_at, f0, n_sub):
    """Transport ``F' = M(s) F`` over ``s in [0, 1]`` with ``n_sub`` RK4 steps."""
    f = np.array(f0, dtype=float)
    h = 1.0 / n_sub
    m1 = matrix_at(0.0)
    for k in range(n_sub):
        s = k * h
        m0 = m1
        mh = matrix_at(s + h / 2)
        m1 = matrix_at((k + 1) / n_sub)
        k1 = m0 @ f
        k2 = mh @ (f + h / 2 * k1)
        k3 = mh @ (f + h / 2 * k2)
        k4 = m1 @ (f + h * k3)
        f = f + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(f)):
            raise NonFinite(f"non-finite transported state at s={s + h:.3g}")
    return f
