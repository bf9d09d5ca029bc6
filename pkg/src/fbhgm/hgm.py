"""Diagonal-parameter evaluation: series near the origin, ODE extension in r.

The diagonal state is ``G~ = (dZ~/dy_i, d2Z~/dy_i^2)`` for ``i = 0..d``.  It
satisfies a linear system in ``r``.  Far from the origin the series is summed
at a rescaled point on the unit sphere, the system carries the state out to a
larger radius and the scale invariance

    Z~(x, y, r) = (r/R)^d Z~(x r^2/R^2, y r/R, R)

brings it back.  Rotation to a general symmetric ``x`` uses the frame of the
quadratic form.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import EigenvalueCollision, NonFinite
from .model import (DiagParams, DiagStateVector, FullParams, OrthogonalFrame, StateVector,
                    diagonalize, eigen_gap_tol)
from .ode import OdeSettings, rkf45
from .series import MAX_ORDER, SeriesResult, choose_order, series_state, series_value

SERIES_L_MAX = 0.9
SCALED_L = 0.5
DEFAULT_TOL = 1e-14


@dataclass(frozen=True)
class ErrorEstimate:
    """Spread of the implied Z~ over an ensemble of perturbed initial states.

    ``value`` is the unperturbed evaluation; ``mean`` and ``sd`` come from the
    replicas and ``ci_*`` is ``mean -/+ z_q sd`` with the normal quantile.
    """
    mean: float
    sd: float
    ci_low: float
    ci_high: float
    confidence: float = 0.95
    replicas: int = 0
    value: float = math.nan

    def __post_init__(self):
        if self.sd < 0 or not self.ci_low <= self.mean <= self.ci_high:
            raise ValueError("inconsistent error estimate")


@dataclass(frozen=True)
class EvalInfo:
    route: str              # "series" or "hgm"
    series: SeriesResult    # at the point where the series was summed
    r1: float               # radius the ODE ran to (target r for the series route)
    scaled: DiagParams      # parameters at which the series was summed
    steps: int = 0


# ---------------------------------------------------------------------------
# the r-system

def _p_r_parts(p: DiagParams):
    # r P(r) = m0 + r^2 m2
    n = p.d + 1
    m0 = np.zeros((2 * n, 2 * n))
    m2 = np.zeros((2 * n, 2 * n))
    for i in range(n):
        m0[i, i] = 1.0
        m0[i, n:] += p.yd[i]
        m0[n + i, n:] = 1.0
        m0[n + i, n + i] = 2.0
        m2[i, i] = 2 * p.xd[i]
        m2[n + i, i] = p.yd[i]
        m2[n + i, n + i] = 2 * p.xd[i]
    return m0, m2


def p_r_matrix(p: DiagParams, at_r):
    """Coefficient matrix of ``dG~/dr = P(r) G~``."""
    if not at_r > 0:
        raise ValueError("at_r must be positive")
    m0, m2 = _p_r_parts(p)
    return (m0 + at_r * at_r * m2) / at_r


def lambda_scale(p: DiagParams):
    """Top eigenvalue of ``lim P(r)/r``, which is ``2 max x~``."""
    return 2.0 * float(np.max(p.xd))


def hgm_extend(p: DiagParams, g0: DiagStateVector, r1, s: OdeSettings = OdeSettings()):
    """Carry the diagonal state from ``g0.r`` to ``r1`` at fixed ``(x~, y~)``.

    The system is integrated for ``G = G~ exp(-lam r^2/2)``, which keeps the
    solution from growing like ``exp(max x~ r^2)``.
    """
    if not (g0.r > 0 and r1 > 0):
        raise ValueError("radii must be positive")
    if r1 == g0.r:
        return g0
    return DiagStateVector(p.d, _extend(p, g0, r1, s)[0], r1)


def _extend(p, g0, r1, s):
    r0 = g0.r
    e0 = np.asarray(g0.entries, dtype=float)
    if not np.all(np.isfinite(e0)):
        raise NonFinite("initial state is not finite")
    lam = lambda_scale(p)
    d = p.d
    m0, m2 = _p_r_parts(p)
    m2 = m2 - lam * np.eye(e0.size)

    def rhs(r, g):
        return (m0 @ g) / r + r * (m2 @ g)

    def positive(r, g):
        if not np.sum(g[d + 1:]) > 0:
            raise NonFinite(f"implied normalizing constant lost positivity at r={r:.6g}")

    g, stats = rkf45(rhs, r0, e0 * math.exp(-lam * r0 * r0 / 2), r1, s, monitor=positive)
    out = g * math.exp(lam * r1 * r1 / 2)
    if not np.all(np.isfinite(out)):
        raise NonFinite(f"state overflows at r={r1:.6g}")
    return out, stats.accepted


def _route(p: DiagParams, radius=None):
    """Radius ``R`` for the extension and the rescaled parameters at radius 1."""
    L = p.L
    R = radius or max(L, math.sqrt(L / SCALED_L))
    scaled = DiagParams(p.xd * (p.r / R) ** 2, p.yd * (p.r / R), 1.0)
    return R, scaled


def _series_at(p: DiagParams, tol, cap=MAX_ORDER):
    scale = series_value(p, 12)
    return series_state(p, max(choose_order(p, tol * abs(scale), cap), min(12, cap)))


def _unscale(entries, d, r, R):
    c = r / R
    n = d + 1
    out = np.array(entries, dtype=float)
    out[:n] *= c ** (d + 1)
    out[n:] *= c ** (d + 2)
    return out


def eval_diag_state(p: DiagParams, tol=DEFAULT_TOL, settings: OdeSettings = OdeSettings(),
                    perturb=None, route="auto", radius=None, order_cap=MAX_ORDER):
    """Diagonal state at ``p`` and details of how it was obtained.

    Small parameters (``L <= 0.9``) use the series directly.  Otherwise the
    series is summed at ``(x~ r^2/R^2, y~ r/R)`` on the unit sphere and the
    state is extended to radius ``R``, by default ``R = max(L, sqrt(2 L))``
    so that the rescaled point has ``L <= 1/2``.

    ``route`` forces ``"series"`` or ``"hgm"``; ``radius`` overrides ``R``;
    ``order_cap`` limits the series truncation order.
    ``perturb`` is added to the initial state before the extension (used by
    the ensemble error estimate).
    """
    if not (np.all(np.isfinite(p.xd)) and np.all(np.isfinite(p.yd))):
        raise ValueError("parameters must be finite")
    if route not in ("auto", "series", "hgm"):
        raise ValueError(f"unknown route {route!r}")
    if route == "series" or (route == "auto" and p.L <= SERIES_L_MAX):
        res = _series_at(p, tol, order_cap)
        e = np.array(res.state.entries)
        if perturb is not None:
            e = e + perturb
        return DiagStateVector(p.d, e, p.r), EvalInfo("series", res, p.r, p)
    R, scaled = _route(p, radius)
    res = _series_at(scaled, tol, order_cap)
    g0 = res.state
    if perturb is not None:
        g0 = DiagStateVector(p.d, g0.entries + perturb, 1.0)
    g1, steps = _extend(scaled, g0, R, settings)
    out = DiagStateVector(p.d, _unscale(g1, p.d, p.r, R), p.r)
    return out, EvalInfo("hgm", res, R, scaled, steps)


def diag_value(p: DiagParams, tol=DEFAULT_TOL, settings: OdeSettings = OdeSettings(), **kw):
    """Z~ at ``p``: the series value on the series route, else the implied value."""
    state, info = eval_diag_state(p, tol, settings, **kw)
    if info.route == "series":
        return info.series.value
    return state.value


def _threads():
    try:
        return max(1, int(os.environ.get("FB_THREADS", "1")))
    except ValueError:
        return 1


def perturbed_ensemble(p: DiagParams, tol=DEFAULT_TOL, eps=1e-5, replicas=200, confidence=0.95,
                       seed=0, settings: OdeSettings = OdeSettings(), threads=None,
                       route="auto", radius=None, order_cap=MAX_ORDER):
    """Statistical error bound for Z~ from Gaussian noise on the initial state.

    Every entry of the initial series state gets independent noise with
    standard deviation ``eps/2``; each replica owns a stream spawned from
    ``seed``, so the result does not depend on the number of threads.
    """
    if replicas < 2:
        raise ValueError("replicas must be >= 2")
    if eps < 0:
        raise ValueError("eps must be >= 0")
    if not 0 < confidence < 1:
        raise ValueError("confidence must be in (0, 1)")
    kw = dict(route=route, radius=radius, order_cap=order_cap)
    base_state, info = eval_diag_state(p, tol, settings, **kw)
    value = info.series.value if info.route == "series" else base_state.value
    size = 2 * p.d + 2
    streams = np.random.SeedSequence(seed).spawn(replicas)

    def one(ss):
        noise = np.random.default_rng(ss).normal(0.0, eps / 2, size)
        state, _ = eval_diag_state(p, tol, settings, perturb=noise, **kw)
        return state.value

    workers = min(threads or _threads(), replicas)
    if eps == 0:
        values = np.full(replicas, base_state.value)
    elif workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            values = np.array(list(pool.map(one, streams)))
    else:
        values = np.array([one(ss) for ss in streams])
    mean = float(np.mean(values))
    sd = float(np.std(values, ddof=1))
    z = float(norm.ppf(0.5 + confidence / 2))
    return ErrorEstimate(mean, sd, mean - z * sd, mean + z * sd, confidence, replicas, value)


# ---------------------------------------------------------------------------
# back to general x

def rotate_to_full(ds: DiagStateVector, frame: OrthogonalFrame, dp: DiagParams) -> StateVector:
    """State vector in the original coordinates from the diagonal one.

    Mixed derivatives in the diagonal frame come from the rotation identity
    ``2 (x~_k - x~_l) d_k d_l Z~ = y~_l d_k Z~ - y~_k d_l Z~``.  Inside a
    cluster of (nearly) equal ``x~`` the frame must carry ``y~`` on a single
    axis, in which case the mixed terms vanish; otherwise the formula has a
    pole and ``EigenvalueCollision`` is raised.
    """
    d = ds.d
    n = d + 1
    P = frame.P
    first_t = np.asarray(ds.first)
    second_t = np.asarray(ds.second)
    gap_tol = eigen_gap_tol(dp.xd)
    y_tol = 1e-12 * max(1.0, float(np.max(np.abs(dp.yd))))
    mixed = np.zeros((n, n))
    for k in range(n):
        for l in range(k + 1, n):
            gap = dp.xd[k] - dp.xd[l]
            if abs(gap) <= gap_tol:
                if min(abs(dp.yd[k]), abs(dp.yd[l])) > y_tol:
                    raise EigenvalueCollision(abs(gap))
                continue
            mixed[k, l] = mixed[l, k] = (dp.yd[l] * first_t[k] - dp.yd[k] * first_t[l]) / (2 * gap)
    hess_t = mixed + np.diag(second_t)
    first = P @ first_t
    second = np.einsum("ik,kl,il->i", P, hess_t, P)
    z = float(np.sum(second_t)) / (ds.r * ds.r)
    return StateVector(d, np.concatenate([[z], first, second[:d]]))


def full_hessian(ds: DiagStateVector, frame: OrthogonalFrame, dp: DiagParams):
    """All second y-derivatives ``d_i d_j Z`` in the original coordinates."""
    n = ds.d + 1
    first_t = np.asarray(ds.first)
    gap_tol = eigen_gap_tol(dp.xd)
    h = np.diag(np.asarray(ds.second, dtype=float))
    for k in range(n):
        for l in range(k + 1, n):
            gap = dp.xd[k] - dp.xd[l]
            if abs(gap) > gap_tol:
                h[k, l] = h[l, k] = (dp.yd[l] * first_t[k] - dp.yd[k] * first_t[l]) / (2 * gap)
    return frame.P @ h @ frame.P.T


def _centered(dp: DiagParams):
    """Shift ``x~`` by its median, which minimises ``L``; the state scales by ``exp(c r^2)``."""
    c = float(np.median(dp.xd))
    return DiagParams(dp.xd - c, dp.yd, dp.r), math.exp(c * dp.r * dp.r)


def eval_full_state(p: FullParams, tol=DEFAULT_TOL, settings: OdeSettings = OdeSettings()):
    """State vector at a general parameter point: diagonalise, evaluate, rotate back.

    The evaluation runs at ``x - cI`` with ``c`` the median eigenvalue, so
    ``x -> x + cI`` changes the result only by the exact factor ``exp(c r^2)``.
    """
    dp, frame = diagonalize(p)
    centered, scale = _centered(dp)
    ds, info = eval_diag_state(centered, tol, settings)
    ds = DiagStateVector(ds.d, ds.entries * scale, ds.r)
    return rotate_to_full(ds, frame, dp), info


def normalizing_constant(p: FullParams, tol=DEFAULT_TOL, settings: OdeSettings = OdeSettings()):
    dp, _ = diagonalize(p)
    centered, scale = _centered(dp)
    return diag_value(centered, tol, settings) * scale


__all__ = [
    "OdeSettings", "ErrorEstimate", "EvalInfo", "p_r_matrix", "lambda_scale", "hgm_extend",
    "eval_diag_state", "diag_value", "perturbed_ensemble", "rotate_to_full", "full_hessian",
    "eval_full_state", "normalizing_constant",
]
