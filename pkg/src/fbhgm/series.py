"""Power series for the diagonal normalizing constant Z~ and its y-derivatives.

The term for multi-indices ``(alpha, beta)`` factorises over coordinates,

    S_d r^{d+2n} (d-1)!!/(d-1+2n)!! * prod_i c(alpha_i, beta_i) x_i^alpha_i y_i^{2 beta_i},
    c(a, b) = (2a+2b-1)!! / (a! (2b)!),       n = |alpha| + |beta|,

so the sum over a total-degree layer ``n`` is the degree-``n`` coefficient of a
product of one-variable polynomials.  Layers are accumulated up to the
truncation order with the radial weight updated multiplicatively.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import BoundInvalid, SeriesOverflow
from .model import DiagParams, DiagStateVector

MAX_ORDER = 80


def surface_area(d):
    """Area of the unit d-sphere, ``2 pi^{(d+1)/2} / Gamma((d+1)/2)``."""
    return 2.0 * math.pi ** ((d + 1) / 2) / math.gamma((d + 1) / 2)


def double_factorial(k):
    """``k!!`` with ``(-1)!! = 0!! = 1``."""
    return math.prod(range(k, 0, -2)) if k > 0 else 1


@lru_cache(maxsize=None)
def _coefficients(order):
    # c[m, a] = (2m-1)!! / (a! (2(m-a))!), rounded once from exact integers
    c = np.zeros((order + 1, order + 1))
    for m in range(order + 1):
        num = double_factorial(2 * m - 1)
        for a in range(m + 1):
            c[m, a] = num / (math.factorial(a) * math.factorial(2 * (m - a)))
    c.setflags(write=False)
    return c


def _layer_weights(d, r, order):
    # r^{d+2n} (d-1)!! / (d-1+2n)!!
    w = np.empty(order + 1)
    w[0] = r ** d
    for n in range(1, order + 1):
        w[n] = w[n - 1] * r * r / (d - 1 + 2 * n)
    return w


def _coordinate_polys(xi, yi, order):
    """Per-coordinate polynomials for the value and the first two y-derivatives."""
    c = _coefficients(order)
    m = np.arange(order + 1)
    # rows: degree k, columns: power a of x; b = k - a is the power of y^2
    b = m[:, None] - m[None, :]
    live = b >= 0
    bb = np.where(live, b, 0)
    coef = np.where(live, c * xi ** m[None, :], 0.0)
    y2 = yi ** (2 * bb)
    h0 = np.sum(coef * y2, axis=1)
    # y^{2b-1}, y^{2b-2} only where b >= 1 (0^0 = 1 on the b = 1 term)
    pos = bb >= 1
    e1 = np.where(pos, 2 * bb - 1, 0)
    e2 = np.where(pos, 2 * bb - 2, 0)
    h1 = np.sum(np.where(pos, coef * 2 * bb * yi ** e1, 0.0), axis=1)
    h2 = np.sum(np.where(pos, coef * 2 * bb * (2 * bb - 1) * yi ** e2, 0.0), axis=1)
    return h0, h1, h2


def _truncated_product(polys, order):
    out = np.zeros(order + 1)
    out[0] = 1.0
    for h in polys:
        out = np.convolve(out, h)[:order + 1]
    return out


def _layers(p: DiagParams, order, derivatives):
    if order < 0:
        raise ValueError("order must be >= 0")
    polys = [_coordinate_polys(xi, yi, order) for xi, yi in zip(p.xd, p.yd)]
    scale = surface_area(p.d) * _layer_weights(p.d, p.r, order)
    value = scale * _truncated_product([h[0] for h in polys], order)
    if not derivatives:
        return value, None, None
    n = p.d + 1
    first = np.empty((n, order + 1))
    second = np.empty((n, order + 1))
    for i in range(n):
        rest = _truncated_product([polys[k][0] for k in range(n) if k != i], order)
        first[i] = scale * np.convolve(rest, polys[i][1])[:order + 1]
        second[i] = scale * np.convolve(rest, polys[i][2])[:order + 1]
    return value, first, second


def _checked_sum(layers, what):
    with np.errstate(over="ignore", invalid="ignore"):
        partial = np.cumsum(layers, axis=-1)
    if not np.all(np.isfinite(partial)):
        raise SeriesOverflow(f"series for {what} overflowed; use the ODE route")
    return partial[..., -1]


def series_value(p: DiagParams, order: int) -> float:
    """Z~(x~, y~, r) truncated to total degree ``order``."""
    value, _, _ = _layers(p, order, derivatives=False)
    return float(_checked_sum(value, "Z"))


def truncation_bound(p: DiagParams, n_from: int) -> float:
    """Bound on the tail of the value series over layers ``n >= n_from``."""
    if n_from < 1:
        raise ValueError("n_from must be >= 1")
    L = p.L
    if L >= n_from + 1:
        raise BoundInvalid(L, n_from)
    if L == 0.0:
        return 0.0
    N = n_from
    log_b = (math.log(surface_area(p.d)) + p.d * math.log(p.r) + N * math.log(L)
             - math.lgamma(N + 1) + math.log((N + 1) / (N + 1 - L)))
    return math.exp(log_b)


def choose_order(p: DiagParams, tol, cap=MAX_ORDER):
    """Smallest order whose tail bound is below ``tol`` (at most ``cap``)."""
    for order in range(1, cap + 1):
        try:
            if truncation_bound(p, order + 1) < tol:
                return order
        except BoundInvalid:
            continue
    return cap


@dataclass(frozen=True)
class SeriesResult:
    state: DiagStateVector
    value: float
    order: int
    value_bound: float
    derivative_bound_heuristic: float


def series_state(p: DiagParams, order: int) -> SeriesResult:
    """Truncated series for ``(dZ~/dy~_i, d2Z~/dy~_i^2)`` and for Z~ itself.

    The derivative tails have no rigorous bound; twice the magnitude of the
    last layer is reported as a heuristic.
    """
    value, first, second = _layers(p, order, derivatives=True)
    z = float(_checked_sum(value, "Z"))
    f1 = _checked_sum(first, "dZ/dy")
    f2 = _checked_sum(second, "d2Z/dy2")
    if z <= 0:
        raise SeriesOverflow(f"series value {z} is not positive")
    try:
        bound = truncation_bound(p, order + 1)
    except BoundInvalid:
        bound = math.inf
    last = np.concatenate([first[:, -1], second[:, -1]])
    heuristic = 2.0 * float(np.max(np.abs(last))) if order > 0 else math.inf
    state = DiagStateVector(p.d, np.concatenate([f1, f2]), p.r)
    return SeriesResult(state, z, order, bound, heuristic)


def series_value_mp(p: DiagParams, order: int, dps=50):
    """Extended-precision (mpmath) evaluation of the same truncated series."""
    import mpmath as mp

    with mp.workdps(dps):
        polys = []
        for xi, yi in zip(p.xd, p.yd):
            xi, yi = mp.mpf(float(xi)), mp.mpf(float(yi))
            h = []
            for m in range(order + 1):
                num = mp.mpf(double_factorial(2 * m - 1))
                h.append(mp.fsum(
                    num / (mp.factorial(a) * mp.factorial(2 * (m - a))) * xi ** a * yi ** (2 * (m - a))
                    for a in range(m + 1)))
            polys.append(h)
        g = [mp.mpf(1)] + [mp.mpf(0)] * order
        for h in polys:
            g = [mp.fsum(g[k] * h[m - k] for k in range(m + 1)) for m in range(order + 1)]
        d = p.d
        r = mp.mpf(float(p.r))
        s_d = 2 * mp.pi ** (mp.mpf(d + 1) / 2) / mp.gamma(mp.mpf(d + 1) / 2)
        w = r ** d
        total = mp.mpf(0)
        for n in range(order + 1):
            if n:
                w = w * r * r / (d - 1 + 2 * n)
            total += w * g[n]
        return s_d * total
