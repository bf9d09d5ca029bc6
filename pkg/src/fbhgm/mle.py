"""Maximum likelihood for the Fisher-Bingham family on the unit sphere.

The parameter vector is ``theta = (upper(x), y)`` with the exponent
``sum_{i<=j} x_ij t_i t_j + y^T t``, so an off-diagonal ``x_ij`` multiplies
``t_i t_j`` once.  Since ``sum t_i^2 = 1`` on the sphere, ``x -> x + c I``
leaves the model unchanged; gradients are projected off that direction and
results are reported with ``x_{d+1,d+1} = 0``.

The fit is a Nelder-Mead warm start followed by gradient ascent in which the
state vector ``F = (Z, dZ, d2Z)`` is carried along each step with the Pfaffian
system instead of being recomputed.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from .errors import AllStartsFailed, FBError, SingularFactor
from .hgm import DEFAULT_TOL, _threads, eval_full_state, normalizing_constant
from .model import (Dataset, FullParams, StateVector, SufficientStats, upper_pairs,
                    sufficient_stats)
from .ode import OdeSettings, rk4_linear
from .pfaffian import PfaffianPoint, pair_index, pfaffian_system

log = logging.getLogger(__name__)

CONVERGED = "Converged"
ABORTED = "Aborted"
MAX_ITERS = "MaxIters"


@dataclass(frozen=True)
class MleConfig:
    starts: int = 8
    grad_tol: float = 1e-5           # per observation, sup norm
    max_iters: int = 2000
    max_step_norm: float = 0.1
    nm_diameter_tol: float = 1e-3
    nm_max_evals: int = 20000
    ode: OdeSettings = field(default_factory=OdeSettings)
    seed: int = 0
    series_tol: float = DEFAULT_TOL
    substep: float = 0.02
    reanchor_every: int = 25
    backtracks: int = 20
    threads: int | None = None

    def __post_init__(self):
        for name in ("starts", "grad_tol", "max_iters", "max_step_norm", "nm_diameter_tol",
                     "nm_max_evals", "substep", "reanchor_every", "backtracks"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class MleResult:
    theta_hat: FullParams
    loglik: float
    grad_norm: float
    state: StateVector
    iters: int
    restarts: int
    status: str
    message: str = ""
    loglik_trace: tuple = ()
    start: int = -1


# ---------------------------------------------------------------------------
# likelihood and gradient

def loglik(p: FullParams, stats: SufficientStats, z) -> float:
    """``sum_{i<=j} x_ij S2_ij + y^T S1 - n log Z``."""
    if not z > 0:
        raise ValueError("normalizing constant must be positive")
    iu = np.triu_indices(p.n)
    return float(np.dot(p.x[iu], stats.S2[iu]) + p.y @ stats.S1 - stats.n_samples * math.log(z))


def hessian_of_z(p: FullParams, f, point: PfaffianPoint | None = None):
    """All second y-derivatives of Z; mixed ones through ``P2 F2 + Q2 F = 0``."""
    f = f if isinstance(f, StateVector) else StateVector(p.d, f)
    n = p.n
    h = np.diag(f.all_second(p.r))
    if n > 1:
        mixed = (point or PfaffianPoint(p)).mixed_second(f.entries)
        for (i, j), k in pair_index(p.d).items():
            h[i - 1, j - 1] = h[j - 1, i - 1] = mixed[k - 1]
    return h


def _project(p_or_n, g):
    n = p_or_n if isinstance(p_or_n, int) else p_or_n.n
    g = np.array(g, dtype=float)
    diag = [k for k, (i, j) in enumerate(upper_pairs(n)) if i == j]
    g[diag] -= g[diag].mean()
    return g


def loglik_gradient(p: FullParams, f, stats: SufficientStats, point: PfaffianPoint | None = None):
    """Gradient over ``(upper(x), y)`` with the ``x + c I`` component removed."""
    f = f if isinstance(f, StateVector) else StateVector(p.d, f)
    z = f.value
    if not z > 0:
        raise ValueError("state has non-positive Z")
    n_s = stats.n_samples
    h = hessian_of_z(p, f, point)
    iu = np.triu_indices(p.n)
    gx = stats.S2[iu] - n_s * h[iu] / z
    gy = stats.S1 - n_s * np.asarray(f.first) / z
    return _project(p, np.concatenate([gx, gy]))


# ---------------------------------------------------------------------------
# gauge

def normalize_gauge(p: FullParams, f=None):
    """Shift ``x`` so that ``x_{d+1,d+1} = 0``; the state scales by ``exp(-c r^2)``."""
    c = p.x[-1, -1]
    q = p.shifted(-c)
    if f is None:
        return q
    f = f if isinstance(f, StateVector) else StateVector(p.d, f)
    return q, f.scaled(math.exp(-c * p.r ** 2))


# ---------------------------------------------------------------------------
# warm start

def _free_index(d):
    # every coordinate of theta except x_{d+1,d+1}
    n = d + 1
    k = n * (n + 1) // 2
    return np.r_[0:k - 1, k:k + n]


def nelder_mead_warmstart(stats: SufficientStats, cfg: MleConfig = MleConfig(), rng=None):
    """Nelder-Mead on ``-loglik/n`` from a random start with coordinates in (0, 1).

    The gauge coordinate is fixed at zero; failed evaluations count as +inf.
    Returns ``(theta0, info)``.
    """
    d = stats.d
    rng = np.random.default_rng(cfg.seed if rng is None else rng)
    start = FullParams.from_vector(rng.uniform(0.0, 1.0, (d + 1) * (d + 2) // 2 + d + 1), d)
    start = normalize_gauge(start)
    free = _free_index(d)
    base = start.vector.copy()

    def params(v):
        theta = base.copy()
        theta[free] = v
        return FullParams.from_vector(theta, d)

    def objective(v):
        try:
            p = params(v)
            z = normalizing_constant(p, cfg.series_tol, cfg.ode)
            return -loglik(p, stats, z) / stats.n_samples
        except (FBError, ValueError, OverflowError, FloatingPointError):
            return math.inf

    f0 = objective(base[free])
    res = minimize(objective, base[free], method="Nelder-Mead",
                   options=dict(xatol=cfg.nm_diameter_tol, fatol=math.inf, adaptive=True,
                                maxfev=cfg.nm_max_evals, maxiter=cfg.nm_max_evals))
    best = params(res.x)
    return best, dict(start=start, f_start=f0, f_best=float(res.fun), nfev=int(res.nfev),
                      success=bool(res.success))


# ---------------------------------------------------------------------------
# gradient ascent with transported state

def _fresh(p: FullParams, cfg: MleConfig):
    f, _ = eval_full_state(p, cfg.series_tol, cfg.ode)
    return f.entries


def transport(p: FullParams, f, delta, substep=0.02):
    """Carry ``F`` from ``theta`` to ``theta + delta`` along the straight segment."""
    d = p.d
    k = (d + 1) * (d + 2) // 2
    system = pfaffian_system(d, p.r)
    theta0 = p.vector
    dx, dy = delta[:k], delta[k:]
    n_sub = max(1, math.ceil(np.linalg.norm(delta) / substep))

    def matrix_at(s):
        q = FullParams.from_vector(theta0 + s * delta, d, p.r)
        return PfaffianPoint(q, system).generator(dx, dy)

    return rk4_linear(matrix_at, f, n_sub)


def hgd_run(stats: SufficientStats, theta0: FullParams, cfg: MleConfig = MleConfig(),
            f0=None) -> MleResult:
    """Gradient ascent with Barzilai-Borwein steps, Armijo backtracking and transport.

    Each trial step moves at most ``max_step_norm``; ``F`` is transported with
    RK4 substeps no longer than ``cfg.substep``.  ``F`` is recomputed from
    scratch every ``reanchor_every`` accepted steps and before convergence is
    declared.
    """
    n_s = stats.n_samples
    target = cfg.grad_tol * n_s
    p = theta0
    trace = []
    fresh = True
    try:
        f = np.asarray(f0, dtype=float) if f0 is not None else _fresh(p, cfg)
        point = PfaffianPoint(p)
        g = loglik_gradient(p, f, stats, point)
        ll = loglik(p, stats, f[0])
    except (FBError, ValueError) as exc:
        return MleResult(p, math.nan, math.inf, StateVector(p.d, np.full(2 * p.d + 2, np.nan)),
                         0, 0, ABORTED, f"initial evaluation failed: {exc}")
    trace.append(ll)
    prev = None
    since_anchor = 0
    it = 0
    status, message = MAX_ITERS, "iteration limit reached"
    while it < cfg.max_iters:
        gnorm = float(np.max(np.abs(g)))
        if gnorm <= target:
            if fresh:
                status, message = CONVERGED, ""
                break
            f, point, g, ll, fresh, since_anchor = _reanchor(p, stats, cfg)
            prev = None
            continue
        it += 1
        # BB1 step length for ascent, capped by the trust radius
        gg = float(g @ g)
        alpha = cfg.max_step_norm / math.sqrt(gg)
        if prev is not None:
            s = p.vector - prev[0]
            yv = g - prev[1]
            sy = float(s @ yv)
            if sy < 0:
                alpha = min(alpha, float(s @ s) / -sy)
        accepted = False
        try:
            for _ in range(cfg.backtracks):
                delta = alpha * g
                q = FullParams.from_vector(p.vector + delta, p.d, p.r)
                f_new = transport(p, f, delta, cfg.substep)
                if f_new[0] > 0:
                    ll_new = loglik(q, stats, f_new[0])
                    if ll_new >= ll + 1e-4 * alpha * gg:
                        accepted = True
                        break
                alpha *= 0.5
        except (SingularFactor, FBError, FloatingPointError) as exc:
            status, message = ABORTED, f"{type(exc).__name__}: {exc}"
            log.info("HGD aborted at %s: %s", p.vector, exc)
            break
        if not accepted:
            if not fresh:
                f, point, g, ll, fresh, since_anchor = _reanchor(p, stats, cfg)
                prev = None
                continue
            status, message = ABORTED, "line search failed at a fresh state"
            break
        prev = (p.vector, g)
        p, f = q, f_new
        fresh = False
        since_anchor += 1
        try:
            if since_anchor >= cfg.reanchor_every:
                f, point, g, ll, fresh, since_anchor = _reanchor(p, stats, cfg)
            else:
                point = PfaffianPoint(p)
                g = loglik_gradient(p, f, stats, point)
                ll = ll_new
        except (FBError, ValueError) as exc:
            status, message = ABORTED, f"{type(exc).__name__}: {exc}"
            break
        trace.append(ll)
    p_out, s_out = normalize_gauge(p, f)
    return MleResult(p_out, ll, float(np.max(np.abs(g))), s_out, it, 0, status, message,
                     tuple(trace))


def _reanchor(p, stats, cfg):
    f = _fresh(p, cfg)
    point = PfaffianPoint(p)
    g = loglik_gradient(p, f, stats, point)
    return f, point, g, loglik(p, stats, f[0]), True, 0


# ---------------------------------------------------------------------------
# multistart driver

def _attempt(stats, cfg, k, seq):
    rng = np.random.default_rng(seq)
    restarts = 0
    try:
        theta0, _ = nelder_mead_warmstart(stats, cfg, rng)
    except FBError as exc:
        return None, 1, f"start {k}: warm start failed: {exc}"
    res = hgd_run(stats, theta0, cfg)
    if res.status == ABORTED:
        restarts += 1
        # one retry from a perturbed neighbourhood of the abort point
        v = res.theta_hat.vector + rng.normal(0.0, 0.05, res.theta_hat.vector.size)
        res = hgd_run(stats, normalize_gauge(FullParams.from_vector(v, stats.d)), cfg)
    return replace(res, restarts=restarts, start=k), restarts, res.message


def mle_pipeline(data, cfg: MleConfig = MleConfig()) -> MleResult:
    """Best converged fit over ``cfg.starts`` seeded warm starts.

    Attempts may run in parallel (``cfg.threads`` or ``FB_THREADS``); the
    result depends only on the seed.
    """
    stats = data if isinstance(data, SufficientStats) else sufficient_stats(
        data if isinstance(data, Dataset) else Dataset(data))
    seqs = np.random.SeedSequence(cfg.seed).spawn(cfg.starts)
    workers = min(cfg.threads or _threads(), cfg.starts)
    jobs = [(stats, cfg, k, s) for k, s in enumerate(seqs)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            outcomes = list(pool.map(lambda a: _attempt(*a), jobs))
    else:
        outcomes = [_attempt(*a) for a in jobs]
    restarts = sum(r for _, r, _ in outcomes)
    done = [res for res, _, _ in outcomes if res is not None and res.status == CONVERGED]
    if not done:
        msgs = "; ".join(m for _, _, m in outcomes if m)
        raise AllStartsFailed(f"no start converged ({msgs})")
    best = max(done, key=lambda r: (r.loglik, -r.start))
    failed = sum(1 for res, _, _ in outcomes if res is None or res.status != CONVERGED)
    return replace(best, restarts=restarts + failed)


__all__ = [
    "MleConfig", "MleResult", "loglik", "loglik_gradient", "hessian_of_z", "normalize_gauge",
    "nelder_mead_warmstart", "transport", "hgd_run", "mle_pipeline",
    "CONVERGED", "ABORTED", "MAX_ITERS",
]
