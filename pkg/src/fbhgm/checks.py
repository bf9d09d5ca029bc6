"""Self-checks of the Pfaffian tables, shared by ``fbhgm check`` and the tests."""
from __future__ import annotations

import numpy as np

from . import goldens
from .errors import SingularFactor
from .hgm import p_r_matrix
from .model import DiagParams, FullParams
from .oracle import dstate_rows, mc_moments, mixed_rows, state_rows, third_rows
from .pfaffian import PfaffianPoint, build_abce, build_p2_q2, build_p3_q3_r3


def random_params(d, rng, scale=1.0, r=None):
    n = d + 1
    x = rng.uniform(-scale, scale, (n, n))
    return FullParams((x + x.T) / 2, rng.uniform(-scale, scale, n),
                      rng.uniform(0.5, 2.0) if r is None else r)


def golden_residual(p: FullParams):
    """Largest entry difference between the builders and the d = 1 closed forms."""
    pairs = list(zip(build_abce(p, 0), goldens.abce_y1(p)))
    pairs += list(zip(build_abce(p, 1), goldens.abce_y2(p)))
    pairs += list(zip(build_p2_q2(p), goldens.p2_q2(p)))
    pairs += list(zip(build_p3_q3_r3(p), goldens.p3_q3_r3(p)))
    dp = DiagParams(np.diag(p.x), p.y, p.r)
    pairs.append((p_r_matrix(dp, p.r), goldens.p_r(dp.xd, dp.yd, p.r)))
    return max(float(np.max(np.abs(a - b))) for a, b in pairs)


def integrability_residual(p: FullParams):
    """``max_ij ||H_ij - (dH_j/dy_i + H_j H_i)|| / ||H_ij||`` (max norms).

    ``H_ij`` is assembled in the order ``(i, j)``; comparing against the
    ``(j, i)`` ordering tests the zero-curvature condition.
    """
    pt = PfaffianPoint(p)
    n = p.d + 1
    worst = 0.0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            a = pt.Hx(i, j)
            b = pt.dH(j, i) + pt.H(j) @ pt.H(i)
            worst = max(worst, float(np.max(np.abs(a - b)) / np.max(np.abs(a))))
    return worst


def identity_blocks(p: FullParams, est):
    """Residuals of the three families of identities on estimated moments.

    Returns ``[(name, residual, stderr, combined_stderr)]`` where ``stderr`` is
    per row and ``combined_stderr = sqrt(trace Cov)`` is the standard error of
    the whole residual vector.
    """
    d = p.d
    S = est.selector(state_rows(d))
    S2 = est.selector(mixed_rows(d))
    S3 = est.selector(third_rows(d))
    P2, Q2 = build_p2_q2(p)
    P3, Q3, R3 = build_p3_q3_r3(p)
    maps = [("P2 F2 + Q2 F", P2 @ S2 + Q2 @ S),
            ("P3 F3 + Q3 F2 + R3 F", P3 @ S3 + Q3 @ S2 + R3 @ S)]
    for i in range(d + 1):
        A, B, C, E = build_abce(p, i)
        maps.append((f"A d{i + 1}F - B F - C F2 - E F3",
                     A @ est.selector(dstate_rows(d, i)) - B @ S - C @ S2 - E @ S3))
    out = []
    for name, c in maps:
        res, se = est.combine(c)
        cov = c @ est.cov @ c.T
        out.append((name, res, se, float(np.sqrt(max(np.trace(cov), 0.0)))))
    return out


def mc_identity_check(p: FullParams, n, seed, k=3.0):
    """Does every identity block lie within ``k`` combined standard errors?

    Also reports the largest per-row z-score and how many rows exceed ``k``.
    """
    est = mc_moments(p, n, seed, max_degree=3)
    # rows that vanish sample by sample have rounding-level errors; they must be ~0
    floor = 1e-12 * float(np.max(np.abs(est.mean)))
    ok = True
    zmax = 0.0
    over = rows = 0
    for _, res, se, comb in identity_blocks(p, est):
        ok &= bool(np.linalg.norm(res) <= k * comb + floor)
        live = se > floor
        ok &= bool(np.all(np.abs(res[~live]) <= 1e3 * floor))
        z = np.abs(res[live]) / se[live]
        rows += int(live.sum())
        if z.size:
            zmax = max(zmax, float(z.max()))
            over += int(np.sum(z > k))
    return ok, zmax, over, rows


def run_checks(dims, mc_samples=10 ** 6, seed=0, points=20):
    """Rows ``(name, passed, detail)`` for the self-check table."""
    rows = []
    rng = np.random.default_rng(seed)
    worst = max(golden_residual(random_params(1, rng)) for _ in range(points))
    rows.append(("d=1 golden matrices", worst <= 1e-13, f"max diff {worst:.2e}"))
    for d in dims:
        rng = np.random.default_rng([seed, d])
        res = []
        for _ in range(points):
            try:
                res.append(integrability_residual(random_params(d, rng)))
            except SingularFactor:
                continue
        worst = max(res) if res else np.inf
        rows.append((f"d={d} integrability", worst <= 1e-8, f"max rel residual {worst:.2e}"))
        if d <= 3:
            p = random_params(d, rng)
            ok, zmax, over, nrows = mc_identity_check(p, mc_samples, [seed, d, 1])
            rows.append((f"d={d} Monte-Carlo identities", ok,
                         f"n={mc_samples}, max row z {zmax:.2f}, {over}/{nrows} rows beyond 3 se"))
    return rows
