"""Monte-Carlo ground truth and an exact sampler, for tests and synthetic data.

Integrals ``int t^alpha exp(f(t)) |dt|`` over S^d(r) are estimated from
uniform points (normalised Gaussians).  Points come in fixed-size chunks,
each drawn from its own stream spawned from the seed, so every estimate is
reproducible bit for bit.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import AcceptanceTooLow
from .model import Dataset, FullParams, StateVector
from .pfaffian import pair_index, triple_index
from .series import surface_area

CHUNK = 1 << 16


@dataclass(frozen=True)
class McEstimate:
    value: float
    stderr: float
    n_samples: int

    def __post_init__(self):
        if not self.stderr >= 0:
            raise ValueError("stderr must be >= 0")


def uniform_sphere(d, n, rng):
    """``n`` uniform points on the unit ``d``-sphere in R^{d+1}."""
    g = rng.standard_normal((n, d + 1))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def _chunks(n, seed):
    sizes = [CHUNK] * (n // CHUNK) + ([n % CHUNK] if n % CHUNK else [])
    streams = np.random.SeedSequence(seed).spawn(len(sizes))
    return zip(sizes, streams)


def monomials(d, max_degree=3):
    """All sorted index tuples of length ``<= max_degree`` (``()`` is the constant)."""
    n = d + 1
    out = []
    for k in range(max_degree + 1):
        out.extend(itertools.combinations_with_replacement(range(n), k))
    return out


@dataclass(frozen=True)
class MomentEstimate:
    """Mean and covariance of the estimated integrals ``int t^alpha exp(f)``."""
    index: dict
    mean: np.ndarray
    cov: np.ndarray
    n_samples: int

    def get(self, *alpha):
        return self.mean[self.index[tuple(sorted(alpha))]]

    def selector(self, rows):
        """Matrix picking the listed monomials (each a tuple) in order."""
        s = np.zeros((len(rows), len(self.mean)))
        for k, alpha in enumerate(rows):
            s[k, self.index[tuple(sorted(alpha))]] = 1.0
        return s

    def combine(self, c):
        """Estimate and standard error of ``c @ mean`` for each row of ``c``."""
        c = np.atleast_2d(c)
        est = c @ self.mean
        var = np.einsum("ij,jk,ik->i", c, self.cov, c)
        return est, np.sqrt(np.maximum(var, 0.0))

    def stderr(self):
        return np.sqrt(np.diag(self.cov))


def mc_moments(p: FullParams, n, seed, max_degree=3) -> MomentEstimate:
    """Joint Monte-Carlo estimate of all monomial integrals up to ``max_degree``."""
    if n < 100:
        raise ValueError("n must be >= 100")
    mons = monomials(p.d, max_degree)
    m = len(mons)
    scale = surface_area(p.d) * p.r ** p.d
    total = np.zeros(m)
    cross = np.zeros((m, m))
    for size, ss in _chunks(n, seed):
        t = p.r * uniform_sphere(p.d, size, np.random.default_rng(ss))
        w = np.exp(p.exponent(t))
        cols = np.empty((size, m))
        for k, alpha in enumerate(mons):
            v = w.copy()
            for i in alpha:
                v *= t[:, i]
            cols[:, k] = v
        total += cols.sum(axis=0)
        cross += cols.T @ cols
    mean = total / n
    cov = (cross / n - np.outer(mean, mean)) * (n / (n - 1)) / n
    return MomentEstimate({a: k for k, a in enumerate(mons)}, scale * mean, scale ** 2 * cov, n)


def mc_normalizing_constant(p: FullParams, n, seed) -> McEstimate:
    """Plain Monte-Carlo estimate of Z with its standard error."""
    if n < 100:
        raise ValueError("n must be >= 100")
    scale = surface_area(p.d) * p.r ** p.d
    s1 = s2 = 0.0
    for size, ss in _chunks(n, seed):
        t = p.r * uniform_sphere(p.d, size, np.random.default_rng(ss))
        w = np.exp(p.exponent(t))
        s1 += float(w.sum())
        s2 += float(w @ w)
    mean = s1 / n
    var = max(s2 / n - mean * mean, 0.0) * n / (n - 1)
    return McEstimate(scale * mean, scale * math.sqrt(var / n), n)


# selectors for the vectors used by the Pfaffian identities

def state_rows(d):
    return [()] + [(i,) for i in range(d + 1)] + [(i, i) for i in range(d)]


def mixed_rows(d):
    return [(i - 1, j - 1) for (i, j) in pair_index(d)]


def third_rows(d):
    return [(i - 1, j - 1, k - 1) for (i, j, k) in triple_index(d)]


def dstate_rows(d, direction):
    return [(direction,) + a for a in state_rows(d)]


def mc_state(p: FullParams, n, seed):
    """Monte-Carlo state vector ``F`` and per-entry standard errors."""
    est = mc_moments(p, n, seed, max_degree=2)
    mean, se = est.combine(est.selector(state_rows(p.d)))
    return StateVector(p.d, mean), se


# ---------------------------------------------------------------------------
# exact sampling

def rejection_sample(p: FullParams, n, seed, batch=CHUNK, max_proposals=10 ** 9) -> Dataset:
    """Exact draws from the density proportional to ``exp(f(t))`` on the unit sphere.

    Uniform proposals are accepted with probability ``exp(f(t) - M)``,
    ``M = lambda_max(Q) + ||y||`` bounding ``f`` on the sphere.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if p.r != 1.0:
        raise ValueError("sampling is on the unit sphere (r = 1)")
    bound = float(np.linalg.eigvalsh(p.form_matrix)[-1] + np.linalg.norm(p.y))
    seq = np.random.SeedSequence(seed)
    kept = []
    have = proposals = 0
    while have < n:
        rng = np.random.default_rng(seq.spawn(1)[0])
        t = uniform_sphere(p.d, batch, rng)
        u = rng.uniform(size=batch)
        ok = np.log(u) <= p.exponent(t) - bound
        kept.append(t[ok])
        have += int(ok.sum())
        proposals += batch
        rate = have / proposals
        if (proposals >= 10 ** 6 and rate < 1e-6) or (proposals >= max_proposals and have < n):
            raise AcceptanceTooLow(rate)
    return Dataset(np.concatenate(kept)[:n])


__all__ = [
    "McEstimate", "MomentEstimate", "uniform_sphere", "monomials", "mc_moments",
    "mc_normalizing_constant", "mc_state", "rejection_sample",
    "state_rows", "mixed_rows", "third_rows", "dstate_rows",
]
