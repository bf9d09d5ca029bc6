"""Parameter types, index conventions and small linear-algebra helpers.

Conventions
-----------
Indices are 0-based.  With ``n = d + 1`` coordinates the density exponent is

    sum_{i <= j} x[i, j] t_i t_j + sum_i y[i] t_i,

so an off-diagonal coefficient multiplies ``t_i t_j`` once.  ``FullParams.x``
stores these coefficients as a symmetric array; the quadratic form matrix
(``form_matrix``) halves the off-diagonal entries.

State vectors follow the layout::

    F  = (Z, dZ/dy_0 .. dZ/dy_d, d2Z/dy_0^2 .. d2Z/dy_{d-1}^2)          (2d+2)
    F~ = (dZ~/dy_0 .. dZ~/dy_d, d2Z~/dy_0^2 .. d2Z~/dy_d^2)             (2d+2)
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import EigenFailure, ValidationError

MAX_DIM = 10


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _check_dim(d, cap=MAX_DIM):
    if int(d) != d or d < 1:
        raise ValidationError(f"dimension must be an integer >= 1, got {d!r}")
    if d > cap:
        raise ValidationError(f"dimension {d} exceeds the cap {cap}")
    return int(d)


# ---------------------------------------------------------------------------
# index helpers

@lru_cache(maxsize=None)
def upper_pairs(n):
    """All ``(i, j)`` with ``i <= j < n`` in lexicographic order."""
    return tuple((i, j) for i in range(n) for j in range(i, n))


def upper_index(i, j, n):
    """Position of ``x[i, j]`` in the upper-triangle vector layout."""
    if i > j:
        i, j = j, i
    return i * n - i * (i - 1) // 2 + (j - i)


def upper_to_matrix(upper, n):
    upper = np.asarray(upper, dtype=float)
    if upper.shape != (n * (n + 1) // 2,):
        raise ValidationError(f"expected {n * (n + 1) // 2} upper-triangle entries, got {upper.shape}")
    x = np.zeros((n, n))
    iu = np.triu_indices(n)
    x[iu] = upper
    return x + np.triu(x, 1).T


def matrix_to_upper(x):
    return np.asarray(x)[np.triu_indices(len(x))].copy()


# ---------------------------------------------------------------------------
# parameter types

@dataclass(frozen=True)
class FullParams:
    """Natural parameters ``(x, y, r)`` of the Fisher-Bingham distribution on S^d(r)."""

    x: np.ndarray
    y: np.ndarray
    r: float = 1.0
    d: int = field(init=False)

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        y = np.array(self.y, dtype=float).reshape(-1)
        n = y.size
        d = _check_dim(n - 1)
        if x.shape != (n, n):
            raise ValidationError(f"x must be {n}x{n}, got {x.shape}")
        if not np.allclose(x, x.T, rtol=0, atol=1e-12 * max(1.0, np.abs(x).max())):
            raise ValidationError("x must be symmetric")
        x = 0.5 * (x + x.T)
        r = float(self.r)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y)) and np.isfinite(r)):
            raise ValidationError("parameters must be finite")
        if r <= 0:
            raise ValidationError(f"radius must be positive, got {r}")
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "d", d)

    @classmethod
    def from_upper(cls, upper, y, r=1.0):
        n = len(y)
        return cls(upper_to_matrix(upper, n), y, r)

    @classmethod
    def from_vector(cls, theta, d, r=1.0):
        """Inverse of :attr:`vector` (upper triangle of x followed by y)."""
        n = d + 1
        k = n * (n + 1) // 2
        theta = np.asarray(theta, dtype=float)
        return cls.from_upper(theta[:k], theta[k:], r)

    @property
    def n(self):
        return self.d + 1

    @property
    def upper(self):
        return matrix_to_upper(self.x)

    @property
    def vector(self):
        return np.concatenate([self.upper, self.y])

    def xs(self, i, j):
        """Coefficient of ``t_i t_j`` (``i == j``) or the symmetric pair coefficient."""
        return self.x[i, j]

    @property
    def form_matrix(self):
        """Symmetric matrix ``Q`` with exponent ``t^T Q t + y^T t``."""
        q = 0.5 * np.array(self.x)
        q[np.diag_indices(self.n)] = np.diag(self.x)
        return q

    def exponent(self, t):
        t = np.asarray(t, dtype=float)
        return np.einsum("...i,ij,...j->...", t, self.form_matrix, t) + t @ self.y

    def shifted(self, c):
        """Parameters with ``x -> x + c I`` (the unidentifiable direction)."""
        return FullParams(self.x + c * np.eye(self.n), self.y, self.r)

    def with_(self, x=None, y=None, r=None):
        return FullParams(self.x if x is None else x, self.y if y is None else y,
                          self.r if r is None else r)


@dataclass(frozen=True)
class DiagParams:
    """Diagonal parameters of the restricted integral Z~(x~, y~, r)."""

    xd: np.ndarray
    yd: np.ndarray
    r: float = 1.0
    d: int = field(init=False)

    def __post_init__(self):
        xd = np.array(self.xd, dtype=float).reshape(-1)
        yd = np.array(self.yd, dtype=float).reshape(-1)
        if xd.shape != yd.shape:
            raise ValidationError("xd and yd must have the same length")
        d = _check_dim(xd.size - 1)
        r = float(self.r)
        if not (np.all(np.isfinite(xd)) and np.all(np.isfinite(yd)) and np.isfinite(r)):
            raise ValidationError("parameters must be finite")
        if r <= 0:
            raise ValidationError(f"radius must be positive, got {r}")
        object.__setattr__(self, "xd", _frozen(xd))
        object.__setattr__(self, "yd", _frozen(yd))
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "d", d)

    @property
    def L(self):
        """Convergence-controlling quantity ``r^2 * sum(|x~| + y~^2)``."""
        return self.r ** 2 * float(np.sum(np.abs(self.xd) + self.yd ** 2))

    def to_full(self):
        return FullParams(np.diag(self.xd), self.yd, self.r)

    def with_(self, xd=None, yd=None, r=None):
        return DiagParams(self.xd if xd is None else xd, self.yd if yd is None else yd,
                          self.r if r is None else r)


@dataclass(frozen=True)
class StateVector:
    d: int
    entries: np.ndarray

    def __post_init__(self):
        e = _frozen(np.reshape(self.entries, -1))
        if e.size != 2 * self.d + 2:
            raise ValidationError(f"state must have length {2 * self.d + 2}, got {e.size}")
        object.__setattr__(self, "entries", e)

    @property
    def value(self):
        return float(self.entries[0])

    @property
    def first(self):
        return self.entries[1:self.d + 2]

    @property
    def second(self):
        """``d2Z/dy_i^2`` for ``i < d`` (the last coordinate is implied)."""
        return self.entries[self.d + 2:]

    def all_second(self, r=1.0):
        """All ``d+1`` pure second derivatives, the last one via ``sum = r^2 Z``."""
        s = self.second
        return np.append(s, r ** 2 * self.value - s.sum())

    def scaled(self, factor):
        return StateVector(self.d, factor * self.entries)


@dataclass(frozen=True)
class DiagStateVector:
    d: int
    entries: np.ndarray
    r: float = 1.0

    def __post_init__(self):
        e = _frozen(np.reshape(self.entries, -1))
        if e.size != 2 * self.d + 2:
            raise ValidationError(f"state must have length {2 * self.d + 2}, got {e.size}")
        object.__setattr__(self, "entries", e)

    @property
    def first(self):
        return self.entries[:self.d + 1]

    @property
    def second(self):
        return self.entries[self.d + 1:]

    @property
    def value(self):
        """Z~ implied by ``sum_i d2Z~/dy_i^2 = r^2 Z~``."""
        return float(self.second.sum()) / self.r ** 2


@dataclass(frozen=True)
class Dataset:
    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 2:
            raise ValidationError("points must be a non-empty (n_samples, d+1) array, d >= 1")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("points must be finite")
        object.__setattr__(self, "points", _frozen(pts))

    @property
    def d(self):
        return self.points.shape[1] - 1

    @property
    def n_samples(self):
        return self.points.shape[0]


@dataclass(frozen=True)
class SufficientStats:
    d: int
    n_samples: int
    S1: np.ndarray
    S2: np.ndarray


@dataclass(frozen=True)
class OrthogonalFrame:
    P: np.ndarray

    def __post_init__(self):
        P = _frozen(self.P)
        if not np.allclose(P.T @ P, np.eye(len(P)), atol=1e-10, rtol=0):
            raise ValidationError("frame is not orthogonal")
        object.__setattr__(self, "P", P)


# ---------------------------------------------------------------------------
# operations

def validate_on_sphere(data, tol=1e-8):
    """Indices of rows whose Euclidean norm differs from 1 by more than ``tol``."""
    norms = np.linalg.norm(np.asarray(data.points if isinstance(data, Dataset) else data), axis=1)
    return [int(k) for k in np.flatnonzero(np.abs(norms - 1.0) > tol)]


def sufficient_stats(data: Dataset) -> SufficientStats:
    bad = validate_on_sphere(data, 1e-8)
    if bad:
        raise ValidationError(f"rows not on the unit sphere: {bad[:10]}")
    T = data.points
    return SufficientStats(data.d, data.n_samples, _frozen(T.sum(axis=0)), _frozen(T.T @ T))


def jacobi_eigh(a, tol=1e-14, max_sweeps=60):
    """Cyclic Jacobi eigendecomposition of a small symmetric matrix.

    Returns ``(w, V)`` with ``a = V diag(w) V^T``, eigenvalues ascending and
    each eigenvector's largest-magnitude entry positive (first index on ties).
    Sweeps stop once the off-diagonal Frobenius mass falls below
    ``tol * ||a||_F``.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    scale = np.linalg.norm(a)
    if scale == 0.0:
        return np.zeros(n), v
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / abs(theta)
                else:
                    t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0:
                    t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                cp, cq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                rp, rq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                a[p, q] = a[q, p] = 0.0
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off > tol * scale:
            raise EigenFailure(f"Jacobi iteration did not converge (off-diagonal mass {off:.3e})")
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    w, v = w[order], v[:, order]
    return w, _fix_signs(v)


def _fix_signs(v):
    v = v.copy()
    for k in range(v.shape[1]):
        if v[np.argmax(np.abs(v[:, k])), k] < 0:
            v[:, k] = -v[:, k]
    return v


def _align_clusters(w, v, y, gap_tol):
    # Inside a block of (nearly) equal eigenvalues the basis is arbitrary; pick
    # it so that y has a single nonzero coordinate there.  The mixed second
    # derivatives inside the block then vanish by symmetry.
    v = v.copy()
    n = len(w)
    start = 0
    while start < n:
        stop = start + 1
        while stop < n and w[stop] - w[stop - 1] <= gap_tol:
            stop += 1
        if stop - start > 1:
            block = v[:, start:stop]
            c = block.T @ y
            norm = np.linalg.norm(c)
            if norm > 0:
                # Householder reflection sending c to ||c|| e_0 within the block
                u = c.copy()
                u[0] += np.copysign(norm, c[0]) if c[0] != 0 else norm
                h = np.eye(len(c)) - 2.0 * np.outer(u, u) / (u @ u)
                block = block @ h
            v[:, start:stop] = block
        start = stop
    return v


def eigen_gap_tol(w):
    return 1e-6 * max(1.0, float(np.max(np.abs(w)))) if len(w) else 0.0


def diagonalize(p: FullParams):
    """Rotate ``p`` to diagonal form: ``(DiagParams, OrthogonalFrame)``.

    ``x~`` are the eigenvalues (ascending) of the quadratic form matrix,
    ``y~ = P^T y`` and ``r~ = r``.
    """
    w, v = jacobi_eigh(p.form_matrix)
    tol = eigen_gap_tol(w)
    if np.any(np.diff(w) <= tol):
        v = _fix_signs(_align_clusters(w, v, p.y, tol))
    return DiagParams(w, v.T @ p.y, p.r), OrthogonalFrame(v)
