"""Factored Pfaffian matrices for the full-parameter state vector F.

The builders below fill the tables entry by entry.  Inside them indices are
1-based so that each assignment reads like the formula it encodes:

* ``_F1(k)``  position of ``d_k`` in F (``k + 1``),
* ``_F2(k)``  position of ``d_k^2`` in F (``k + d + 2``; absent for ``k = d+1``),
* ``pair(a, b)`` column of ``d_a d_b`` (``a != b``) in the mixed-second vector,
* ``triple(a, b, c)`` column of ``d_a d_b d_c`` in the third-order vector.

Writes whose row or column falls outside the matrix are dropped.  Entries are
accumulated, so coinciding monomials add up.

Everything exported from this module takes 0-based direction indices.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import SingularFactor
from .linalg import Factor
from .model import FullParams, StateVector, upper_pairs


# ---------------------------------------------------------------------------
# index sets

@lru_cache(maxsize=None)
def pair_index(d):
    """Lexicographic pairs ``(i, j)``, ``1 <= i < j <= d+1`` -> 1-based position."""
    n = d + 1
    pairs = [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)]
    return {p: k + 1 for k, p in enumerate(pairs)}


@lru_cache(maxsize=None)
def triple_index(d):
    """Lexicographic triples ``i <= j <= k <= d+1`` with ``j <= d`` -> 1-based position."""
    n = d + 1
    triples = [(i, j, k) for i in range(1, n + 1) for j in range(i, n + 1)
               for k in range(j, n + 1) if j <= d]
    assert len(triples) == d * (d + 1) * (d + 5) // 6
    return {t: k + 1 for k, t in enumerate(triples)}


def n_pairs(d):
    return d * (d + 1) // 2


def n_triples(d):
    return d * (d + 1) * (d + 5) // 6


class _Tables:
    """1-based accessors shared by the builders."""

    def __init__(self, p: FullParams):
        self.d = p.d
        self.n = p.d + 1
        self._x = p.x
        self._y = p.y
        self.r2 = p.r ** 2
        self._pairs = pair_index(p.d)
        self._triples = triple_index(p.d)

    def x(self, i, j):
        return self._x[i - 1, j - 1]

    def y(self, i):
        return self._y[i - 1]

    def F1(self, k):
        return k + 1

    def F2(self, k):
        return k + self.d + 2

    def pair(self, a, b):
        return self._pairs[(a, b) if a < b else (b, a)]

    def triple(self, a, b, c):
        return self._triples[tuple(sorted((a, b, c)))]

    @staticmethod
    def put(m, row, col, value):
        if 1 <= row <= m.shape[0] and 1 <= col <= m.shape[1]:
            m[row - 1, col - 1] += value


# ---------------------------------------------------------------------------
# builders

def build_p2_q2(p: FullParams):
    """Matrices with ``P2 F2 + Q2 F = 0`` (F2 = mixed second derivatives)."""
    T = _Tables(p)
    d, n, put, x, y = T.d, T.n, T.put, T.x, T.y
    P2 = np.zeros((n_pairs(d), n_pairs(d)))
    Q2 = np.zeros((n_pairs(d), 2 * d + 2))
    for (i, j), row in T._pairs.items():
        for (k, l), col in T._pairs.items():
            if i == k and j == l:
                put(P2, row, col, 2 * (x(j, j) - x(i, i)))
            elif i == k:
                put(P2, row, col, x(j, l))
            elif i == l:
                put(P2, row, col, x(j, k))
            elif j == l:
                put(P2, row, col, -x(i, k))
            elif j == k:
                put(P2, row, col, -x(i, l))
        put(Q2, row, T.F1(i), y(j))
        put(Q2, row, T.F1(j), -y(i))
        put(Q2, row, T.F2(i), x(i, j))
        if j <= d:
            put(Q2, row, T.F2(j), -x(i, j))
        else:
            put(Q2, row, 1, -T.r2 * x(i, n))
            for l in range(1, d + 1):
                put(Q2, row, T.F2(l), x(i, n))
    return P2, Q2


def build_p3_q3_r3(p: FullParams):
    """Matrices with ``P3 F3 + Q3 F2 + R3 F = 0`` (F3 = third derivatives)."""
    T = _Tables(p)
    d, n, put, x, y, r2 = T.d, T.n, T.put, T.x, T.y, T.r2
    m = n_triples(d)
    P3 = np.zeros((m, m))
    Q3 = np.zeros((m, n_pairs(d)))
    R3 = np.zeros((m, 2 * d + 2))
    tri = T.triple
    for (i, j, k), row in T._triples.items():
        if j < k:
            dk = 1 if k == n else 0
            put(P3, row, tri(i, j, j), (dk + 1) * x(j, k))
            put(P3, row, tri(i, j, k), 2 * (x(k, k) - x(j, j)))
            if not dk:
                put(P3, row, tri(i, k, k), -x(j, k))
            for l in range(1, n + 1):
                if l in (j, k):
                    continue
                put(P3, row, tri(i, j, l), x(k, l))
                put(P3, row, tri(i, k, l), -x(j, l))
                if dk:
                    put(P3, row, tri(i, l, l), x(j, k))
            if i != j:
                put(Q3, row, T.pair(i, j), y(k))
            put(Q3, row, T.pair(i, k), -y(j))
            if dk:
                put(R3, row, T.F1(i), -x(j, k) * r2)
            if i == j:
                put(R3, row, T.F1(k), -1.0)
                put(R3, row, T.F2(i), y(k))
        elif i < j:
            # i < j = k <= d
            put(P3, row, tri(i, i, j), x(i, j))
            put(P3, row, tri(i, j, j), 2 * (x(j, j) - x(i, i)))
            put(P3, row, tri(j, j, j), -x(i, j))
            for l in range(1, n + 1):
                if l in (i, j):
                    continue
                put(P3, row, tri(i, j, l), x(j, l))
                put(P3, row, tri(j, j, l), -x(i, l))
            put(Q3, row, T.pair(i, j), y(j))
            put(R3, row, T.F2(j), -y(i))
            put(R3, row, T.F1(i), 1.0)
        else:
            # i = j = k <= d
            for s in range(1, d + 1):
                put(P3, row, tri(i, s, n), x(s, n))
                put(P3, row, tri(i, s, s), -2 * (x(n, n) - x(i, i)))
                for l in range(1, n + 1):
                    if l != i:
                        put(P3, row, tri(l, s, s), x(i, l))
            put(Q3, row, T.pair(i, n), y(n))
            put(R3, row, 1, -y(i) * r2)
            put(R3, row, T.F1(i), 2 * (x(n, n) - x(i, i)) * r2 + 1)
            for l in range(1, n + 1):
                if l != i:
                    put(R3, row, T.F1(l), -x(i, l) * r2)
            for l in range(1, d + 1):
                put(R3, row, T.F2(l), y(i))
    return P3, Q3, R3


def build_abce(p: FullParams, direction: int):
    """Matrices with ``A d_i F = B F + C F2 + E F3`` for ``i = direction`` (0-based)."""
    T = _Tables(p)
    d, n, put, x, y, r2 = T.d, T.n, T.put, T.x, T.y, T.r2
    i = direction + 1
    if not 1 <= i <= n:
        raise ValueError(f"direction must be in 0..{d}")
    size = 2 * d + 2
    A = np.zeros((size, size))
    B = np.zeros((size, size))
    C = np.zeros((size, n_pairs(d)))
    E = np.zeros((size, n_triples(d)))
    F1, F2, pair, tri = T.F1, T.F2, T.pair, T.triple

    put(A, 1, 1, 1.0)
    put(B, 1, F1(i), 1.0)

    # rows j+1: the operator C_ij solved for d_i d_j
    for j in range(1, d + 1):
        if j == i:
            continue
        row = j + 1
        put(A, row, F1(i), x(i, j))
        put(A, row, F1(j), 2 * (x(j, j) - x(i, i)))
        for k in range(1, n + 1):
            if k not in (i, j):
                put(A, row, F1(k), x(k, j))
        put(B, row, F1(j), y(i))
        put(B, row, F1(i), -y(j))
        put(B, row, F2(j), x(i, j))
        for k in range(1, n + 1):
            if k not in (i, j):
                put(C, row, pair(j, k), x(i, k))

    if i <= d:
        # row i+1: d_i d_i is itself in F
        put(A, i + 1, F1(i), 1.0)
        put(B, i + 1, F2(i), 1.0)
        # row d+2: C_{i,d+1} with d_{d+1}^2 eliminated by the sphere relation
        row = d + 2
        put(A, row, F1(i), x(i, n))
        put(A, row, F1(n), 2 * (x(n, n) - x(i, i)))
        for k in range(1, d + 1):
            if k != i:
                put(A, row, F1(k), x(k, n))
        put(B, row, 1, x(i, n) * r2)
        put(B, row, F1(n), y(i))
        put(B, row, F1(i), -y(n))
        for l in range(1, d + 1):
            put(B, row, F2(l), -x(i, n))
        for k in range(1, d + 1):
            if k != i:
                put(C, row, pair(k, n), x(i, k))
    else:
        # row d+2 for i = d+1: d_{d+1}^2 = r^2 - sum_k d_k^2
        put(A, d + 2, F1(n), 1.0)
        put(B, d + 2, 1, r2)
        for k in range(1, d + 1):
            put(B, d + 2, F2(k), -1.0)

    # rows j+d+2: d_j C_ij solved for d_i d_j^2
    for j in range(1, d + 1):
        if j == i:
            continue
        row = j + d + 2
        if i <= d:
            put(A, row, F2(j), -2 * (x(j, j) - x(i, i)))
            put(B, row, F1(i), 1.0)
            put(B, row, F2(j), -y(i))
            put(C, row, pair(i, j), y(j))
            put(E, row, tri(i, i, j), x(i, j))
            put(E, row, tri(j, j, j), -x(i, j))
            for k in range(1, n + 1):
                if k not in (i, j):
                    put(E, row, tri(i, j, k), x(k, j))
                    put(E, row, tri(j, j, k), -x(i, k))
        else:
            put(A, row, F2(j), -2 * (x(j, j) - x(n, n)))
            put(B, row, F1(j), x(n, j) * r2)
            put(B, row, F1(n), 1.0)
            put(B, row, F2(j), -y(n))
            put(C, row, pair(j, n), y(j))
            put(E, row, tri(j, j, j), -2 * x(i, j))
            for k in range(1, d + 1):
                if k != j:
                    put(E, row, tri(i, j, k), x(k, j))
                    put(E, row, tri(j, j, k), -x(i, k))
                    put(E, row, tri(j, k, k), -x(i, j))

    if i <= d:
        put(A, i + d + 2, F2(i), 1.0)
        put(E, i + d + 2, tri(i, i, i), 1.0)
    return A, B, C, E


# ---------------------------------------------------------------------------
# affine decomposition and per-point evaluation

class PfaffianSystem:
    """All factor matrices of one ``(d, r)`` as affine functions of ``(x, y)``.

    For fixed ``r`` every table entry is affine in the coefficients of ``x`` and
    ``y``, so each family is stored as a stack ``S`` of shape ``(K, rows, cols)``
    with ``M(x, y) = sum_k c_k S[k]`` and ``c = (1, upper(x), y)``.  The slice
    belonging to ``y_j`` is exactly ``dM/dy_j``.
    """

    def __init__(self, d, r=1.0):
        self.d = d
        self.r = float(r)
        n = d + 1
        self.kx = n * (n + 1) // 2
        basis = [FullParams(np.zeros((n, n)), np.zeros(n), r)]
        for (a, b) in upper_pairs(n):
            x = np.zeros((n, n))
            x[a, b] = x[b, a] = 1.0
            basis.append(FullParams(x, np.zeros(n), r))
        for a in range(n):
            basis.append(FullParams(np.zeros((n, n)), np.eye(n)[a], r))

        def stack(builds):
            s = np.array(builds)
            s[1:] -= s[0]
            return s

        p2q2 = [build_p2_q2(b) for b in basis]
        p3 = [build_p3_q3_r3(b) for b in basis]
        self.P2, self.Q2 = (stack([m[k] for m in p2q2]) for k in range(2))
        self.P3, self.Q3, self.R3 = (stack([m[k] for m in p3]) for k in range(3))
        self.abce = []
        for i in range(n):
            mats = [build_abce(b, i) for b in basis]
            self.abce.append(tuple(stack([m[k] for m in mats]) for k in range(4)))

    def coefficients(self, p: FullParams):
        if p.d != self.d or p.r != self.r:
            raise ValueError("parameter point does not match this system's (d, r)")
        return np.concatenate([[1.0], p.upper, p.y])

    def y_slot(self, j):
        return 1 + self.kx + j


@lru_cache(maxsize=32)
def pfaffian_system(d, r=1.0):
    return PfaffianSystem(d, r)


class PfaffianPoint:
    """Pfaffian matrices at one parameter point, with factorisations reused.

    ``H(i)`` gives ``d_i F = H_i F``, ``dH(i, j)`` its derivative in ``y_j``,
    ``Hx(i, j)`` the matrix for ``d/dx_ij`` and ``Hr()`` the one for ``d/dr``.
    No inverse is formed explicitly; everything goes through LU solves.
    """

    def __init__(self, p: FullParams, system: PfaffianSystem | None = None):
        self.p = p
        self.system = system or pfaffian_system(p.d, p.r)
        c = self.system.coefficients(p)
        self._c = c
        ev = lambda s: np.tensordot(c, s, axes=1)  # noqa: E731
        s = self.system
        self.P2, self.Q2 = ev(s.P2), ev(s.Q2)
        self.P3, self.Q3, self.R3 = ev(s.P3), ev(s.Q3), ev(s.R3)
        self._f2 = Factor(self.P2, "P2")
        self._f3 = Factor(self.P3, "P3")
        self.W = self._f2.solve(self.Q2)                   # F2 = -W F
        self.K = self._f3.solve(self.Q3 @ self.W - self.R3)  # F3 = K F
        self._abce = {}
        self._A = {}
        self._H = {}
        self._dW = {}
        self._dK = {}
        self._dH = {}

    @property
    def size(self):
        return 2 * self.p.d + 2

    def _mats(self, i):
        if i not in self._abce:
            self._abce[i] = tuple(np.tensordot(self._c, s, axes=1) for s in self.system.abce[i])
            self._A[i] = Factor(self._abce[i][0], f"A[{i}]")
        return self._abce[i]

    def H(self, i):
        if i not in self._H:
            A, B, C, E = self._mats(i)
            self._H[i] = self._A[i].solve(B - C @ self.W + E @ self.K)
        return self._H[i]

    def _dWK(self, j):
        if j not in self._dW:
            k = self.system.y_slot(j)
            s = self.system
            dW = self._f2.solve(s.Q2[k])
            self._dW[j] = dW
            self._dK[j] = self._f3.solve(s.Q3[k] @ self.W + self.Q3 @ dW - s.R3[k])
        return self._dW[j], self._dK[j]

    def dH(self, i, j):
        """Derivative of ``H_i`` with respect to ``y_j``."""
        if (i, j) not in self._dH:
            A, B, C, E = self._mats(i)
            k = self.system.y_slot(j)
            _, dB, dC, _ = (s[k] for s in self.system.abce[i])
            dW, dK = self._dWK(j)
            self._dH[i, j] = self._A[i].solve(dB - dC @ self.W - C @ dW + E @ dK)
        return self._dH[i, j]

    def Hx(self, i, j):
        """Matrix for ``d/dx_ij``, i.e. for ``d_i d_j``."""
        return self.dH(i, j) + self.H(i) @ self.H(j)

    def Hr(self):
        p = self.p
        n = p.d + 1
        m = np.zeros((self.size, self.size))
        for (i, j) in upper_pairs(n):
            if p.x[i, j] != 0.0:
                m += 2.0 * p.x[i, j] * self.Hx(i, j)
        for i in range(n):
            if p.y[i] != 0.0:
                m += p.y[i] * self.H(i)
        # y-derivatives of order |alpha| pick up |alpha| from the Euler operator
        order = np.r_[0.0, np.ones(n), 2.0 * np.ones(p.d)]
        m += np.diag(p.d + order)
        return m / p.r

    def generator(self, dx_upper, dy):
        """``sum_i dy_i H_i + sum_{i<=j} dx_ij H_ij`` for a parameter direction."""
        n = self.p.d + 1
        m = np.zeros((self.size, self.size))
        for i in range(n):
            if dy[i] != 0.0:
                m += dy[i] * self.H(i)
        for k, (i, j) in enumerate(upper_pairs(n)):
            if dx_upper[k] != 0.0:
                m += dx_upper[k] * self.Hx(i, j)
        return m

    def mixed_second(self, f):
        """``d_i d_j Z`` for ``i < j`` (lexicographic) from the state vector."""
        return -self.W @ np.asarray(f)

    def third(self, f):
        return self.K @ np.asarray(f)


def _entries(f):
    return f.entries if isinstance(f, StateVector) else np.asarray(f, dtype=float)


def h_matrix(p: FullParams, direction: int):
    return PfaffianPoint(p).H(direction)


def h_matrix_dy(p: FullParams, i: int, j: int):
    return PfaffianPoint(p).dH(i, j)


def h_matrix_x(p: FullParams, i: int, j: int):
    if i > j:
        raise ValueError("h_matrix_x expects i <= j")
    return PfaffianPoint(p).Hx(i, j)


def h_matrix_r(p: FullParams):
    return PfaffianPoint(p).Hr()


def mixed_second(p: FullParams, f):
    return PfaffianPoint(p).mixed_second(_entries(f))


__all__ = [
    "pair_index", "triple_index", "n_pairs", "n_triples",
    "build_p2_q2", "build_p3_q3_r3", "build_abce",
    "PfaffianSystem", "pfaffian_system", "PfaffianPoint",
    "h_matrix", "h_matrix_dy", "h_matrix_x", "h_matrix_r", "mixed_second",
    "SingularFactor",
]
