"""Closed-form d = 1 Pfaffian factor matrices, used as reference values.

For ``d = 1`` every table is small enough to write out by hand.  Indices in
the names follow the 1-based coordinates ``t_1, t_2``.
"""
import numpy as np

from .model import FullParams


def _unpack(p: FullParams):
    if p.d != 1:
        raise ValueError("the reference matrices are for d = 1")
    x = p.x
    return x[0, 0], x[0, 1], x[1, 1], p.y[0], p.y[1], p.r ** 2


def abce_y1(p):
    x11, x12, x22, y1, y2, r2 = _unpack(p)
    A = np.array([[1, 0, 0, 0],
                  [0, 1, 0, 0],
                  [0, x12, -2 * x11 + 2 * x22, 0],
                  [0, 0, 0, 1]], dtype=float)
    B = np.array([[0, 1, 0, 0],
                  [0, 0, 0, 1],
                  [r2 * x12, -y2, y1, -x12],
                  [0, 0, 0, 0]], dtype=float)
    C = np.zeros((4, 1))
    E = np.array([[0, 0], [0, 0], [0, 0], [1, 0]], dtype=float)
    return A, B, C, E


def abce_y2(p):
    x11, x12, x22, y1, y2, r2 = _unpack(p)
    A = np.array([[1, 0, 0, 0],
                  [0, 2 * x11 - 2 * x22, x12, 0],
                  [0, 0, 1, 0],
                  [0, 0, 0, -2 * x11 + 2 * x22]], dtype=float)
    B = np.array([[0, 0, 1, 0],
                  [0, y2, -y1, x12],
                  [r2, 0, 0, -1],
                  [0, r2 * x12, 1, -y2]], dtype=float)
    C = np.array([[0], [0], [0], [y1]], dtype=float)
    E = np.array([[0, 0], [0, 0], [0, 0], [-2 * x12, 0]], dtype=float)
    return A, B, C, E


def p2_q2(p):
    x11, x12, x22, y1, y2, r2 = _unpack(p)
    return (np.array([[-2 * x11 + 2 * x22]]),
            np.array([[-r2 * x12, y2, -y1, 2 * x12]]))


def p3_q3_r3(p):
    x11, x12, x22, y1, y2, r2 = _unpack(p)
    P3 = np.array([[2 * x11 - 2 * x22, 2 * x12],
                   [2 * x12, -2 * x11 + 2 * x22]])
    Q3 = np.array([[y2], [-y1]])
    R3 = np.array([[-r2 * y1, -2 * r2 * x11 + 2 * x22 * r2 + 1, -r2 * x12, y1],
                   [0, -r2 * x12, -1, y2]])
    return P3, Q3, R3


def p_r(xd, yd, r):
    """The r-direction matrix of the diagonal system for d = 1."""
    x1, x2 = xd
    y1, y2 = yd
    r2 = r * r
    return np.array([[2 * r2 * x1 + 1, 0, y1, y1],
                     [0, 2 * r2 * x2 + 1, y2, y2],
                     [r2 * y1, 0, 2 * r2 * x1 + 2, 1],
                     [0, r2 * y2, 1, 2 * r2 * x2 + 2]]) / r
