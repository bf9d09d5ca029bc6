import numpy as np
import pytest

from fbhgm.checks import golden_residual, integrability_residual, random_params
from fbhgm.errors import SingularFactor
from fbhgm.linalg import Factor
from fbhgm.model import FullParams
from fbhgm.pfaffian import (PfaffianPoint, build_abce, build_p2_q2, build_p3_q3_r3, h_matrix,
                            h_matrix_dy, h_matrix_r, h_matrix_x, mixed_second, n_pairs,
                            n_triples, pair_index, triple_index)
from quadrature import QuadMoments


def test_index_tables():
    assert pair_index(2) == {(1, 2): 1, (1, 3): 2, (2, 3): 3}
    assert n_pairs(3) == 6 and len(pair_index(3)) == 6
    assert n_triples(2) == len(triple_index(2)) == 7
    assert all(t[1] <= 2 for t in triple_index(2))
    assert sorted(triple_index(3).values()) == list(range(1, n_triples(3) + 1))


def test_shapes():
    p = random_params(3, np.random.default_rng(0))
    m = 2 * 3 + 2
    P2, Q2 = build_p2_q2(p)
    assert P2.shape == (n_pairs(3), n_pairs(3)) and Q2.shape == (n_pairs(3), m)
    P3, Q3, R3 = build_p3_q3_r3(p)
    assert P3.shape[0] == P3.shape[1] == R3.shape[0] == Q3.shape[0]
    A, B, C, E = build_abce(p, 2)
    assert A.shape == (m, m) and B.shape == (m, m)
    assert C.shape[1] == n_pairs(3) and E.shape[1] == P3.shape[0]


def test_d1_goldens(rng):
    for _ in range(20):
        assert golden_residual(random_params(1, rng)) <= 1e-13


@pytest.mark.parametrize("d", [1, 2, 3, 4])
def test_integrability(d, rng):
    for _ in range(5):
        assert integrability_residual(random_params(d, rng)) <= 1e-8


@pytest.mark.parametrize("d", [1, 2, 3])
def test_h_matrices_against_quadrature(d, rng):
    p = random_params(d, rng)
    q = QuadMoments(p)
    f = q.state()
    pt = PfaffianPoint(p)
    for i in range(d + 1):
        assert np.allclose(pt.H(i) @ f, q.dstate(i), rtol=1e-10, atol=1e-12 * abs(f[0]))
    assert np.allclose(pt.mixed_second(f), q.f2(), rtol=1e-10, atol=1e-12 * abs(f[0]))
    assert np.allclose(pt.third(f), q.f3(), rtol=1e-10, atol=1e-12 * abs(f[0]))
    for i in range(d + 1):
        for j in range(i, d + 1):
            want = np.array([q.moment(i, j)] + [q.moment(k, i, j) for k in range(d + 1)]
                            + [q.moment(k, k, i, j) for k in range(d)])
            assert np.allclose(pt.Hx(i, j) @ f, want, rtol=1e-9, atol=1e-11 * abs(f[0]))


def test_dh_by_finite_differences(rng):
    p = random_params(2, rng)
    h = 1e-4
    for i in range(3):
        for j in range(3):
            e = np.eye(3)[j] * h
            up = h_matrix(FullParams(p.x, p.y + e, p.r), i)
            dn = h_matrix(FullParams(p.x, p.y - e, p.r), i)
            fd = (up - dn) / (2 * h)
            assert np.max(np.abs(h_matrix_dy(p, i, j) - fd)) <= 1e-6 * max(1, np.abs(fd).max())


def test_hr_by_finite_differences(rng):
    p = random_params(2, rng, r=1.3)
    h = 1e-5
    f = lambda r: QuadMoments(FullParams(p.x, p.y, r)).state()  # noqa: E731
    fd = (f(p.r + h) - f(p.r - h)) / (2 * h)
    assert np.allclose(h_matrix_r(p) @ f(p.r), fd, rtol=1e-7)


def test_h_matrix_x_order():
    p = random_params(1, np.random.default_rng(3))
    with pytest.raises(ValueError):
        h_matrix_x(p, 1, 0)


def test_d1_h11_against_series():
    from fbhgm.series import series_state
    from fbhgm.model import DiagParams
    p = FullParams(np.diag([0.3, -0.2]), [0.4, 0.1])
    res = series_state(DiagParams([0.3, -0.2], [0.4, 0.1]), 60)
    f = np.array([res.value, *res.state.first, res.state.second[0]])
    h = 1e-6
    up = series_state(DiagParams([0.3, -0.2], [0.4 + h, 0.1]), 60)
    dn = series_state(DiagParams([0.3, -0.2], [0.4 - h, 0.1]), 60)
    fd = (np.array([up.value, *up.state.first, up.state.second[0]])
          - np.array([dn.value, *dn.state.first, dn.state.second[0]])) / (2 * h)
    assert np.allclose(h_matrix(p, 0) @ f, fd, rtol=1e-7)


def test_singular_factor_on_collision():
    # equal diagonal x makes the d = 1 A-matrix for y_2 singular
    p = FullParams(np.diag([0.5, 0.5]), [0.3, 0.2])
    with pytest.raises(SingularFactor):
        h_matrix(p, 1)


def test_mixed_second_accepts_state_vector():
    from fbhgm.model import StateVector
    p = random_params(2, np.random.default_rng(9))
    f = QuadMoments(p).state()
    assert np.allclose(mixed_second(p, StateVector(2, f)), mixed_second(p, f))


def test_factor():
    a = np.array([[2.0, 1.0], [1.0, 3.0]])
    f = Factor(a, "a")
    assert np.allclose(a @ f.solve([1.0, 2.0]), [1.0, 2.0])
    assert f.cond == pytest.approx(np.linalg.cond(a, 1), rel=0.5)
    with pytest.raises(SingularFactor):
        Factor(np.array([[1.0, 1.0], [1.0, 1.0]]), "s")
