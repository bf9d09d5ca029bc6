import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from fbhgm.errors import ValidationError
from fbhgm.model import (Dataset, DiagParams, FullParams, OrthogonalFrame, StateVector,
                         diagonalize, jacobi_eigh, matrix_to_upper, sufficient_stats,
                         upper_index, upper_pairs, upper_to_matrix, validate_on_sphere)
from fbhgm.oracle import uniform_sphere
from conftest import random_sym


def test_upper_helpers_roundtrip(rng):
    x = random_sym(rng, 4)
    u = matrix_to_upper(x)
    assert len(u) == 10
    assert np.array_equal(upper_to_matrix(u, 4), x)
    for k, (i, j) in enumerate(upper_pairs(4)):
        assert upper_index(i, j, 4) == k
        assert upper_index(j, i, 4) == k


def test_full_params_validation():
    with pytest.raises(ValidationError):
        FullParams(np.zeros((2, 2)), np.zeros(3))
    with pytest.raises(ValidationError):
        FullParams(np.array([[0, 1], [0, 0.0]]), np.zeros(2))
    with pytest.raises(ValidationError):
        FullParams(np.zeros((2, 2)), np.zeros(2), r=0.0)
    with pytest.raises(ValidationError):
        FullParams(np.full((2, 2), np.nan), np.zeros(2))
    with pytest.raises(ValidationError):
        FullParams(np.zeros((12, 12)), np.zeros(12))
    p = FullParams(np.eye(3), [1, 2, 3])
    assert p.d == 2
    with pytest.raises(ValueError):
        p.x[0, 0] = 5.0


def test_vector_roundtrip(rng):
    p = FullParams(random_sym(rng, 3), rng.normal(size=3), 1.0)
    q = FullParams.from_vector(p.vector, 2)
    assert np.array_equal(q.x, p.x) and np.array_equal(q.y, p.y)


def test_exponent_counts_off_diagonal_once():
    x = np.array([[1.0, 3.0], [3.0, 2.0]])
    p = FullParams(x, [0.5, -1.0])
    t = np.array([0.6, 0.8])
    want = 1.0 * 0.36 + 3.0 * 0.6 * 0.8 + 2.0 * 0.64 + 0.5 * 0.6 - 0.8
    assert p.exponent(t) == pytest.approx(want, rel=1e-15)


def test_diagonalize_swap_example():
    # exponent 2 t1 t2 = t^T [[0,1],[1,0]] t
    p = FullParams([[0.0, 2.0], [2.0, 0.0]], [0.0, 0.0])
    dp, frame = diagonalize(p)
    assert np.allclose(dp.xd, [-1.0, 1.0], atol=1e-14)


def test_diagonalize_diagonal_input_is_identity():
    p = FullParams(np.diag([0.1, 0.5, 2.0]), [1.0, 2.0, 3.0])
    dp, frame = diagonalize(p)
    assert np.allclose(frame.P, np.eye(3))
    assert np.allclose(dp.yd, p.y)


@given(arrays(np.float64, (4, 4), elements=st.floats(-5, 5)))
def test_jacobi_matches_lapack(a):
    a = (a + a.T) / 2
    w, v = jacobi_eigh(a)
    assert np.allclose(w, np.linalg.eigvalsh(a), atol=1e-12 * max(1, np.abs(a).max()))
    assert np.allclose(v @ np.diag(w) @ v.T, a, atol=1e-11 * max(1, np.abs(a).max()))
    assert np.allclose(v.T @ v, np.eye(4), atol=1e-12)
    assert np.all(np.diff(w) >= 0)


def test_diagonalize_reconstructs_exponent(rng):
    for _ in range(20):
        p = FullParams(random_sym(rng, 4, 2.0), rng.normal(size=4))
        dp, frame = diagonalize(p)
        t = uniform_sphere(3, 50, rng)
        s = t @ frame.P
        assert np.allclose(p.exponent(t), s ** 2 @ dp.xd + s @ dp.yd, atol=1e-12)


def test_diagonalize_aligns_y_in_clusters():
    p = FullParams(np.diag([2.0, 2.0, 0.5]), [0.3, 0.4, 1.0])
    dp, frame = diagonalize(p)
    top = np.flatnonzero(np.isclose(dp.xd, 2.0))
    assert np.sum(np.abs(dp.yd[top]) > 1e-14) == 1
    assert np.isclose(np.linalg.norm(dp.yd[top]), 0.5)


def test_sufficient_stats_uniform_trace(rng):
    pts = uniform_sphere(2, 100, np.random.default_rng(5))
    s = sufficient_stats(Dataset(pts))
    assert np.trace(s.S2) == pytest.approx(100, abs=1e-8)
    assert np.allclose(s.S1, pts.sum(axis=0))


def test_sufficient_stats_rejects_off_sphere():
    with pytest.raises(ValidationError, match=r"\[1\]"):
        sufficient_stats(Dataset([[1.0, 0.0], [0.5, 0.5]]))
    assert validate_on_sphere(np.array([[1.0, 0.0], [0.6, 0.8], [2.0, 0.0]])) == [2]


def test_state_vector_accessors():
    f = StateVector(2, [10.0, 1, 2, 3, 4, 5])
    assert f.value == 10.0
    assert np.array_equal(f.first, [1, 2, 3])
    assert np.array_equal(f.second, [4, 5])
    assert np.array_equal(f.all_second(1.0), [4, 5, 1])
    with pytest.raises(ValidationError):
        StateVector(2, [1.0, 2.0])


def test_frame_must_be_orthogonal():
    with pytest.raises(ValidationError):
        OrthogonalFrame(np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_diag_params_L():
    p = DiagParams([1.0, -2.0], [0.5, 1.0], r=2.0)
    assert p.L == pytest.approx(4 * (3 + 1.25))
