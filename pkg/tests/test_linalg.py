import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import rand_spd, rand_sym
from spdmetric._errors import FormatError, NumericalError, RangeError, ShapeError
from spdmetric.linalg import (
    as_spd,
    as_sym,
    cholesky,
    is_spd,
    lie_product,
    logdet,
    order_from_dim,
    parse_matrix,
    read_matrix,
    spd_log,
    spd_power,
    sym_eig,
    sym_exp,
    unvec,
    vec,
    vec_dim,
    write_matrix,
)


def test_eig_identity():
    e = sym_eig(np.eye(2))
    np.testing.assert_array_equal(e.eigenvalues, [1.0, 1.0])
    np.testing.assert_allclose(e.eigenvectors.T @ e.eigenvectors, np.eye(2), atol=1e-15)
    np.testing.assert_array_equal(e.reconstruct(), np.eye(2))


def test_eig_diagonal_ascending():
    e = sym_eig(np.diag([3.0, 1.0]))
    np.testing.assert_array_equal(e.eigenvalues, [1.0, 3.0])
    np.testing.assert_allclose(np.abs(e.eigenvectors), [[0, 1], [1, 0]], atol=1e-15)


def test_eig_reconstruction_random(rng):
    for _ in range(20):
        S = rand_sym(rng, 5)
        e = sym_eig(S)
        assert np.linalg.norm(e.reconstruct() - S) / np.linalg.norm(S) < 1e-10
        assert np.linalg.norm(e.eigenvectors.T @ e.eigenvectors - np.eye(5)) < 1e-10
        assert np.all(np.diff(e.eigenvalues) >= 0)


def test_symmetrize_and_finite():
    A = np.array([[1.0, 2.0], [0.0, 1.0]])
    np.testing.assert_array_equal(as_sym(A), [[1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(NumericalError):
        as_sym([[1.0, np.nan], [np.nan, 1.0]])
    with pytest.raises(ShapeError):
        as_sym(np.ones((2, 3)))


def test_spd_admission():
    assert is_spd(np.eye(3))
    assert not is_spd(np.diag([1.0, 0.0]))
    assert not is_spd(np.diag([1.0, -1.0]))
    # relative tolerance: tiny eigenvalue next to a huge one is rejected
    assert not is_spd(np.diag([1e12, 1e-3]))
    assert is_spd(np.diag([1e12, 1e3]))
    with pytest.raises(NumericalError):
        as_spd(np.diag([1.0, -1.0]))


def test_log_exp_round_trip(rng):
    for _ in range(20):
        P = rand_spd(rng, 4)
        np.testing.assert_allclose(sym_exp(spd_log(P)), P, rtol=1e-9, atol=1e-9 * np.abs(P).max())
        S = rand_sym(rng, 4)
        np.testing.assert_allclose(spd_log(sym_exp(S)), S, atol=1e-9)


def test_log_exp_diagonal():
    np.testing.assert_allclose(spd_log(np.diag([math.e, 1.0])), np.diag([1.0, 0.0]), atol=1e-15)
    np.testing.assert_allclose(sym_exp(np.zeros((3, 3))), np.eye(3))


def test_exp_overflow():
    with pytest.raises(RangeError):
        sym_exp(np.diag([1000.0, 0.0]))


def test_spd_power(rng):
    P = rand_spd(rng, 4)
    R = spd_power(P, 0.5)
    np.testing.assert_allclose(R @ R, P, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(spd_power(P, -1.0) @ P, np.eye(4), atol=1e-10)


def test_cholesky_example():
    L = cholesky(np.array([[4.0, 2.0], [2.0, 5.0]]))
    np.testing.assert_allclose(L, [[2.0, 0.0], [1.0, 2.0]], atol=1e-15)


def test_cholesky_random(rng):
    for n in (2, 5, 9):
        P = rand_spd(rng, n)
        L = cholesky(P)
        assert np.linalg.norm(L @ L.T - P) / np.linalg.norm(P) < 1e-10
        assert np.all(np.diag(L) > 0)
        np.testing.assert_array_equal(np.triu(L, 1), 0.0)
    with pytest.raises(NumericalError):
        cholesky(np.diag([1.0, -1.0]))


def test_logdet(rng):
    P = rand_spd(rng, 5)
    assert logdet(P) == pytest.approx(math.log(np.linalg.det(P)), rel=1e-10)


def test_vec_examples():
    np.testing.assert_array_equal(unvec([1.0, 0.0, 1.0]), np.eye(2))
    a, b, c = 1.5, -0.25, 3.0
    np.testing.assert_allclose(unvec([a, math.sqrt(2) * b, c]), [[a, b], [b, c]], rtol=1e-15)
    np.testing.assert_allclose(vec([[a, b], [b, c]]), [a, math.sqrt(2) * b, c], rtol=1e-15)
    # row-major upper triangle
    S = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 5.0], [3.0, 5.0, 6.0]])
    r2 = math.sqrt(2)
    np.testing.assert_allclose(vec(S), [1, 2 * r2, 3 * r2, 4, 5 * r2, 6], rtol=1e-15)


def test_vec_dims():
    assert [vec_dim(n) for n in (1, 2, 3, 9)] == [1, 3, 6, 45]
    assert [order_from_dim(d) for d in (1, 3, 6, 45)] == [1, 2, 3, 9]
    with pytest.raises(ShapeError):
        order_from_dim(4)
    with pytest.raises(ShapeError):
        unvec(np.zeros(3), n=3)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 9), seed=st.integers(0, 2**32 - 1))
def test_vec_round_trip_and_norm(n, seed):
    S = rand_sym(np.random.default_rng(seed), n, scale=10.0)
    back = unvec(vec(S))
    assert np.max(np.abs(back - S)) <= 1e-14 * np.max(np.abs(S))
    assert abs(np.linalg.norm(vec(S)) - np.linalg.norm(S)) <= 1e-12 * np.linalg.norm(S)


def test_lie_group_laws(rng):
    for _ in range(20):
        A, B, C = (rand_spd(rng, 3) for _ in range(3))
        np.testing.assert_allclose(lie_product(A, B), lie_product(B, A), rtol=1e-9, atol=1e-9)
        left = lie_product(lie_product(A, B), C)
        right = lie_product(A, lie_product(B, C))
        assert np.linalg.norm(left - right) <= 1e-8 * np.linalg.norm(left)
        np.testing.assert_allclose(lie_product(A, np.eye(3)), A, rtol=1e-10, atol=1e-12)


def test_lie_product_commuting_case():
    np.testing.assert_allclose(lie_product(np.diag([2.0, 3.0]), np.diag([5.0, 7.0])),
                               np.diag([10.0, 21.0]), rtol=1e-13)


def test_matrix_text_round_trip(rng):
    P = rand_spd(rng, 4)
    buf = io.StringIO()
    write_matrix(P, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "4" and len(lines) == 5
    np.testing.assert_array_equal(read_matrix(io.StringIO(buf.getvalue())), P)


def test_matrix_text_errors():
    with pytest.raises(FormatError):
        parse_matrix("2\n1 0\n")
    with pytest.raises(FormatError):
        parse_matrix("2\n1 0 0\n0 1\n")
    with pytest.raises(FormatError):
        parse_matrix("x\n")
    with pytest.raises(FormatError):
        parse_matrix("2\n1 a\n0 1\n")
    np.testing.assert_array_equal(parse_matrix("2\n1 1e-3\n1e-3 2\n"), [[1, 1e-3], [1e-3, 2]])
