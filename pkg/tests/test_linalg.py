import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from nyskpca.errors import DimensionError, InputError, NotPSDError
from nyskpca.linalg import (
    centering_matrix,
    inv_sqrt_psd,
    pinv_psd,
    psd_rank,
    range_basis,
    sqrt_psd,
    sym_eig,
    symmetrize,
)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def psd_from_factor(B):
    return B @ B.T


# centering -------------------------------------------------------------------


def test_centering_n2():
    np.testing.assert_array_equal(centering_matrix(2), [[0.5, -0.5], [-0.5, 0.5]])


def test_centering_n1_is_zero():
    np.testing.assert_array_equal(centering_matrix(1), [[0.0]])


@pytest.mark.parametrize("n", range(2, 51))
def test_centering_projector(n):
    C = centering_matrix(n)
    np.testing.assert_allclose(C @ np.ones(n), 0.0, atol=1e-13)
    np.testing.assert_allclose(C @ C, C, atol=1e-12)
    np.testing.assert_array_equal(C, C.T)
    w = np.linalg.eigvalsh(C)
    assert np.sum(np.abs(w) < 1e-10) == 1


@pytest.mark.parametrize("bad", [0, -3, 2.5])
def test_centering_rejects(bad):
    with pytest.raises(InputError):
        centering_matrix(bad)


# eigendecomposition ------------------------------------------------------------


def test_sym_eig_identity():
    np.testing.assert_array_equal(sym_eig(np.eye(3)).eigenvalues, [1.0, 1.0, 1.0])


def test_sym_eig_diag_order():
    e = sym_eig(np.diag([3.0, 1.0, 2.0]))
    np.testing.assert_allclose(e.eigenvalues, [3.0, 2.0, 1.0])


def test_sym_eig_random_reconstructs(rng):
    A = rng.standard_normal((20, 20))
    A = A + A.T
    e = sym_eig(A)
    assert np.linalg.norm(e.reconstruct() - A) <= 1e-10 * np.linalg.norm(A)
    np.testing.assert_allclose(e.eigenvectors.T @ e.eigenvectors, np.eye(20), atol=1e-10)


def test_sym_eig_sign_convention():
    e = sym_eig(np.array([[2.0, 1.0], [1.0, 2.0]]))
    for j in range(2):
        col = e.eigenvectors[:, j]
        assert col[np.flatnonzero(np.abs(col) > 1e-12)[0]] > 0


def test_sym_eig_errors():
    with pytest.raises(DimensionError):
        sym_eig(np.ones((2, 3)))
    with pytest.raises(InputError):
        sym_eig(np.array([[1.0, np.nan], [np.nan, 1.0]]))
    with pytest.raises(InputError):
        symmetrize(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_symmetrize_absorbs_roundoff():
    A = np.array([[1.0, 2.0], [2.0 + 1e-14, 1.0]])
    S = symmetrize(A)
    np.testing.assert_array_equal(S, S.T)


@settings(max_examples=50, deadline=None)
@given(arrays(float, (6, 6), elements=finite))
def test_sym_eig_property(M):
    A = M + M.T
    e = sym_eig(A)
    assert np.all(np.diff(e.eigenvalues) <= 0)
    scale = max(np.linalg.norm(A), 1e-300)
    assert np.linalg.norm(e.reconstruct() - A) <= 1e-10 * scale + 1e-300
    np.testing.assert_allclose(e.eigenvectors.T @ e.eigenvectors, np.eye(6), atol=1e-10)


# pseudo-inverses ---------------------------------------------------------------


def test_pinv_diag():
    np.testing.assert_array_equal(pinv_psd(np.diag([2.0, 0.0])), [[0.5, 0.0], [0.0, 0.0]])


def test_pinv_zero_matrix():
    np.testing.assert_array_equal(pinv_psd(np.zeros((3, 3))), np.zeros((3, 3)))


def test_pinv_rank3(rng):
    A = psd_from_factor(rng.standard_normal((6, 3)))
    P = pinv_psd(A)
    assert np.linalg.norm(A @ P @ A - A) <= 1e-8 * np.linalg.norm(A)
    assert psd_rank(A) == 3


def test_inv_sqrt_examples():
    np.testing.assert_allclose(inv_sqrt_psd(np.diag([4.0, 1.0])), np.diag([0.5, 1.0]))
    np.testing.assert_allclose(inv_sqrt_psd(np.diag([4.0, 0.0])), np.diag([0.5, 0.0]))


def test_inv_sqrt_projector(rng):
    A = psd_from_factor(rng.standard_normal((8, 8)))
    R = inv_sqrt_psd(A)
    Q = R @ A @ R
    np.testing.assert_allclose(Q @ Q, Q, atol=1e-8)


def test_not_psd():
    with pytest.raises(NotPSDError):
        pinv_psd(np.diag([1.0, -0.1]))
    with pytest.raises(NotPSDError):
        pinv_psd(-np.eye(2))
    # roundoff-sized negatives are tolerated
    pinv_psd(np.diag([1.0, -1e-9]))


@pytest.mark.parametrize("rtol", [0.0, 1.0, -1e-3])
def test_rtol_range(rtol):
    with pytest.raises(InputError):
        pinv_psd(np.eye(2), rtol)


def test_sqrt_and_range_basis(rng):
    B = rng.standard_normal((7, 3))
    A = psd_from_factor(B)
    S = sqrt_psd(A)
    np.testing.assert_allclose(S @ S, A, atol=1e-10 * np.linalg.norm(A))
    Q = range_basis(A)
    assert Q.shape == (7, 3)
    np.testing.assert_allclose(Q @ Q.T @ B, B, atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_penrose_identities(rank, seed):
    B = np.random.default_rng(seed).standard_normal((6, rank))
    A = psd_from_factor(B)
    P = pinv_psd(A)
    assert np.linalg.norm(A @ P @ A - A) <= 1e-8 * np.linalg.norm(A)
    assert np.linalg.norm(P @ A @ P - P) <= 1e-8 * np.linalg.norm(P)
    R = inv_sqrt_psd(A)
    assert np.linalg.norm(R @ R - P) <= 1e-8 * np.linalg.norm(P)
