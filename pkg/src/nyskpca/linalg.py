"""Dense symmetric linear algebra used by every estimator.

All routines work on small-to-moderate dense matrices (n up to a few
thousand) and use a full eigendecomposition. Spectral thresholds are
relative to the largest eigenvalue.
"""

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import DimensionError, InputError, NotPSDError

DEFAULT_RTOL = 1e-10
_SYM_TOL = 1e-8
_NEG_TOL = 1e-6


@dataclass(frozen=True)
class SymEigen:
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    ``eigenvectors[:, i]`` pairs with ``eigenvalues[i]``.
    """

    eigenvalues: NDArray
    eigenvectors: NDArray

    def reconstruct(self) -> NDArray:
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.T


def centering_matrix(n: int) -> NDArray:
    """Return ``C_n = I - 11^T / n``. Callers form ``H_n`` as ``n * C_n``."""
    if int(n) != n or n < 1:
        raise InputError(f"centering_matrix needs a positive integer, got {n!r}")
    n = int(n)
    return np.eye(n) - np.full((n, n), 1.0 / n)


def _check_square(A) -> NDArray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InputError("matrix has non-finite entries")
    return A


def symmetrize(A: NDArray) -> NDArray:
    A = _check_square(A)
    scale = np.max(np.abs(A)) if A.size else 0.0
    if scale > 0 and np.max(np.abs(A - A.T)) > _SYM_TOL * scale:
        raise InputError("matrix is not symmetric to within 1e-8 relative")
    return 0.5 * (A + A.T)


def _canonical_signs(V: NDArray) -> NDArray:
    # first coordinate that is clearly nonzero is made positive
    V = V.copy()
    for j in range(V.shape[1]):
        col = V[:, j]
        big = np.flatnonzero(np.abs(col) > 1e-12 * max(np.max(np.abs(col)), 1e-300))
        if big.size and col[big[0]] < 0:
            V[:, j] = -col
    return V


def sym_eig(A) -> SymEigen:
    """Full eigendecomposition of a symmetric matrix with descending eigenvalues.

    The input is symmetrized as ``(A + A.T) / 2``. Each eigenvector is signed so
    that its first clearly nonzero coordinate is positive.
    """
    A = symmetrize(A)
    w, V = np.linalg.eigh(A)
    order = np.argsort(w, kind="stable")[::-1]
    return SymEigen(w[order], _canonical_signs(V[:, order]))


def _retained(A, rtol: float):
    if not 0.0 < rtol < 1.0:
        raise InputError(f"rtol must lie in (0, 1), got {rtol}")
    eig = sym_eig(A)
    w, V = eig.eigenvalues, eig.eigenvectors
    if w.size == 0:
        return w, V
    wmax = w[0]
    if wmax <= 0:
        # no positive scale to be relative to; only roundoff-sized negatives pass
        if w[-1] < -1e-12:
            raise NotPSDError(f"matrix is not PSD (smallest eigenvalue {w[-1]:.3e})")
        return w[:0], V[:, :0]
    if w[-1] < -_NEG_TOL * wmax:
        raise NotPSDError(
            f"matrix is not PSD: eigenvalue {w[-1]:.3e} vs largest {wmax:.3e}"
        )
    keep = w > rtol * wmax
    return w[keep], V[:, keep]


def psd_rank(A, rtol: float = DEFAULT_RTOL) -> int:
    """Number of eigenvalues above ``rtol * lambda_max``."""
    return _retained(A, rtol)[0].size


def pinv_psd(A, rtol: float = DEFAULT_RTOL) -> NDArray:
    """Moore-Penrose inverse of a PSD matrix with relative spectral threshold.

    Examples
    --------
    >>> pinv_psd(np.diag([2.0, 0.0]))
    array([[0.5, 0. ],
           [0. , 0. ]])
    """
    w, V = _retained(A, rtol)
    return (V / w) @ V.T


def inv_sqrt_psd(A, rtol: float = DEFAULT_RTOL) -> NDArray:
    """Pseudo-inverse square root: ``V diag(w^-1/2) V^T`` on the retained eigenspace."""
    w, V = _retained(A, rtol)
    return (V / np.sqrt(w)) @ V.T


def sqrt_psd(A, rtol: float = DEFAULT_RTOL) -> NDArray:
    """Square root restricted to the same retained eigenspace as :func:`inv_sqrt_psd`."""
    w, V = _retained(A, rtol)
    return (V * np.sqrt(w)) @ V.T


def range_basis(A, rtol: float = DEFAULT_RTOL) -> NDArray:
    """Orthonormal basis of the numerical column space of a (not necessarily square) matrix."""
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return np.zeros((A.shape[0], 0))
    U, s, _ = np.linalg.svd(A, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return U[:, :0]
    return U[:, s > rtol * s[0]]
