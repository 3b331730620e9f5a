"""Exact population quantities for the spectral kernel under ``P = Uniform[0, 1]``.

In feature coordinates ``x -> (sqrt(lam_a) e_a(x))_a`` the RKHS is ``R^D`` with
the Euclidean inner product. Because the sine basis is orthonormal under ``P``:

* the uncentered operator is ``C = diag(lam)``;
* the mean element has coordinates ``sqrt(lam_a) mu_a`` with ``mu_a = E e_a(X)``;
* the covariance operator is ``S = C - m m^T``, i.e.
  ``S_ab = sqrt(lam_a lam_b) (delta_ab - mu_a mu_b)``.
"""

import warnings
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .errors import InputError, UnsupportedError
from .kernels import KernelSpec, sine_basis, sine_basis_means, spectral_features
from .linalg import sym_eig

DEFAULT_GRID = 10_000


@dataclass(frozen=True)
class OracleSpectrum:
    spec: KernelSpec
    feature_eigenvalues: NDArray
    basis_means: NDArray
    sigma_matrix: NDArray
    sigma_eigs: NDArray
    sigma_vecs: NDArray
    c_eigs: NDArray
    mean_coeffs: NDArray
    mP_sq_norm: float

    @property
    def D(self) -> int:
        return self.feature_eigenvalues.size

    @property
    def trace(self) -> float:
        return float(np.sum(self.sigma_eigs))

    @property
    def op_norm(self) -> float:
        return float(self.sigma_eigs[0])


def build_oracle(spec: KernelSpec) -> OracleSpectrum:
    if not spec.is_spectral:
        raise UnsupportedError(f"no closed-form oracle for the {spec.kind} kernel")
    lam = spec.lam
    mu = sine_basis_means(spec.freqs)
    root = np.sqrt(lam)
    mean = root * mu
    S = np.diag(lam) - np.outer(mean, mean)
    eig = sym_eig(S)
    # rank-one downdate of a PSD matrix: clip roundoff below zero
    sigma = np.maximum(eig.eigenvalues, 0.0)
    c_eigs = np.sort(lam)[::-1]
    o = OracleSpectrum(
        spec=spec,
        feature_eigenvalues=lam,
        basis_means=mu,
        sigma_matrix=S,
        sigma_eigs=sigma,
        sigma_vecs=eig.eigenvectors,
        c_eigs=c_eigs,
        mean_coeffs=mean,
        mP_sq_norm=float(mean @ mean),
    )
    _check_invariants(o)
    return o


def _check_invariants(o: OracleSpectrum):
    lhs = o.trace
    rhs = float(np.sum(o.feature_eigenvalues)) - o.mP_sq_norm
    if abs(lhs - rhs) > 1e-10 * abs(rhs) + 1e-300:
        raise AssertionError(f"trace identity violated: {lhs} vs {rhs}")
    slack = 1e-12 * o.c_eigs[0]
    if np.any(o.sigma_eigs > o.c_eigs + slack):
        raise AssertionError("covariance eigenvalue exceeds uncentered eigenvalue")
    gaps = -np.diff(o.sigma_eigs)
    if np.any(gaps <= 1e-12 * o.sigma_eigs[0]):
        warnings.warn(
            "covariance spectrum has a numerically repeated eigenvalue; "
            "eigenspaces at that rank are not unique",
            RuntimeWarning,
            stacklevel=3,
        )


def _positive_t(t):
    t = float(t)
    if not t > 0:
        raise InputError(f"t must be positive, got {t}")
    return t


def effective_dim(o: OracleSpectrum, t: float) -> float:
    """``tr(Sigma (Sigma + t I)^-1)``."""
    t = _positive_t(t)
    w = o.sigma_eigs
    return float(np.sum(w / (w + t)))


def effective_dim_infty(o: OracleSpectrum, t: float, grid_size: int = DEFAULT_GRID) -> float:
    """``sup_x <k(., x), (C + tI)^-1 k(., x)>`` as a maximum over a uniform grid on [0, 1].

    The grid maximum is a lower bound of the supremum.
    """
    t = _positive_t(t)
    if grid_size < 1000:
        raise InputError("grid_size must be at least 1000")
    lam = o.feature_eigenvalues
    best = 0.0
    for chunk in np.array_split(np.linspace(0.0, 1.0, grid_size), max(1, grid_size // 2000)):
        E = sine_basis(chunk, o.spec.freqs)
        best = max(best, float(np.max((E**2) @ (lam / (lam + t)))))
    return best


def population_recon(o: OracleSpectrum, ell: int):
    """Tail sums ``(sum_{i>ell} lam_i, sum_{i>ell} lam_i^2)`` of the covariance spectrum."""
    if int(ell) != ell or ell < 0 or ell > o.D:
        raise InputError(f"ell must be an integer in [0, {o.D}], got {ell}")
    tail = o.sigma_eigs[int(ell):]
    return float(np.sum(tail)), float(np.sum(tail**2))


def mean_function(o: OracleSpectrum, x) -> NDArray:
    """Mean element evaluated pointwise: ``m_P(x) = sum_a lam_a mu_a e_a(x)``."""
    return spectral_features(o.spec, x) @ o.mean_coeffs


def mP_inner(o: OracleSpectrum, coeffs) -> NDArray:
    """``<f, m_P>`` for functions given in feature coordinates (last axis of length D)."""
    return np.asarray(coeffs, dtype=float) @ o.mean_coeffs


def decay_constants(o: OracleSpectrum, alpha: float, i_max: int = 50):
    """Smallest and largest ``lam_i(Sigma) * i^alpha`` over ``i <= i_max``.

    These are the constants of a two-sided polynomial decay bound fitted to the
    actual covariance spectrum.
    """
    k = min(i_max, o.D)
    i = np.arange(1, k + 1, dtype=float)
    r = o.sigma_eigs[:k] * i**alpha
    return float(r.min()), float(r.max())


def truncation_ratio(o: OracleSpectrum, alpha: float) -> float:
    """Mass of the untruncated power law beyond ``D`` relative to ``tr(Sigma)``.

    Only meaningful when the fixture stands in for an infinite ``i^-alpha``
    profile; the finite-``D`` kernel itself has no tail.
    """
    from scipy.special import zeta

    lam1 = o.feature_eigenvalues[0]
    tail = lam1 * float(zeta(alpha, o.D + 1)) if alpha > 1 else np.inf
    return tail / o.trace
