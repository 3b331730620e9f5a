"""Empirical kernel PCA and its Nystrom and random-feature approximations.

A fitted :class:`KpcaModel` stores each eigenfunction as a coefficient row over
its expansion:

* ``ekpca``: ``phi_i = sum_j B[i, j] k(., X_j)`` over the full sample;
* ``nystrom``: ``phi_i = sum_j B[i, j] k(., X_{r_j})`` over the subsample;
* ``rff``: ``phi_i(x) = <B[i], Phi_m(x)>`` in the random feature space;
* ``population``: ``phi_i(x) = <B[i], psi(x)>`` in spectral feature
  coordinates (used for exact-eigenfunction fixtures).

``center[i]`` is ``<phi_i, m_hat>``, the projection of the centering mean on
each eigenfunction (the sample mean at fit time), so the centered embedding of
``x`` is ``phi(x) - center``.
"""

import dataclasses
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np
from numpy.typing import NDArray

from .errors import DimensionError, InputError, RankError, UnsupportedError
from .kernels import KernelSpec, _as_points, gram, gram_cross, kernel_matrix, spectral_features, subsample_uniform
from .linalg import DEFAULT_RTOL, centering_matrix, inv_sqrt_psd, pinv_psd, range_basis, sqrt_psd, sym_eig, symmetrize

VARIANTS = ("ekpca", "nystrom", "rff", "population")


@dataclass(frozen=True)
class KpcaModel:
    variant: str
    eigenvalues: NDArray
    coefficients: NDArray
    center: NDArray
    n: int
    m: int
    kernel: Optional[KernelSpec] = None
    points: Optional[NDArray] = None
    indices: Optional[NDArray] = None
    feature_map: Any = None
    seed: Optional[int] = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InputError(f"unknown variant {self.variant!r}")
        lam = np.asarray(self.eigenvalues, dtype=float).reshape(-1)
        # contiguous storage keeps BLAS results identical after a save/load cycle
        B = np.ascontiguousarray(self.coefficients, dtype=float)
        if B.ndim != 2 or B.shape[0] != lam.size:
            raise DimensionError("need one coefficient row per eigenvalue")
        c = np.asarray(self.center, dtype=float).reshape(-1)
        if c.size != lam.size:
            raise DimensionError("need one center entry per eigenvalue")
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "coefficients", B)
        object.__setattr__(self, "center", c)
        if self.points is not None:
            object.__setattr__(self, "points", np.ascontiguousarray(self.points, dtype=float))

    @property
    def ell(self) -> int:
        return self.eigenvalues.size

    def truncate(self, ell: int) -> "KpcaModel":
        """Keep the top ``ell`` components (``ell = 0`` gives the empty projector)."""
        if int(ell) != ell or not 0 <= ell <= self.ell:
            raise InputError(f"ell must be in [0, {self.ell}], got {ell}")
        ell = int(ell)
        return dataclasses.replace(
            self,
            eigenvalues=self.eigenvalues[:ell],
            coefficients=self.coefficients[:ell],
            center=self.center[:ell],
        )


_NOISE = 1e-12


def _top(w: NDArray, V: NDArray, ell: int, rtol: float, what: str, magnitude: float = 0.0):
    # ``magnitude`` is the size of the input data; eigenvalues below
    # _NOISE * magnitude are roundoff even if they dominate the spectrum
    if int(ell) != ell or ell < 1:
        raise InputError(f"ell must be a positive integer, got {ell}")
    ell = int(ell)
    scale = w[0] if w.size and w[0] > _NOISE * magnitude else 0.0
    achievable = int(np.sum(w > rtol * scale)) if scale > 0 else 0
    if achievable < ell:
        raise RankError(
            f"{what}: only {achievable} eigenvalues above {rtol:g} * largest, {ell} requested",
            achievable=achievable,
        )
    return w[:ell], V[:, :ell]


def fit_ekpca(K, ell: int, rtol: float = DEFAULT_RTOL, kernel=None, points=None) -> KpcaModel:
    """Top-``ell`` eigenpairs of the U-statistic covariance operator from a Gram matrix.

    Solves the symmetric problem ``G = C_n K C_n / (n - 1)``, which has the same
    nonzero spectrum as ``K H_n / (n (n - 1))``. Eigenvector ``v_i`` becomes
    coefficients ``v_i / sqrt((n - 1) lam_i)`` so that ``||phi_i||_H = 1``.
    """
    K = symmetrize(K)
    n = K.shape[0]
    if ell >= n:
        raise InputError(f"ell must be below n = {n}, got {ell}")
    Cn = centering_matrix(n)
    G = Cn @ K @ Cn / (n - 1)
    eig = sym_eig(0.5 * (G + G.T))
    lam, V = _top(eig.eigenvalues, eig.eigenvectors, ell, rtol, "ekpca", np.max(np.abs(K)))
    # eigenvectors of a nonzero eigenvalue of C K C are orthogonal to 1; remove roundoff
    V = V - V.mean(axis=0)
    B = (V / np.sqrt((n - 1) * lam)).T
    center = B @ K.mean(axis=1)
    return KpcaModel(
        "ekpca", lam, B, center, n=n, m=n, kernel=kernel,
        points=None if points is None else _as_points(points),
        indices=np.arange(n),
    )


def nystrom_gram(K_mm, K_nm, rtol: float = DEFAULT_RTOL) -> NDArray:
    """``K_tilde = K_nm K_mm^+ K_mn``."""
    K_nm = np.asarray(K_nm, dtype=float)
    Kt = K_nm @ pinv_psd(K_mm, rtol) @ K_nm.T
    return 0.5 * (Kt + Kt.T)


def nystrom_m_matrix(K_mm, K_nm, rtol: float = DEFAULT_RTOL) -> NDArray:
    """``M = K_mm^-1/2 K_mn H_n K_nm K_mm^-1/2`` with the thresholded inverse root."""
    K_nm = np.asarray(K_nm, dtype=float)
    n = K_nm.shape[0]
    R = inv_sqrt_psd(K_mm, rtol)
    KH = K_nm - K_nm.mean(axis=0)  # C_n K_nm
    M = R @ (n * (KH.T @ KH)) @ R
    return 0.5 * (M + M.T)


def fit_nystrom(
    K_mm, K_nm, n: Optional[int] = None, ell: int = 1, rtol: float = DEFAULT_RTOL,
    centered_span: bool = True, kernel=None, points=None, indices=None,
) -> KpcaModel:
    """Nystrom kernel PCA over the subsample given by ``K_mm`` and ``K_nm``.

    The eigenproblem is ``M / (n (n - 1))``. With ``centered_span`` (the
    default) it is restricted to ``ran(K_mm^1/2 H_m)``, i.e. to functions
    ``sum_j c_j k(., X_{r_j})`` with ``sum_j c_j = 0``. That is the space the
    Nystrom objective optimizes over, and the resulting eigenfunctions satisfy
    ``P_m Sigma_hat P_m phi_i = lam_i phi_i`` exactly, with ``P_m`` the
    orthogonal projector onto that space. Without it the full span of the
    subsample sections is used.

    ``points`` are the subsample coordinates (rows ``r_j`` of the sample).
    """
    K_mm = np.asarray(K_mm, dtype=float)
    K_nm = np.asarray(K_nm, dtype=float)
    m = K_mm.shape[0]
    if K_nm.ndim != 2 or K_nm.shape[1] != m:
        raise DimensionError(f"K_nm must have {m} columns, got shape {K_nm.shape}")
    n = K_nm.shape[0] if n is None else int(n)
    if n != K_nm.shape[0]:
        raise DimensionError("n does not match K_nm")
    if ell >= m:
        raise InputError(f"ell must be below m = {m}, got {ell}")
    R = inv_sqrt_psd(K_mm, rtol)
    M = nystrom_m_matrix(K_mm, K_nm, rtol) / (n * (n - 1))
    if centered_span:
        Q = range_basis(sqrt_psd(K_mm, rtol) @ centering_matrix(m), rtol=1e-8)
    else:
        Q = range_basis(sqrt_psd(K_mm, rtol), rtol=1e-8)
    if Q.shape[1] < ell:
        raise RankError(f"nystrom: K_mm supports only {Q.shape[1]} components", achievable=Q.shape[1])
    eig = sym_eig(Q.T @ M @ Q)
    lam, V = _top(eig.eigenvalues, eig.eigenvectors, ell, rtol, "nystrom", np.max(np.abs(K_mm)))
    U = Q @ V
    B = (R @ U).T
    center = B @ K_nm.mean(axis=0)
    return KpcaModel(
        "nystrom", lam, B, center, n=n, m=m, kernel=kernel,
        points=None if points is None else _as_points(points),
        indices=None if indices is None else np.asarray(indices),
    )


def rff_covariance(Z) -> NDArray:
    """U-statistic covariance in feature coordinates, ``Z^T C_n Z / (n - 1)``."""
    Z = np.asarray(Z, dtype=float)
    n = Z.shape[0]
    if n < 2:
        raise InputError("need at least two samples")
    Zc = Z - Z.mean(axis=0)
    S = Zc.T @ Zc / (n - 1)
    return 0.5 * (S + S.T)


def fit_rff(Z, ell: int, rtol: float = DEFAULT_RTOL, feature_map=None) -> KpcaModel:
    """Random-feature kernel PCA from the ``n x m`` feature matrix ``Z``."""
    Z = np.asarray(Z, dtype=float)
    n, m = Z.shape
    if ell > min(m, n - 1):
        raise InputError(f"ell must be at most min(m, n - 1) = {min(m, n - 1)}")
    eig = sym_eig(rff_covariance(Z))
    lam, V = _top(eig.eigenvalues, eig.eigenvectors, ell, rtol, "rff", np.max(np.abs(Z)) ** 2)
    B = V.T
    center = B @ Z.mean(axis=0)
    return KpcaModel("rff", lam, B, center, n=n, m=m, feature_map=feature_map)


def population_model(oracle, ell: int) -> KpcaModel:
    """Exact top-``ell`` covariance eigenfunctions, centered with the true mean element."""
    if int(ell) != ell or not 0 <= ell <= oracle.D:
        raise InputError(f"ell must be in [0, {oracle.D}]")
    B = oracle.sigma_vecs[:, : int(ell)].T
    return KpcaModel(
        "population", oracle.sigma_eigs[: int(ell)], B, B @ oracle.mean_coeffs,
        n=0, m=oracle.D, kernel=oracle.spec,
    )


def fit(kernel: KernelSpec, X, variant: str, ell: int, m: Optional[int] = None, seed=None,
        rtol: float = DEFAULT_RTOL, feature_map=None) -> KpcaModel:
    """Fit ``variant`` on sample ``X`` with the given kernel.

    ``m`` is the subsample size (nystrom) or the number of random features (rff);
    ``seed`` drives the subsample or the feature draw.
    """
    pts = X.points if hasattr(X, "points") else _as_points(X)
    n = pts.shape[0]
    if variant == "ekpca":
        return fit_ekpca(gram(kernel, pts), ell, rtol, kernel=kernel, points=pts)
    if variant == "nystrom":
        if m is None:
            raise InputError("nystrom needs a subsample size m")
        rows = subsample_uniform(n, m, seed)
        K_mm, K_nm = gram_cross(kernel, pts, rows)
        model = fit_nystrom(K_mm, K_nm, n, ell, rtol, kernel=kernel, points=pts[rows], indices=rows)
        return dataclasses.replace(model, seed=seed if isinstance(seed, int) else None)
    if variant == "rff":
        from .kernels import draw_feature_map

        if feature_map is None:
            if m is None:
                raise InputError("rff needs a number of features m")
            feature_map = draw_feature_map(kernel, m, seed, d=pts.shape[1])
        model = fit_rff(feature_map.features(pts), ell, rtol, feature_map=feature_map)
        return dataclasses.replace(model, kernel=kernel, seed=seed if isinstance(seed, int) else None)
    raise InputError(f"unknown variant {variant!r}")


def embed(model: KpcaModel, X_new) -> NDArray:
    """Eigenfunction values ``(phi_1(x), ..., phi_ell(x))`` for each row of ``X_new``."""
    B = model.coefficients
    if model.variant in ("ekpca", "nystrom"):
        if model.kernel is None or model.points is None:
            raise UnsupportedError("model has no kernel/expansion points attached")
        X_new = _as_points(X_new, model.points.shape[1])
        return kernel_matrix(model.kernel, X_new, model.points) @ B.T
    if model.variant == "rff":
        if model.feature_map is None:
            raise UnsupportedError("rff model has no feature map attached")
        return model.feature_map.features(X_new) @ B.T
    return spectral_features(model.kernel, X_new) @ B.T


def eigfun_eval(model: KpcaModel, x) -> NDArray:
    """Eigenfunction values at a single point."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return embed(model, x[None, :])[0]


def pbar_projector_coeffs(K_mm, rtol: float = DEFAULT_RTOL) -> NDArray:
    """``W = H_m (H_m K_mm H_m)^+ H_m``.

    For ``f = sum_j c_j k(., X_j)`` over the full sample, the projection of
    ``f`` onto the centered subsample span has subsample coefficients
    ``W K_mn c``.
    """
    K_mm = np.asarray(K_mm, dtype=float)
    m = K_mm.shape[0]
    Hm = m * centering_matrix(m)
    inner = Hm @ K_mm @ Hm
    if not np.any(np.abs(inner) > 0):
        raise RankError("centered subsample Gram matrix is zero", achievable=0)
    return Hm @ pinv_psd(inner, rtol) @ Hm


def gram_orthonormality(model: KpcaModel, K_exp=None) -> NDArray:
    """``B K_exp B^T``, which should be the identity."""
    B = model.coefficients
    if model.variant in ("rff", "population"):
        return B @ B.T
    if K_exp is None:
        K_exp = gram(model.kernel, model.points)
    return B @ K_exp @ B.T


def nystrom_spectra(K_mm, K_nm, rtol: float = DEFAULT_RTOL):
    """Spectra of ``M / (n (n - 1))`` and of ``K_tilde H_n / (n (n - 1))`` computed independently.

    The second matrix is not symmetric and goes through a general eigensolver.
    Returns the ``m`` largest eigenvalues of each, descending.
    """
    K_nm = np.asarray(K_nm, dtype=float)
    n, m = K_nm.shape
    s = n * (n - 1)
    wM = sym_eig(nystrom_m_matrix(K_mm, K_nm, rtol) / s).eigenvalues
    KtH = nystrom_gram(K_mm, K_nm, rtol) @ (n * centering_matrix(n)) / s
    wK = np.sort(np.linalg.eigvals(KtH).real)[::-1][:m]
    return wM, wK


def projected_eig_residuals(model: KpcaModel, K_mm, K_nm, rtol: float = DEFAULT_RTOL) -> NDArray:
    """RKHS norms of ``P_m Sigma_hat P_m phi_i - lam_i phi_i`` for a Nystrom model.

    ``P_m`` is the orthogonal projector onto the centered subsample span. Each
    ``phi_i`` is first projected, ``Sigma_hat`` applied in full-sample
    coefficients (``C_n f(X) / (n - 1)``), and the result projected back.
    """
    K_mm = np.asarray(K_mm, dtype=float)
    K_nm = np.asarray(K_nm, dtype=float)
    n = K_nm.shape[0]
    W = pbar_projector_coeffs(K_mm, rtol)
    out = np.empty(model.ell)
    for i in range(model.ell):
        b = W @ K_mm @ model.coefficients[i]  # P_m phi_i, subsample coefficients
        f_X = K_nm @ b
        c = (f_X - f_X.mean()) / (n - 1)  # Sigma_hat f in full-sample coefficients
        r = W @ (K_nm.T @ c) - model.eigenvalues[i] * model.coefficients[i]
        out[i] = np.sqrt(max(float(r @ K_mm @ r), 0.0))
    return out


def hoffman_wielandt_gap(K, K_mm, K_nm, ell: int, rtol: float = DEFAULT_RTOL):
    """``(|lam_tilde_{ell+1} - lam_hat_{ell+1}|, ||(K_tilde - K) H_n||_op / (n (n - 1)))``."""
    K = np.asarray(K, dtype=float)
    n = K.shape[0]
    lam_hat = fit_ekpca(K, ell + 1, rtol).eigenvalues[ell]
    lam_tilde = fit_nystrom(K_mm, K_nm, n, ell + 1, rtol).eigenvalues[ell]
    D = (nystrom_gram(K_mm, K_nm, rtol) - K) @ (n * centering_matrix(n))
    bound = float(np.linalg.norm(D, 2)) / (n * (n - 1))
    return abs(lam_tilde - lam_hat), bound
