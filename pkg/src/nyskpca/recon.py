"""Monte Carlo reconstruction errors in the RKHS norm and in L2(P).

For a fitted model with eigenfunctions ``phi_i`` and a fresh point ``y``:

* ``d_i(y) = phi_i(y) - <phi_i, m_hat>`` is the coefficient of the
  empirically centered section ``k(., y) - m_hat`` on ``phi_i``;
* ``c_i(y) = phi_i(y) - <phi_i, m_P>`` is the same with the true mean.

The RKHS residual of ``k(., y) - m_P - sum_i d_i(y) phi_i`` has squared norm
``k(y, y) - 2 m_P(y) + ||m_P||^2 - 2 c.d + d.d``. Its L2(P) counterpart is the
variance under ``P`` of the residual function. Both are averaged over test
points; the reported standard error is that of the average.
"""

import csv
import io
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from .errors import InputError, UnsupportedError
from .estimators import KpcaModel, embed
from .kernels import (
    KernelSpec,
    SpectralFeatureMap,
    _as_points,
    kernel_diag,
    kernel_matrix,
    sine_basis,
    spectral_features,
)
from .oracle import OracleSpectrum, mean_function

DEFAULT_TEST = 10_000
DEFAULT_INNER = 10_000
_CHUNK = 2048

REPORT_FIELDS = ("variant", "norm", "n", "m", "ell", "t", "estimate", "se", "n_test", "seed")


@dataclass(frozen=True)
class ReconReport:
    variant: str
    norm: str
    n: int
    m: int
    ell: int
    estimate: float
    se: float
    n_test: int
    seed: Optional[int] = None
    t: Optional[float] = None

    def csv_row(self) -> str:
        buf = io.StringIO()
        d = asdict(self)
        csv.writer(buf, lineterminator="").writerow(
            ["" if d[k] is None else (repr(d[k]) if isinstance(d[k], float) else d[k]) for k in REPORT_FIELDS]
        )
        return buf.getvalue()


# ----------------------------------------------------------------------------
# sources for the mean element


class OracleMean:
    """Exact mean element of the spectral kernel."""

    def __init__(self, oracle: OracleSpectrum):
        self.oracle = oracle
        self.kernel = oracle.spec
        self.sq_norm = oracle.mP_sq_norm

    def values(self, X) -> NDArray:
        return mean_function(self.oracle, X)

    def inner(self, model: KpcaModel) -> NDArray:
        """``<phi_i, m_P>`` for each eigenfunction."""
        if model.variant == "population":
            return model.coefficients @ self.oracle.mean_coeffs
        if model.variant in ("ekpca", "nystrom"):
            return model.coefficients @ self.values(model.points)
        raise UnsupportedError("rff eigenfunctions do not live in the kernel's RKHS")


class ProxyMean:
    """Mean element approximated by an independent sample ``Z``.

    ``m_P(x) ~ mean_k k(x, Z_k)`` and ``||m_P||^2`` by the off-diagonal average
    of the Gram matrix of ``Z``. The approximation adds an ``O(N^-1/2)`` bias.
    """

    def __init__(self, kernel: KernelSpec, Z):
        self.kernel = kernel
        self.Z = Z.points if hasattr(Z, "points") else _as_points(Z)
        N = self.Z.shape[0]
        if N < 2:
            raise InputError("proxy mean needs at least two points")
        total = 0.0
        for start in range(0, N, _CHUNK):
            total += float(np.sum(kernel_matrix(kernel, self.Z[start:start + _CHUNK], self.Z)))
        diag = float(np.sum(kernel_diag(kernel, self.Z)))
        self.sq_norm = (total - diag) / (N * (N - 1))

    def values(self, X) -> NDArray:
        X = _as_points(X, self.Z.shape[1])
        out = np.empty(X.shape[0])
        for start in range(0, X.shape[0], _CHUNK):
            out[start:start + _CHUNK] = kernel_matrix(self.kernel, X[start:start + _CHUNK], self.Z).mean(axis=1)
        return out

    def inner(self, model: KpcaModel) -> NDArray:
        if model.variant in ("ekpca", "nystrom"):
            return model.coefficients @ self.values(model.points)
        return embed(model, self.Z).mean(axis=0)


def _mean_source(mean, kernel):
    if mean is None:
        raise InputError("a mean source (oracle or proxy sample) is required")
    if isinstance(mean, OracleSpectrum):
        return OracleMean(mean)
    return mean


def _test_points(model: KpcaModel, test_points) -> NDArray:
    Y = test_points.points if hasattr(test_points, "points") else _as_points(test_points)
    if model.points is not None and Y.shape[1] == model.points.shape[1]:
        train = {row.tobytes() for row in np.ascontiguousarray(model.points)}
        if any(row.tobytes() in train for row in np.ascontiguousarray(Y)):
            raise InputError("test points overlap the training expansion points")
    if Y.shape[0] < 2:
        raise InputError("need at least two test points for a standard error")
    return Y


def _report(model, norm, values, seed, ell) -> ReconReport:
    values = np.asarray(values, dtype=float)
    T = values.size
    est = float(np.mean(values))
    se = float(np.std(values, ddof=1) / np.sqrt(T))
    return ReconReport(model.variant, norm, int(model.n), int(model.m), int(ell), est, se, T,
                       seed if isinstance(seed, int) else None)


def _prepare(model, ell):
    if ell is not None:
        model = model.truncate(ell)
    return model


# ----------------------------------------------------------------------------
# RKHS norm


def recon_H_values(model: KpcaModel, mean, test_points) -> NDArray:
    if model.variant == "rff":
        raise UnsupportedError("the RKHS reconstruction error is undefined for random features")
    kernel = model.kernel
    src = _mean_source(mean, kernel)
    Y = _test_points(model, test_points)
    mP_phi = src.inner(model) if model.ell else np.zeros(0)
    out = np.empty(Y.shape[0])
    for start in range(0, Y.shape[0], _CHUNK):
        y = Y[start:start + _CHUNK]
        phi = embed(model, y) if model.ell else np.zeros((y.shape[0], 0))
        d = phi - model.center
        c = phi - mP_phi
        out[start:start + _CHUNK] = (
            kernel_diag(kernel, y) - 2.0 * src.values(y) + src.sq_norm
            - 2.0 * np.einsum("ij,ij->i", c, d) + np.einsum("ij,ij->i", d, d)
        )
    return out


def recon_H(model: KpcaModel, mean, test_points, ell: Optional[int] = None, seed=None) -> ReconReport:
    """RKHS-norm reconstruction error of ``model`` averaged over ``test_points``.

    ``mean`` is an :class:`OracleSpectrum`, :class:`OracleMean` or
    :class:`ProxyMean`. ``ell`` truncates the model first.
    """
    model = _prepare(model, ell)
    return _report(model, "H", recon_H_values(model, mean, test_points), seed, model.ell)


def feature_vectors(model: KpcaModel) -> NDArray:
    """Eigenfunctions as ``ell x D`` vectors in spectral feature coordinates."""
    k = model.kernel
    if k is None or not k.is_spectral:
        raise UnsupportedError("feature coordinates need the spectral kernel")
    if model.variant == "population":
        return model.coefficients
    if model.variant in ("ekpca", "nystrom"):
        return model.coefficients @ spectral_features(k, model.points)
    raise UnsupportedError("rff eigenfunctions are not in the kernel's RKHS")


def recon_H_features(model: KpcaModel, oracle: OracleSpectrum, test_points, ell=None, seed=None) -> ReconReport:
    """Same quantity as :func:`recon_H`, computed entirely in feature coordinates."""
    model = _prepare(model, ell)
    Y = _test_points(model, test_points)
    F = feature_vectors(model)
    out = np.empty(Y.shape[0])
    for start in range(0, Y.shape[0], _CHUNK):
        psi = spectral_features(oracle.spec, Y[start:start + _CHUNK])
        d = psi @ F.T - model.center
        resid = psi - oracle.mean_coeffs - d @ F
        out[start:start + _CHUNK] = np.einsum("ij,ij->i", resid, resid)
    return _report(model, "H", out, seed, model.ell)


# ----------------------------------------------------------------------------
# L2(P) norm


def basis_coefficients(model: KpcaModel) -> NDArray:
    """Eigenfunctions as ``ell x D`` coefficient rows in the sine basis ``e_a``."""
    if model.variant == "rff":
        fmap = model.feature_map
        if not isinstance(fmap, SpectralFeatureMap):
            raise UnsupportedError("exact L2 route needs spectral random features")
        return model.coefficients @ fmap.basis_weights()
    return feature_vectors(model) * np.sqrt(model.kernel.lam)


def _l2_exact_values(model: KpcaModel, oracle: OracleSpectrum, Y: NDArray) -> NDArray:
    # residual written in the sine basis; centered L2(P) norm is |r|^2 - (r.mu)^2
    lam, mu = oracle.feature_eigenvalues, oracle.basis_means
    W = basis_coefficients(model) if model.ell else np.zeros((0, lam.size))
    out = np.empty(Y.shape[0])
    for start in range(0, Y.shape[0], _CHUNK):
        y = Y[start:start + _CHUNK]
        phi = embed(model, y) if model.ell else np.zeros((y.shape[0], 0))
        d = phi - model.center
        r = (sine_basis(y[:, 0], oracle.spec.freqs) - mu) * lam - d @ W
        out[start:start + _CHUNK] = np.einsum("ij,ij->i", r, r) - (r @ mu) ** 2
    return out


def _l2_sampled_values(model: KpcaModel, kernel: KernelSpec, src, Y: NDArray, inner) -> NDArray:
    Z = inner.points if hasattr(inner, "points") else _as_points(inner, Y.shape[1])
    if Z.shape[0] < 2:
        raise InputError("inner sample needs at least two points")
    mZ = src.values(Z)
    phiZ = embed(model, Z) if model.ell else np.zeros((Z.shape[0], 0))
    out = np.empty(Y.shape[0])
    step = max(1, min(_CHUNK, 4_000_000 // Z.shape[0]))
    for start in range(0, Y.shape[0], step):
        y = Y[start:start + step]
        phi = embed(model, y) if model.ell else np.zeros((y.shape[0], 0))
        d = phi - model.center
        G = kernel_matrix(kernel, y, Z) - mZ - d @ phiZ.T
        out[start:start + step] = np.var(G, axis=1)
    return out


def recon_L2(model: KpcaModel, mean, test_points, inner=None, ell=None, seed=None,
             exact: Optional[bool] = None) -> ReconReport:
    """L2(P) reconstruct-then-embed error averaged over ``test_points``.

    With the spectral oracle as ``mean`` the inner L2(P) norm is computed
    exactly in the sine basis. Otherwise, or with ``exact=False``, it is the
    variance of the residual function over the ``inner`` sample.
    """
    model = _prepare(model, ell)
    src = _mean_source(mean, model.kernel)
    Y = _test_points(model, test_points)
    can_exact = isinstance(src, OracleMean) and (
        model.variant != "rff" or isinstance(model.feature_map, SpectralFeatureMap)
    )
    if exact is None:
        exact = can_exact and inner is None
    if exact:
        if not can_exact:
            raise UnsupportedError("exact L2 route needs the spectral oracle")
        values = _l2_exact_values(model, src.oracle, Y)
    else:
        if inner is None:
            raise InputError("an inner sample is required for the sampled L2(P) norm")
        kernel = model.kernel if model.kernel is not None else model.feature_map.kernel()
        values = _l2_sampled_values(model, kernel, src, Y, inner)
    return _report(model, "L2", values, seed, model.ell)


def recon_rff_L2(model: KpcaModel, mean, test_points, inner=None, ell=None, seed=None,
                 exact: Optional[bool] = None) -> ReconReport:
    """L2(P) error of a random-feature model against the true centered kernel section.

    The reconstruction lives in the random-feature space and is compared to
    the exact kernel section after both are centered under ``P``.
    """
    if model.variant != "rff":
        raise InputError("recon_rff_L2 expects an rff model")
    return recon_L2(model, mean, test_points, inner=inner, ell=ell, seed=seed, exact=exact)
