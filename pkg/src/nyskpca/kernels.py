"""Kernels, Gram matrices, subsampling and random feature maps.

Four kernel families are supported:

* ``gaussian``: ``exp(-|x - y|^2 / (2 sigma^2))``
* ``linear``: ``x . y``
* ``polynomial``: ``(x . y + c)^p``
* ``spectral``: ``sum_a lam_a e_a(x) e_a(y)`` on ``[0, 1]`` with the sine basis
  ``e_a(x) = sqrt(2) sin(pi a x)``. The basis is orthonormal under the uniform
  distribution but has nonzero means for odd ``a``, so the kernel mean element
  is not zero. This is the fixture whose population quantities are known in
  closed form (see :mod:`nyskpca.oracle`).
"""

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import minimize_scalar
from scipy.spatial.distance import cdist

from .errors import ConfigError, DimensionError, InputError, UnsupportedError

KINDS = ("gaussian", "linear", "polynomial", "spectral")


@dataclass(frozen=True)
class KernelSpec:
    kind: str
    bandwidth: Optional[float] = None
    degree: Optional[int] = None
    offset: Optional[float] = None
    feature_eigenvalues: tuple = ()
    frequencies: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InputError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "gaussian":
            if self.bandwidth is None or not self.bandwidth > 0:
                raise InputError("gaussian kernel needs bandwidth > 0")
        elif self.kind == "polynomial":
            if self.degree is None or int(self.degree) != self.degree or self.degree < 1:
                raise InputError("polynomial kernel needs integer degree >= 1")
            if self.offset is None or not self.offset >= 0:
                raise InputError("polynomial kernel needs offset >= 0")
        elif self.kind == "spectral":
            lam = np.asarray(self.feature_eigenvalues, dtype=float)
            if lam.ndim != 1 or lam.size == 0:
                raise InputError("spectral kernel needs a non-empty eigenvalue list")
            if not np.all(np.isfinite(lam)) or np.any(lam <= 0):
                raise InputError("spectral feature eigenvalues must be positive")
            if np.any(np.diff(lam) >= 0):
                raise InputError("spectral feature eigenvalues must be strictly descending")
            freqs = self.frequencies or tuple(range(1, lam.size + 1))
            if len(freqs) != lam.size:
                raise InputError("spectral kernel: one frequency per eigenvalue")
            if any(int(a) != a or a < 1 for a in freqs) or len(set(freqs)) != len(freqs):
                raise InputError("spectral frequencies must be distinct positive integers")
            object.__setattr__(self, "feature_eigenvalues", tuple(float(v) for v in lam))
            object.__setattr__(self, "frequencies", tuple(int(a) for a in freqs))

    @classmethod
    def gaussian(cls, bandwidth: float) -> "KernelSpec":
        return cls("gaussian", bandwidth=float(bandwidth))

    @classmethod
    def linear(cls) -> "KernelSpec":
        return cls("linear")

    @classmethod
    def polynomial(cls, degree: int, offset: float = 1.0) -> "KernelSpec":
        return cls("polynomial", degree=int(degree), offset=float(offset))

    @classmethod
    def spectral(cls, feature_eigenvalues, frequencies=None) -> "KernelSpec":
        return cls(
            "spectral",
            feature_eigenvalues=tuple(feature_eigenvalues),
            frequencies=tuple(frequencies) if frequencies is not None else (),
        )

    @classmethod
    def spectral_power(cls, alpha: float = 2.0, D: int = 200, scale: float = 1.0) -> "KernelSpec":
        """Spectral kernel with feature eigenvalues ``scale * i^-alpha``, i = 1..D."""
        i = np.arange(1, D + 1, dtype=float)
        return cls.spectral(scale * i ** (-float(alpha)))

    @property
    def is_spectral(self) -> bool:
        return self.kind == "spectral"

    @property
    def lam(self) -> NDArray:
        return np.asarray(self.feature_eigenvalues, dtype=float)

    @property
    def freqs(self) -> NDArray:
        return np.asarray(self.frequencies, dtype=int)

    @property
    def kappa(self) -> float:
        """``sup_x k(x, x)``; infinite for the unbounded linear/polynomial kernels."""
        if self.kind == "gaussian":
            return 1.0
        if self.kind == "spectral":
            return _spectral_kappa(self)
        return math.inf

    @property
    def kappa_bound(self) -> float:
        """Cheap upper bound on ``kappa`` (``2 sum lam`` for the spectral kernel)."""
        if self.kind == "spectral":
            return 2.0 * float(np.sum(self.lam))
        return self.kappa

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "gaussian":
            d["bandwidth"] = self.bandwidth
        elif self.kind == "polynomial":
            d["degree"] = self.degree
            d["offset"] = self.offset
        elif self.kind == "spectral":
            d["feature_eigenvalues"] = list(self.feature_eigenvalues)
            d["frequencies"] = list(self.frequencies)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        kind = d.get("kind")
        if kind == "gaussian":
            return cls.gaussian(d["bandwidth"])
        if kind == "linear":
            return cls.linear()
        if kind == "polynomial":
            return cls.polynomial(d["degree"], d["offset"])
        if kind == "spectral":
            return cls.spectral(d["feature_eigenvalues"], d.get("frequencies"))
        raise InputError(f"unknown kernel kind {kind!r}")


def parse_kernel(text: str) -> KernelSpec:
    """Parse ``kind[:key=value,...]``, e.g. ``gaussian:sigma=0.5`` or ``spectral:alpha=2,D=200``."""
    kind, _, rest = text.strip().partition(":")
    params = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, value = item.partition("=")
        if not eq:
            raise InputError(f"bad kernel parameter {item!r} (expected key=value)")
        params[key.strip()] = value.strip()
    try:
        if kind == "gaussian":
            return KernelSpec.gaussian(float(params.get("sigma", params.get("bandwidth", 1.0))))
        if kind == "linear":
            return KernelSpec.linear()
        if kind == "polynomial":
            return KernelSpec.polynomial(int(params.get("degree", 2)), float(params.get("offset", 1.0)))
        if kind == "spectral":
            return KernelSpec.spectral_power(float(params.get("alpha", 2.0)), int(params.get("D", 200)))
    except ValueError as exc:
        raise InputError(f"bad kernel parameters in {text!r}: {exc}") from None
    raise InputError(f"unknown kernel kind {kind!r}")


# ----------------------------------------------------------------------------
# evaluation


def _as_points(X, d=None) -> NDArray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None] if d in (None, 1) else X[None, :]
    if X.ndim != 2:
        raise DimensionError(f"points must be a 2-d array, got shape {X.shape}")
    if d is not None and X.shape[1] != d:
        raise DimensionError(f"expected {d}-dimensional points, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise InputError("points contain non-finite coordinates")
    return X


def _check_unit_interval(X: NDArray):
    if X.shape[1] != 1:
        raise DimensionError("spectral kernel is defined on [0, 1] (d = 1)")
    if np.any(X < 0.0) or np.any(X > 1.0):
        raise InputError("spectral kernel: points must lie in [0, 1]")


def sine_basis(x, frequencies) -> NDArray:
    """``e_a(x) = sqrt(2) sin(pi a x)`` evaluated for each point (rows) and frequency (columns)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    a = np.asarray(frequencies, dtype=float)
    return math.sqrt(2.0) * np.sin(np.pi * np.outer(x, a))


def sine_basis_means(frequencies) -> NDArray:
    """``int_0^1 e_a(x) dx = sqrt(2) (1 - cos(pi a)) / (pi a)``."""
    a = np.asarray(frequencies, dtype=float)
    return math.sqrt(2.0) * (1.0 - np.cos(np.pi * a)) / (np.pi * a)


def spectral_features(spec: KernelSpec, X) -> NDArray:
    """Feature map ``x -> (sqrt(lam_a) e_a(x))_a``; ``k(x, y)`` is the dot product of two rows."""
    if not spec.is_spectral:
        raise UnsupportedError("spectral features need a spectral kernel")
    X = _as_points(X, 1)
    _check_unit_interval(X)
    return sine_basis(X[:, 0], spec.freqs) * np.sqrt(spec.lam)


def kernel_matrix(spec: KernelSpec, X, Y) -> NDArray:
    """Matrix ``[k(x_i, y_j)]``."""
    if spec.is_spectral:
        return spectral_features(spec, X) @ spectral_features(spec, Y).T
    X = _as_points(X)
    Y = _as_points(Y, X.shape[1])
    if spec.kind == "gaussian":
        return np.exp(-cdist(X, Y, "sqeuclidean") / (2.0 * spec.bandwidth**2))
    G = X @ Y.T
    if spec.kind == "linear":
        return G
    return (G + spec.offset) ** spec.degree


def kernel_diag(spec: KernelSpec, X) -> NDArray:
    """``k(x, x)`` for each row of ``X``."""
    if spec.is_spectral:
        F = spectral_features(spec, X)
        return np.einsum("ij,ij->i", F, F)
    X = _as_points(X)
    if spec.kind == "gaussian":
        return np.ones(X.shape[0])
    sq = np.einsum("ij,ij->i", X, X)
    if spec.kind == "linear":
        return sq
    return (sq + spec.offset) ** spec.degree


def kernel_eval(spec: KernelSpec, x, y) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape:
        raise DimensionError(f"points differ in dimension: {x.shape} vs {y.shape}")
    return float(kernel_matrix(spec, x[None, :], y[None, :])[0, 0])


def _spectral_kappa(spec: KernelSpec) -> float:
    grid = np.linspace(0.0, 1.0, 2**16 + 1)
    vals = kernel_diag(spec, grid)
    j = int(np.argmax(vals))
    h = grid[1] - grid[0]
    lo, hi = max(0.0, grid[j] - h), min(1.0, grid[j] + h)
    res = minimize_scalar(
        lambda t: -kernel_diag(spec, np.array([min(max(t, 0.0), 1.0)]))[0],
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-12},
    )
    return float(max(vals[j], -res.fun))


def gram(spec: KernelSpec, X) -> NDArray:
    """Symmetric Gram matrix ``K = [k(X_i, X_j)]``."""
    X = X.points if isinstance(X, SampleSet) else X
    K = kernel_matrix(spec, X, X)
    return 0.5 * (K + K.T)


def check_indices(rows, n: int) -> NDArray:
    rows = np.asarray(rows)
    if rows.ndim != 1 or rows.size == 0:
        raise InputError("index list must be a non-empty 1-d sequence")
    if not np.issubdtype(rows.dtype, np.integer):
        if not np.all(rows == np.round(rows)):
            raise InputError("indices must be integers")
        rows = rows.astype(int)
    if np.any(rows < 0) or np.any(rows >= n):
        raise InputError(f"indices out of range for a sample of size {n}")
    if np.unique(rows).size != rows.size:
        raise InputError("duplicate indices")
    return rows


def gram_cross(spec: KernelSpec, X, rows, K: Optional[NDArray] = None):
    """Return ``(K_mm, K_nm)`` for the subsample ``rows``.

    When the full Gram matrix ``K`` is already available it is sliced instead of
    re-evaluated, so that ``K_nm[rows] == K_mm`` holds exactly.
    """
    X = X.points if isinstance(X, SampleSet) else _as_points(X)
    rows = check_indices(rows, X.shape[0])
    if K is None:
        K_nm = kernel_matrix(spec, X, X[rows])
    else:
        K_nm = np.asarray(K)[:, rows]
    K_mm = K_nm[rows, :]
    K_mm = 0.5 * (K_mm + K_mm.T)
    K_nm = K_nm.copy()
    K_nm[rows, :] = K_mm
    return K_mm, K_nm


def subsample_uniform(n: int, m: int, seed) -> NDArray:
    """``m`` distinct indices of ``range(n)``, uniform over subsets, deterministic in ``seed``."""
    if m < 1 or m > n:
        raise InputError(f"need 1 <= m <= n, got m={m}, n={n}")
    rng = np.random.default_rng(seed)
    return np.sort(rng.choice(n, size=m, replace=False))


# ----------------------------------------------------------------------------
# random feature maps


@dataclass(frozen=True)
class RffMap:
    """Random Fourier features for the Gaussian kernel.

    ``phi(x, (w, b)) = sqrt(2) cos(w.x + b)`` with ``w ~ N(0, sigma^-2 I)`` and
    ``b ~ U[0, 2 pi)``; row ``t`` of :meth:`features` is
    ``(phi(x_t, theta_1), ..., phi(x_t, theta_m)) / sqrt(m)``.
    """

    frequencies: NDArray
    phases: NDArray
    bandwidth: float
    seed: Optional[int] = None
    kind: str = field(default="fourier", init=False)

    def __post_init__(self):
        W = np.atleast_2d(np.asarray(self.frequencies, dtype=float))
        b = np.asarray(self.phases, dtype=float).reshape(-1)
        if W.shape[0] != b.size or b.size < 1:
            raise DimensionError("one phase per frequency and at least one feature")
        object.__setattr__(self, "frequencies", W)
        object.__setattr__(self, "phases", b)

    @classmethod
    def draw(cls, d: int, m: int, bandwidth: float, seed) -> "RffMap":
        if m < 1:
            raise InputError("need at least one random feature")
        rng = np.random.default_rng(seed)
        W = rng.normal(scale=1.0 / bandwidth, size=(m, d))
        b = rng.uniform(0.0, 2.0 * np.pi, size=m)
        return cls(W, b, float(bandwidth), seed if isinstance(seed, int) else None)

    @property
    def m(self) -> int:
        return self.phases.size

    @property
    def d(self) -> int:
        return self.frequencies.shape[1]

    def features(self, X) -> NDArray:
        X = X.points if isinstance(X, SampleSet) else _as_points(X, self.d)
        return math.sqrt(2.0 / self.m) * np.cos(X @ self.frequencies.T + self.phases)

    def kernel(self) -> KernelSpec:
        return KernelSpec.gaussian(self.bandwidth)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "frequencies": self.frequencies.tolist(),
            "phases": self.phases.tolist(),
            "bandwidth": self.bandwidth,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class SpectralFeatureMap:
    """Random features for the spectral kernel.

    Basis indices ``a_j`` are drawn with probability ``lam_a / tau`` where
    ``tau = sum lam``, and ``phi(x, a) = sqrt(tau) e_a(x)``, so
    ``E[phi(x, a) phi(y, a)] = k(x, y)``.
    """

    indices: NDArray
    spec: KernelSpec
    seed: Optional[int] = None
    kind: str = field(default="spectral", init=False)

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=int).reshape(-1)
        if idx.size < 1:
            raise InputError("need at least one random feature")
        if np.any(idx < 0) or np.any(idx >= len(self.spec.feature_eigenvalues)):
            raise InputError("feature index out of range for this kernel")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def draw(cls, spec: KernelSpec, m: int, seed) -> "SpectralFeatureMap":
        if not spec.is_spectral:
            raise UnsupportedError("spectral features need a spectral kernel")
        if m < 1:
            raise InputError("need at least one random feature")
        rng = np.random.default_rng(seed)
        p = spec.lam / spec.lam.sum()
        idx = rng.choice(p.size, size=m, replace=True, p=p)
        return cls(idx, spec, seed if isinstance(seed, int) else None)

    @property
    def m(self) -> int:
        return self.indices.size

    @property
    def d(self) -> int:
        return 1

    def basis_weights(self) -> NDArray:
        """``m x D`` matrix ``G`` with ``features(x) = G e(x)`` in the sine basis."""
        G = np.zeros((self.m, len(self.spec.feature_eigenvalues)))
        G[np.arange(self.m), self.indices] = math.sqrt(self.spec.lam.sum() / self.m)
        return G

    def features(self, X) -> NDArray:
        X = X.points if isinstance(X, SampleSet) else _as_points(X, 1)
        _check_unit_interval(X)
        E = sine_basis(X[:, 0], self.spec.freqs[self.indices])
        return math.sqrt(self.spec.lam.sum() / self.m) * E

    def kernel(self) -> KernelSpec:
        return self.spec

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "indices": self.indices.tolist(),
            "kernel": self.spec.to_dict(),
            "seed": self.seed,
        }


def feature_map_from_dict(d: dict):
    if d.get("kind") == "fourier":
        return RffMap(np.asarray(d["frequencies"]), np.asarray(d["phases"]), d["bandwidth"], d.get("seed"))
    if d.get("kind") == "spectral":
        return SpectralFeatureMap(np.asarray(d["indices"]), KernelSpec.from_dict(d["kernel"]), d.get("seed"))
    raise InputError(f"unknown feature map kind {d.get('kind')!r}")


def rff_features(fmap, X) -> NDArray:
    """Row ``t`` is the approximate feature vector of ``X_t``."""
    return fmap.features(X)


def draw_feature_map(spec: KernelSpec, m: int, seed, d: int = 1):
    """Random feature map matching ``spec``: Fourier features (Gaussian) or basis sampling (spectral)."""
    if spec.kind == "gaussian":
        return RffMap.draw(d, m, spec.bandwidth, seed)
    if spec.is_spectral:
        return SpectralFeatureMap.draw(spec, m, seed)
    raise UnsupportedError(f"no random feature map for the {spec.kind} kernel")


# ----------------------------------------------------------------------------
# samples


@dataclass
class SampleSet:
    """Ordered points ``X_1..X_n`` (rows) with where they came from."""

    points: NDArray
    seed: Optional[int] = None
    source: str = "synthetic"

    def __post_init__(self):
        self.points = _as_points(self.points)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def check_for(self, spec: KernelSpec):
        if spec.is_spectral:
            _check_unit_interval(self.points)

    @classmethod
    def uniform(cls, n: int, seed, d: int = 1) -> "SampleSet":
        """``n`` i.i.d. draws from the uniform distribution on ``[0, 1]^d``."""
        rng = np.random.default_rng(seed)
        return cls(rng.uniform(0.0, 1.0, size=(n, d)), seed if isinstance(seed, int) else None)


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def load_csv(path) -> SampleSet:
    """Read one point per row. A non-numeric first row is treated as a header."""
    path = Path(path)
    rows = []
    width = None
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ConfigError(f"cannot read data file: {exc}", path=str(path)) from None
    with fh:
        for lineno, rec in enumerate(csv.reader(fh), start=1):
            cells = [c.strip() for c in rec]
            if not cells or all(c == "" for c in cells):
                continue
            if lineno == 1 and not all(_is_number(c) for c in cells):
                continue
            try:
                vals = [float(c) for c in cells]
            except ValueError:
                raise ConfigError(f"non-numeric value in row {cells}", line=lineno, path=str(path)) from None
            if not all(math.isfinite(v) for v in vals):
                raise ConfigError("non-finite value", line=lineno, path=str(path))
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise ConfigError(f"expected {width} columns, got {len(vals)}", line=lineno, path=str(path))
            rows.append(vals)
    if not rows:
        raise ConfigError("no data rows", path=str(path))
    return SampleSet(np.array(rows), None, str(path))


def save_csv(path, rows: NDArray, header: Optional[Sequence[str]] = None):
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if header is not None:
            w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) for v in r])
