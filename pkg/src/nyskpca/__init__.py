"""Centered kernel PCA with Nystrom and random-feature approximations.

The package fits U-statistic kernel PCA and its two approximations, measures
reconstruction error in the RKHS norm and in L2(P), and carries an exact
population oracle for a synthetic spectral kernel.
"""

from .errors import ConfigError, InputError, KpcaError, NotPSDError, RankError, UnsupportedError
from .estimators import (
    KpcaModel,
    embed,
    eigfun_eval,
    fit,
    fit_ekpca,
    fit_nystrom,
    fit_rff,
    pbar_projector_coeffs,
    population_model,
)
from .kernels import KernelSpec, RffMap, SampleSet, SpectralFeatureMap, gram, gram_cross, parse_kernel
from .oracle import OracleSpectrum, build_oracle, effective_dim, effective_dim_infty, population_recon
from .recon import ProxyMean, ReconReport, recon_H, recon_L2, recon_rff_L2

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "InputError", "KpcaError", "NotPSDError", "RankError", "UnsupportedError",
    "KpcaModel", "embed", "eigfun_eval", "fit", "fit_ekpca", "fit_nystrom", "fit_rff",
    "pbar_projector_coeffs", "population_model",
    "KernelSpec", "RffMap", "SampleSet", "SpectralFeatureMap", "gram", "gram_cross", "parse_kernel",
    "OracleSpectrum", "build_oracle", "effective_dim", "effective_dim_infty", "population_recon",
    "ProxyMean", "ReconReport", "recon_H", "recon_L2", "recon_rff_L2",
]
