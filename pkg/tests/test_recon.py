import numpy as np
import pytest

from nyskpca.errors import InputError, UnsupportedError
from nyskpca.estimators import fit, population_model
from nyskpca.kernels import KernelSpec, SampleSet
from nyskpca.oracle import build_oracle, population_recon
from nyskpca.recon import (
    REPORT_FIELDS,
    OracleMean,
    ProxyMean,
    recon_H,
    recon_H_features,
    recon_H_values,
    recon_L2,
    recon_rff_L2,
)
from nyskpca.verify import monotone_model


@pytest.fixture(scope="module")
def X():
    return SampleSet.uniform(120, 3).points


@pytest.fixture(scope="module")
def Y():
    return SampleSet.uniform(4000, 4).points


def within(rep, target, z=4.0):
    return abs(rep.estimate - target) <= z * rep.se


def test_empty_projector_matches_trace(spec, oracle, X, Y):
    model = fit(spec, X, "ekpca", 3)
    h = recon_H(model, oracle, Y, ell=0)
    l2 = recon_L2(model, oracle, Y, ell=0)
    assert h.ell == 0 and l2.ell == 0
    assert within(h, oracle.trace)
    assert within(l2, float(np.sum(oracle.sigma_eigs**2)))


def test_population_full_rank_is_perfect(oracle, Y):
    model = population_model(oracle, oracle.D)
    h = recon_H(model, oracle, Y)
    assert abs(h.estimate) <= 1e-10
    l2 = recon_L2(model, oracle, Y)
    assert abs(l2.estimate) <= 1e-10


@pytest.mark.parametrize("ell", [1, 3, 8])
def test_population_matches_tail_sums(oracle, Y, ell):
    model = population_model(oracle, ell)
    R, T = population_recon(oracle, ell)
    assert within(recon_H(model, oracle, Y), R)
    assert within(recon_L2(model, oracle, Y), T)


def test_values_nonnegative(spec, oracle, X, Y):
    for variant, m in (("ekpca", None), ("nystrom", 30)):
        model = fit(spec, X, variant, 5, m=m, seed=0)
        assert np.all(recon_H_values(model, oracle, Y) >= -1e-10)
    rff = fit(spec, X, "rff", 3, m=40, seed=0)
    assert recon_rff_L2(rff, oracle, Y).estimate >= 0


def test_overlap_rejected(spec, oracle, X):
    model = fit(spec, X, "ekpca", 2, )
    model = fit(spec, X, "ekpca", 2)
    model = type(model)(**{**model.__dict__, "points": X})
    with pytest.raises(InputError, match="overlap"):
        recon_H(model, oracle, X[:10])


def test_too_few_test_points(spec, oracle, X):
    model = fit(spec, X, "ekpca", 2)
    with pytest.raises(InputError):
        recon_H(model, oracle, np.array([[0.123456]]))


def test_missing_mean_or_inner(spec, oracle, X, Y):
    model = fit(spec, X, "ekpca", 2)
    with pytest.raises(InputError):
        recon_H(model, None, Y)
    with pytest.raises(InputError):
        recon_L2(model, oracle, Y, exact=False)


def test_rff_rejected_in_rkhs_norm(spec, oracle, X, Y):
    rff = fit(spec, X, "rff", 2, m=30, seed=1)
    with pytest.raises(UnsupportedError):
        recon_H(rff, oracle, Y)
    with pytest.raises(InputError):
        recon_rff_L2(fit(spec, X, "ekpca", 2), oracle, Y)


def test_route_equivalence(spec, oracle, X, Y):
    for variant, m in (("ekpca", None), ("nystrom", 40)):
        model = fit(spec, X, variant, 4, m=m, seed=2)
        a = recon_H(model, oracle, Y).estimate
        b = recon_H_features(model, oracle, Y).estimate
        assert a == pytest.approx(b, rel=1e-8)


def test_l2_exact_vs_sampled(spec, oracle, X, Y):
    model = fit(spec, X, "ekpca", 3)
    inner = SampleSet.uniform(20000, 99).points
    exact = recon_L2(model, oracle, Y[:500])
    sampled = recon_L2(model, oracle, Y[:500], inner=inner)
    assert sampled.estimate == pytest.approx(exact.estimate, rel=0.05)


def test_rff_l2_exact_vs_sampled(spec, oracle, X, Y):
    model = fit(spec, X, "rff", 3, m=60, seed=3)
    inner = SampleSet.uniform(20000, 98).points
    exact = recon_rff_L2(model, oracle, Y[:500])
    sampled = recon_rff_L2(model, oracle, Y[:500], inner=inner)
    assert sampled.estimate == pytest.approx(exact.estimate, rel=0.05)


def test_monotone_in_ell_with_true_centering(spec, oracle, X, Y):
    model = monotone_model(fit(spec, X, "ekpca", 10), OracleMean(oracle))
    vals = [recon_H(model, oracle, Y, ell=k).estimate for k in range(11)]
    assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


def test_proxy_mean_gaussian():
    k = KernelSpec.gaussian(0.5)
    Z = SampleSet.uniform(3000, 5, 2)
    src = ProxyMean(k, Z)
    # m_P(x) for the uniform square has a closed form via erf; check one point
    from scipy.special import erf

    def m1(t):
        s = 0.5
        return s * np.sqrt(np.pi / 2) * (erf((1 - t) / (np.sqrt(2) * 0.5)) + erf(t / (np.sqrt(2) * 0.5)))

    x = np.array([[0.3, 0.7]])
    assert src.values(x)[0] == pytest.approx(m1(0.3) * m1(0.7), rel=0.02)
    X = SampleSet.uniform(100, 6, 2).points
    model = fit(k, X, "ekpca", 3)
    Y = SampleSet.uniform(500, 7, 2).points
    h = recon_H(model, src, Y)
    assert h.estimate > 0
    with pytest.raises(InputError):
        ProxyMean(k, np.zeros((1, 2)))


def test_report_row(spec, oracle, X, Y):
    rep = recon_H(fit(spec, X, "ekpca", 2), oracle, Y, seed=7)
    cells = rep.csv_row().split(",")
    assert len(cells) == len(REPORT_FIELDS)
    assert cells[0] == "ekpca" and cells[1] == "H" and cells[-1] == "7"
    assert float(cells[REPORT_FIELDS.index("estimate")]) == rep.estimate
    assert rep.n_test == 4000
