import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nyskpca.errors import ConfigError, DimensionError, InputError, UnsupportedError
from nyskpca.kernels import (
    KernelSpec,
    RffMap,
    SampleSet,
    SpectralFeatureMap,
    draw_feature_map,
    feature_map_from_dict,
    gram,
    gram_cross,
    kernel_diag,
    kernel_eval,
    load_csv,
    parse_kernel,
    rff_features,
    save_csv,
    sine_basis,
    sine_basis_means,
    spectral_features,
    subsample_uniform,
)


def test_gaussian_diagonal():
    assert kernel_eval(KernelSpec.gaussian(1.0), [0.3, 0.1], [0.3, 0.1]) == 1.0


def test_linear_dot():
    assert kernel_eval(KernelSpec.linear(), [1.0, 2.0], [3.0, 4.0]) == 11.0


def test_polynomial():
    assert kernel_eval(KernelSpec.polynomial(2, 1.0), [1.0, 2.0], [3.0, 4.0]) == 144.0


def test_spectral_hand_value():
    k = KernelSpec.spectral([1.0, 0.5])
    assert kernel_eval(k, [0.5], [0.5]) == pytest.approx(2.0, abs=1e-14)


def test_spectral_domain():
    with pytest.raises(InputError):
        kernel_eval(KernelSpec.spectral([1.0]), [1.5], [0.5])


@pytest.mark.parametrize(
    "kw",
    [
        dict(kind="gaussian", bandwidth=0.0),
        dict(kind="polynomial", degree=0, offset=1.0),
        dict(kind="polynomial", degree=2, offset=-1.0),
        dict(kind="spectral", feature_eigenvalues=(1.0, 2.0)),
        dict(kind="spectral", feature_eigenvalues=(1.0, -0.5)),
        dict(kind="spectral", feature_eigenvalues=(1.0, 0.5), frequencies=(1, 1)),
        dict(kind="nope"),
    ],
)
def test_spec_validation(kw):
    with pytest.raises(InputError):
        KernelSpec(**kw)


def test_parse_kernel():
    assert parse_kernel("gaussian:sigma=0.5") == KernelSpec.gaussian(0.5)
    assert parse_kernel("linear") == KernelSpec.linear()
    assert parse_kernel("polynomial:degree=3,offset=0") == KernelSpec.polynomial(3, 0.0)
    assert parse_kernel("spectral:alpha=2,D=10") == KernelSpec.spectral_power(2.0, 10)
    for bad in ("cosine", "gaussian:sigma", "gaussian:sigma=abc", "gaussian:sigma=-1"):
        with pytest.raises(InputError):
            parse_kernel(bad)


@pytest.mark.parametrize("k", [KernelSpec.gaussian(0.4), KernelSpec.linear(), KernelSpec.polynomial(3, 1.0),
                               KernelSpec.spectral_power(2.0, 50)])
def test_spec_dict_roundtrip(k):
    assert KernelSpec.from_dict(k.to_dict()) == k


def test_sine_basis_orthonormal():
    # midpoint rule is exact for these trigonometric products
    x = (np.arange(4000) + 0.5) / 4000
    E = sine_basis(x, np.arange(1, 11))
    np.testing.assert_allclose(E.T @ E / x.size, np.eye(10), atol=1e-6)
    np.testing.assert_allclose(E.mean(0), sine_basis_means(np.arange(1, 11)), atol=1e-6)


def test_basis_means_values():
    mu = sine_basis_means([1, 2, 3])
    np.testing.assert_allclose(mu, [2 * math.sqrt(2) / math.pi, 0.0, 2 * math.sqrt(2) / (3 * math.pi)], atol=1e-15)


def test_gram_small():
    X = np.array([[0.2]])
    k = KernelSpec.gaussian(1.0)
    np.testing.assert_array_equal(gram(k, X), [[1.0]])


@pytest.mark.parametrize("k,d", [(KernelSpec.gaussian(0.3), 2), (KernelSpec.spectral_power(2.0, 200), 1)])
def test_gram_symmetric_psd(k, d):
    K = gram(k, SampleSet.uniform(10, 3, d))
    np.testing.assert_array_equal(K, K.T)
    w = np.linalg.eigvalsh(K)
    assert w[0] >= -1e-10 * w[-1]


def test_gram_cross_consistency():
    k = KernelSpec.gaussian(0.5)
    X = SampleSet.uniform(30, 1, 2).points
    rows = subsample_uniform(30, 7, 2)
    K_mm, K_nm = gram_cross(k, X, rows)
    np.testing.assert_array_equal(K_nm[rows], K_mm)
    K = gram(k, X)
    K_mm2, K_nm2 = gram_cross(k, X, np.arange(30), K)
    np.testing.assert_array_equal(K_mm2, K)
    np.testing.assert_array_equal(K_nm2, K)


@pytest.mark.parametrize("rows", [[0, 0], [0, 30], [-1], []])
def test_gram_cross_bad_indices(rows):
    with pytest.raises(InputError):
        gram_cross(KernelSpec.linear(), np.zeros((30, 1)), rows)


def test_subsample_basic():
    assert sorted(subsample_uniform(5, 5, 0)) == list(range(5))
    np.testing.assert_array_equal(subsample_uniform(1, 1, 0), [0])
    np.testing.assert_array_equal(subsample_uniform(100, 10, 42), subsample_uniform(100, 10, 42))
    with pytest.raises(InputError):
        subsample_uniform(3, 4, 0)


def test_subsample_uniform_frequency():
    rng = np.random.default_rng(7)
    counts = np.zeros(1000)
    for _ in range(10_000):
        counts[subsample_uniform(1000, 100, rng)] += 1
    freq = counts / 10_000
    assert np.all(np.abs(freq - 0.1) <= 0.01)


def test_rff_bounds_and_trivial():
    fmap = RffMap.draw(3, 50, 0.7, 1)
    Z = rff_features(fmap, np.random.default_rng(0).normal(size=(20, 3)))
    assert np.all(np.abs(Z) <= math.sqrt(2 / 50) + 1e-15)
    triv = RffMap(np.zeros((1, 2)), np.zeros(1), 1.0)
    np.testing.assert_allclose(triv.features(np.ones((4, 2))), math.sqrt(2.0))


def test_rff_kernel_approximation():
    k = KernelSpec.gaussian(1.0)
    rng = np.random.default_rng(3)
    x, y = rng.normal(size=(200, 2)), rng.normal(size=(200, 2))
    fmap = RffMap.draw(2, 4096, 1.0, 4)
    approx = np.einsum("ij,ij->i", fmap.features(x), fmap.features(y))
    exact = np.array([kernel_eval(k, a, b) for a, b in zip(x, y)])
    assert np.mean(np.abs(approx - exact)) <= 0.05


def test_rff_error_decreases():
    k = KernelSpec.gaussian(1.0)
    X = SampleSet.uniform(100, 7, 2).points
    K = gram(k, X)
    errs = [np.max(np.abs(Z @ Z.T - K)) for Z in (RffMap.draw(2, m, 1.0, 8).features(X) for m in (64, 256, 1024, 4096))]
    assert all(b <= 2 * a for a, b in zip(errs, errs[1:]))
    assert errs[-1] < errs[0]


def test_rff_dimension_mismatch():
    with pytest.raises(DimensionError):
        RffMap.draw(2, 5, 1.0, 0).features(np.zeros((3, 3)))


def test_spectral_feature_map_unbiased(spec):
    # E over index draws of phi(x, a) phi(y, a) is k(x, y); check with many features
    fmap = SpectralFeatureMap.draw(spec, 200_000, 5)
    x = np.array([[0.13], [0.71]])
    Z = fmap.features(x)
    assert Z[0] @ Z[1] == pytest.approx(kernel_eval(spec, [0.13], [0.71]), abs=0.02)
    np.testing.assert_allclose(fmap.basis_weights() @ sine_basis(x[:, 0], spec.freqs).T, Z.T)


def test_feature_map_dict_roundtrip(spec):
    for fmap in (RffMap.draw(2, 5, 0.5, 3), SpectralFeatureMap.draw(spec, 7, 3)):
        back = feature_map_from_dict(fmap.to_dict())
        X = np.random.default_rng(1).uniform(size=(4, fmap.d))
        np.testing.assert_array_equal(back.features(X), fmap.features(X))


def test_draw_feature_map_kinds(spec):
    assert draw_feature_map(KernelSpec.gaussian(1.0), 3, 0, d=2).kind == "fourier"
    assert draw_feature_map(spec, 3, 0).kind == "spectral"
    with pytest.raises(UnsupportedError):
        draw_feature_map(KernelSpec.linear(), 3, 0)


def test_kappa(spec):
    grid = np.linspace(0, 1, 10_001)[:, None]
    gmax = kernel_diag(spec, grid).max()
    assert abs(spec.kappa - gmax) <= 0.05 * gmax
    assert spec.kappa <= spec.kappa_bound
    assert spec.kappa == pytest.approx(2.4624011419375496, rel=1e-9)
    assert KernelSpec.gaussian(2.0).kappa == 1.0
    assert math.isinf(KernelSpec.linear().kappa)


@settings(max_examples=30, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1))
def test_spectral_kernel_symmetric_bounded(x, y):
    k = KernelSpec.spectral_power(2.0, 30)
    a, b = kernel_eval(k, [x], [y]), kernel_eval(k, [y], [x])
    assert a == pytest.approx(b, abs=1e-14)
    assert abs(a) <= k.kappa_bound


def test_spectral_features_match_kernel(spec):
    X = SampleSet.uniform(5, 2).points
    F = spectral_features(spec, X)
    np.testing.assert_allclose(F @ F.T, gram(spec, X), atol=1e-14)


# csv -------------------------------------------------------------------------


def test_csv_roundtrip(tmp_path):
    X = np.random.default_rng(0).normal(size=(6, 3))
    p = tmp_path / "x.csv"
    save_csv(p, X, header=["a", "b", "c"])
    back = load_csv(p)
    np.testing.assert_array_equal(back.points, X)
    save_csv(p, X)
    np.testing.assert_array_equal(load_csv(p).points, X)


@pytest.mark.parametrize(
    "text,line",
    [("x,y\n1,2\n3\n", 3), ("1,2\n3,abc\n", 2), ("1\nnan\n", 2), ("a\n", None)],
)
def test_csv_errors(tmp_path, text, line):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(ConfigError) as info:
        load_csv(p)
    assert info.value.line == line


def test_sampleset_checks(spec):
    with pytest.raises(InputError):
        SampleSet(np.array([[0.5], [1.2]])).check_for(spec)
    with pytest.raises(InputError):
        SampleSet(np.array([[np.inf]]))
