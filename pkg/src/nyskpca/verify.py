"""Property checks run by ``nyskpca verify``.

Each check is a small numerical experiment returning pass/fail plus a one-line
detail. ``fast`` shrinks Monte Carlo sizes so the whole suite runs in well
under a minute; the full suite uses the sizes of the acceptance tests.
"""

import math
import time
import warnings
from dataclasses import dataclass
from typing import Callable, List, Tuple

import numpy as np

from . import linalg as la
from .bench import BenchRow, fit_rate, parse_config_text, run_sweep
from .estimators import (
    fit,
    fit_ekpca,
    fit_nystrom,
    fit_rff,
    gram_orthonormality,
    hoffman_wielandt_gap,
    nystrom_spectra,
    population_model,
    projected_eig_residuals,
    rff_covariance,
)
from .kernels import (
    KernelSpec,
    RffMap,
    SampleSet,
    gram,
    gram_cross,
    kernel_diag,
    spectral_features,
    subsample_uniform,
)
from .oracle import build_oracle, decay_constants, effective_dim_infty, mean_function, population_recon
from .recon import recon_H, recon_H_features, recon_L2

Outcome = Tuple[bool, str]


@dataclass(frozen=True)
class Check:
    module: str
    name: str
    reference: str
    run: Callable[[bool], Outcome]


@dataclass(frozen=True)
class CheckResult:
    module: str
    name: str
    reference: str
    passed: bool
    detail: str
    seconds: float


_REGISTRY: List[Check] = []


def check(module: str, reference: str):
    def deco(fn):
        _REGISTRY.append(Check(module, fn.__name__.removeprefix("check_"), reference, fn))
        return fn

    return deco


def _fixture():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        spec = KernelSpec.spectral_power(2.0, 200)
        return spec, build_oracle(spec)


def _random_psd(rng, d, rank):
    B = rng.standard_normal((d, rank))
    return B @ B.T


# ----------------------------------------------------------------------------
# linear algebra


@check("linalg", "spectral theorem for symmetric matrices")
def check_sym_eig(fast: bool) -> Outcome:
    rng = np.random.default_rng(1)
    worst_rec = worst_orth = 0.0
    for _ in range(5 if fast else 20):
        A = rng.standard_normal((20, 20))
        A = A + A.T
        e = la.sym_eig(A)
        worst_rec = max(worst_rec, np.linalg.norm(e.reconstruct() - A) / np.linalg.norm(A))
        V = e.eigenvectors
        worst_orth = max(worst_orth, np.max(np.abs(V.T @ V - np.eye(20))))
        if np.any(np.diff(e.eigenvalues) > 0):
            return False, "eigenvalues not descending"
    return worst_rec <= 1e-10 and worst_orth <= 1e-10, f"rec {worst_rec:.1e} orth {worst_orth:.1e}"


@check("linalg", "centering projector C_n")
def check_centering(fast: bool) -> Outcome:
    worst = 0.0
    for n in range(2, 51):
        C = la.centering_matrix(n)
        worst = max(worst, np.max(np.abs(C @ C - C)), np.max(np.abs(C - C.T)))
        w = np.linalg.eigvalsh(C)
        if np.sum(np.abs(w) < 1e-10) != 1:
            return False, f"null space of C_{n} is not one-dimensional"
    return worst <= 1e-12, f"max idempotency defect {worst:.1e}"


@check("linalg", "Moore-Penrose conditions")
def check_pinv(fast: bool) -> Outcome:
    rng = np.random.default_rng(2)
    worst = 0.0
    for rank in (3, 6, 8):
        A = _random_psd(rng, 8, rank)
        P = la.pinv_psd(A)
        worst = max(worst, np.linalg.norm(A @ P @ A - A) / np.linalg.norm(A),
                    np.linalg.norm(P @ A @ P - P) / np.linalg.norm(P))
    return worst <= 1e-8, f"max relative defect {worst:.1e}"


@check("linalg", "pseudo-inverse square root")
def check_inv_sqrt(fast: bool) -> Outcome:
    rng = np.random.default_rng(3)
    worst = 0.0
    for rank in (4, 8):
        A = _random_psd(rng, 8, rank)
        R = la.inv_sqrt_psd(A)
        P = la.pinv_psd(A)
        worst = max(worst, np.linalg.norm(R @ R - P) / np.linalg.norm(P))
        Q = R @ A @ R
        worst = max(worst, np.linalg.norm(Q @ Q - Q) / max(np.linalg.norm(Q), 1.0))
    return worst <= 1e-8, f"max relative defect {worst:.1e}"


# ----------------------------------------------------------------------------
# kernels


@check("kernels", "positive definite kernel (Gram PSD)")
def check_gram_psd(fast: bool) -> Outcome:
    worst_sym = worst_neg = 0.0
    for spec, d in ((KernelSpec.gaussian(0.5), 2), (KernelSpec.spectral_power(2.0, 200), 1),
                    (KernelSpec.polynomial(3, 1.0), 3)):
        X = SampleSet.uniform(60, 4, d)
        K = gram(spec, X.points)
        w = np.linalg.eigvalsh(K)
        worst_sym = max(worst_sym, np.max(np.abs(K - K.T)))
        worst_neg = max(worst_neg, -w[0] / w[-1])
    return worst_sym <= 1e-12 and worst_neg <= 1e-10, f"asym {worst_sym:.1e} neg {worst_neg:.1e}"


@check("kernels", "bounded kernel constant kappa")
def check_kappa(fast: bool) -> Outcome:
    spec, _ = _fixture()
    grid = np.linspace(0.0, 1.0, 10_001)
    gmax = float(np.max(kernel_diag(spec, grid[:, None])))
    kap = spec.kappa
    ok = abs(kap - gmax) <= 0.05 * gmax and kap <= spec.kappa_bound
    return ok, f"kappa {kap:.4f} grid {gmax:.4f} bound {spec.kappa_bound:.4f}"


@check("kernels", "subsampled Gram blocks")
def check_gram_cross(fast: bool) -> Outcome:
    spec = KernelSpec.gaussian(0.7)
    X = SampleSet.uniform(40, 5, 2).points
    rows = subsample_uniform(40, 9, 6)
    K = gram(spec, X)
    K_mm, K_nm = gram_cross(spec, X, rows)
    ok = np.array_equal(K_nm[rows], K_mm) and np.allclose(K_nm, K[:, rows], rtol=0, atol=1e-14)
    return ok, "K_nm[rows] == K_mm exactly"


@check("kernels", "random feature kernel approximation")
def check_rff_convergence(fast: bool) -> Outcome:
    spec = KernelSpec.gaussian(1.0)
    X = SampleSet.uniform(100, 7, 2).points
    K = gram(spec, X)
    errs = []
    for m in (64, 256, 1024, 4096):
        Z = RffMap.draw(2, m, 1.0, 8).features(X)
        errs.append(float(np.max(np.abs(Z @ Z.T - K))))
    ok = all(b <= 2.0 * a for a, b in zip(errs, errs[1:])) and errs[-1] < errs[0]
    return ok, "max errors " + ", ".join(f"{e:.3f}" for e in errs)


# ----------------------------------------------------------------------------
# oracle


@check("oracle", "covariance = uncentered operator minus mean outer product")
def check_oracle_identities(fast: bool) -> Outcome:
    _, o = _fixture()
    tr = abs(o.trace - (np.sum(o.feature_eigenvalues) - o.mP_sq_norm)) / o.trace
    inter = bool(np.all(o.sigma_eigs <= o.c_eigs + 1e-12 * o.c_eigs[0]))
    one = build_oracle(KernelSpec.spectral([1.0]))
    scalar = abs(one.sigma_eigs[0] - (1 - 8 / math.pi**2))
    ok = tr <= 1e-10 and inter and scalar <= 1e-14
    return ok, f"trace {tr:.1e} interlacing {inter} D=1 {scalar:.1e}"


@check("oracle", "polynomial decay hypothesis (refit constants)")
def check_decay_constants(fast: bool) -> Outcome:
    _, o = _fixture()
    A_lo, A_hi = decay_constants(o, 2.0, 50)
    i = np.arange(1, 51, dtype=float)
    lam = o.sigma_eigs[:50]
    ok = A_lo > 0 and np.all(A_lo * i**-2 <= lam * (1 + 1e-12)) and np.all(lam <= A_hi * i**-2 * (1 + 1e-12))
    return bool(ok), f"A {A_lo:.4f} <= lam_i i^2 <= {A_hi:.4f} for i <= 50"


@check("oracle", "sup effective dimension on a grid")
def check_ncinf_grid(fast: bool) -> Outcome:
    _, o = _fixture()
    coarse = effective_dim_infty(o, 0.01)
    fine = effective_dim_infty(o, 0.01, grid_size=100_000)
    rel = abs(fine - coarse) / fine
    return rel <= 0.01 and coarse <= fine + 1e-12, f"grid 1e4 {coarse:.4f} vs 1e5 {fine:.4f}"


@check("oracle", "reproducing property of the mean element")
def check_mean_element(fast: bool) -> Outcome:
    _, o = _fixture()
    x = np.random.default_rng(9).uniform(size=200_000 if fast else 1_000_000)
    v = mean_function(o, x[:, None])
    rel = abs(v.mean() - o.mP_sq_norm) / o.mP_sq_norm
    return rel <= 0.01, f"E m_P(X) {v.mean():.5f} vs |m_P|^2 {o.mP_sq_norm:.5f}"


# ----------------------------------------------------------------------------
# estimators


def _nystrom_case(seed, n=100, m=20, spec=None):
    spec = spec or _fixture()[0]
    X = SampleSet.uniform(n, seed).points
    rows = subsample_uniform(n, m, seed + 1000)
    K = gram(spec, X)
    K_mm, K_nm = gram_cross(spec, X, rows, K)
    return spec, X, rows, K, K_mm, K_nm


@check("estimators", "orthonormal eigenfunctions")
def check_orthonormality(fast: bool) -> Outcome:
    spec, X, rows, K, K_mm, K_nm = _nystrom_case(11)
    worst = 0.0
    me = fit_ekpca(K, 5, kernel=spec, points=X)
    mn = fit_nystrom(K_mm, K_nm, 100, 5, kernel=spec, points=X[rows])
    mr = fit(spec, X, "rff", 5, m=400, seed=12)
    for model, Kexp in ((me, K), (mn, K_mm), (mr, None)):
        worst = max(worst, np.max(np.abs(gram_orthonormality(model, Kexp) - np.eye(5))))
    return worst <= 1e-8, f"max |B K B^T - I| {worst:.1e}"


@check("estimators", "empirical eigen-equation")
def check_eig_residuals(fast: bool) -> Outcome:
    spec, X, rows, K, K_mm, K_nm = _nystrom_case(13)
    n = K.shape[0]
    me = fit_ekpca(K, 6)
    Cn = la.centering_matrix(n)
    worst = 0.0
    for i in range(me.ell):
        b = me.coefficients[i]
        r = Cn @ K @ b / (n - 1) - me.eigenvalues[i] * b
        worst = max(worst, np.linalg.norm(r) / (me.eigenvalues[0] * np.linalg.norm(b)))
    Z = spectral_features(spec, X)
    mr = fit_rff(Z, 6)
    S = rff_covariance(Z)
    for i in range(mr.ell):
        b = mr.coefficients[i]
        worst = max(worst, np.linalg.norm(S @ b - mr.eigenvalues[i] * b) / mr.eigenvalues[0])
    return worst <= 1e-8, f"max relative residual {worst:.1e}"


@check("estimators", "Nystrom with m = n equals EKPCA")
def check_degeneracy(fast: bool) -> Outcome:
    spec, _ = _fixture()
    worst_l = worst_angle = 0.0
    for seed in range(2 if fast else 5):
        X = SampleSet.uniform(50, seed).points
        K = gram(spec, X)
        rows = np.arange(50)
        me = fit_ekpca(K, 6)
        mn = fit_nystrom(K, K, 50, 6)
        worst_l = max(worst_l, np.max(np.abs(me.eigenvalues - mn.eigenvalues) / me.eigenvalues))
        # eigenspaces are only determined when the spectral gap after ell is visible
        if me.eigenvalues[4] - me.eigenvalues[5] <= 1e-6 * me.eigenvalues[0]:
            continue
        me, mn = me.truncate(5), mn.truncate(5)
        # principal angles in the RKHS metric: singular values of B_e K B_n^T
        s = np.linalg.svd(me.coefficients @ K @ mn.coefficients[:, rows].T, compute_uv=False)
        worst_angle = max(worst_angle, float(np.max(np.arccos(np.clip(s, -1, 1)))))
    return worst_l <= 1e-8 and worst_angle <= 1e-6, f"eig {worst_l:.1e} angle {worst_angle:.1e}"


@check("estimators", "K_tilde H_n and M share their spectrum")
def check_spectrum_identity(fast: bool) -> Outcome:
    worst = 0.0
    for seed in range(3 if fast else 10):
        *_, K_mm, K_nm = _nystrom_case(20 + seed)
        wM, wK = nystrom_spectra(K_mm, K_nm)
        worst = max(worst, np.max(np.abs(wM - wK)) / wM[0])
    return worst <= 1e-8, f"max |diff| / lam_1 {worst:.1e}"


@check("estimators", "projected eigen-equation for Nystrom eigenfunctions")
def check_projected_eig(fast: bool) -> Outcome:
    worst = 0.0
    for seed in range(2 if fast else 10):
        spec, X, rows, K, K_mm, K_nm = _nystrom_case(40 + seed)
        mn = fit_nystrom(K_mm, K_nm, 100, 5)
        worst = max(worst, np.max(projected_eig_residuals(mn, K_mm, K_nm)) / mn.eigenvalues[0])
    return worst <= 1e-7, f"max residual / lam_1 {worst:.1e}"


@check("estimators", "Rayleigh-Ritz domination")
def check_domination(fast: bool) -> Outcome:
    bad = 0
    reps = 10 if fast else 50
    for seed in range(reps):
        spec, X, rows, K, K_mm, K_nm = _nystrom_case(100 + seed, n=60, m=15)
        lt = fit_nystrom(K_mm, K_nm, 60, 5).eigenvalues
        lh = fit_ekpca(K, 5).eigenvalues
        bad += int(np.any(lt > lh * (1 + 1e-10)))
    return bad == 0, f"{bad} of {reps} fits violate lam_tilde <= lam_hat"


@check("estimators", "Hoffman-Wielandt inequality")
def check_hoffman_wielandt(fast: bool) -> Outcome:
    bad = 0
    reps = 5 if fast else 20
    ratio = 0.0
    for seed in range(reps):
        _, _, _, K, K_mm, K_nm = _nystrom_case(200 + seed)
        gap, bound = hoffman_wielandt_gap(K, K_mm, K_nm, 3)
        bad += int(gap > bound)
        ratio = max(ratio, gap / bound)
    return bad == 0, f"{bad} violations, max gap/bound {ratio:.3f}"


@check("estimators", "unbiased U-statistic covariance")
def check_unbiased(fast: bool) -> Outcome:
    spec = KernelSpec.spectral_power(2.0, 5)
    o = build_oracle(spec)
    res = u_statistic_bias(spec, reps=500 if fast else 2000, n=20, seed=77)
    z = np.max(np.abs(res["u_mean"] - o.sigma_matrix) / res["u_se"])
    vdiag = np.diag(res["v_mean"] - o.sigma_matrix)
    vtr = float(np.sum(vdiag) / res["v_trace_se"])
    ok = z <= 3.0 and np.all(vdiag < 0) and vtr < -3.0
    return bool(ok), f"U max z {z:.2f}; V trace z {vtr:.1f}"


def u_statistic_bias(spec: KernelSpec, reps: int, n: int, seed: int) -> dict:
    """Monte Carlo mean and standard error of the U- and V-statistic covariance in feature coordinates."""
    rng = np.random.default_rng(seed)
    D = len(spec.feature_eigenvalues)
    U = np.empty((reps, D, D))
    Vtr = np.empty(reps)
    for r in range(reps):
        Z = spectral_features(spec, rng.uniform(size=(n, 1)))
        U[r] = rff_covariance(Z)
        Vtr[r] = np.trace(U[r]) * (n - 1) / n
    V = U * ((n - 1) / n)
    return {
        "u_mean": U.mean(0),
        "u_se": U.std(0, ddof=1) / math.sqrt(reps),
        "v_mean": V.mean(0),
        "v_trace_se": float(Vtr.std(ddof=1) / math.sqrt(reps)),
    }


# ----------------------------------------------------------------------------
# reconstruction error


@check("recon", "population reconstruction error equals the eigenvalue tail")
def check_population_identity(fast: bool) -> Outcome:
    _, o = _fixture()
    Y = SampleSet.uniform(20_000 if fast else 100_000, 31).points
    worst = 0.0
    for ell in (1, 3, 10):
        pm = population_model(o, ell)
        R, T = population_recon(o, ell)
        h, l2 = recon_H(pm, o, Y), recon_L2(pm, o, Y)
        worst = max(worst, abs(h.estimate - R) / h.se, abs(l2.estimate - T) / l2.se)
    return worst <= 3.0, f"max |z| {worst:.2f}"


@check("recon", "population lower bounds")
def check_lower_bounds(fast: bool) -> Outcome:
    spec, o = _fixture()
    reps = 3 if fast else 20
    n = 200 if fast else 500
    Y = SampleSet.uniform(5000, 32).points
    worst = math.inf
    for seed in range(reps):
        X = SampleSet.uniform(n, 300 + seed).points
        for ell in (1, 3, 10):
            R, T = population_recon(o, ell)
            me = fit(spec, X, "ekpca", ell)
            mn = fit(spec, X, "nystrom", ell, m=60, seed=seed)
            for model in (me, mn):
                h = recon_H(model, o, Y)
                worst = min(worst, (h.estimate - R) / h.se)
            l2 = recon_L2(mn, o, Y)
            worst = min(worst, (l2.estimate - T) / l2.se)
    return worst >= -3.0, f"min (estimate - bound) / SE {worst:.2f}"


@check("recon", "nested projections cannot increase the RKHS residual")
def check_monotone_ell(fast: bool) -> Outcome:
    spec, o = _fixture()
    X = SampleSet.uniform(150, 33).points
    Y = SampleSet.uniform(2000, 34).points
    me = fit(spec, X, "ekpca", 12)
    from .recon import OracleMean

    # with the true mean projected out the identity is exact; see monotone_model
    mt = monotone_model(me, OracleMean(o))
    vals = [recon_H(mt, o, Y, ell=k).estimate for k in range(13)]
    ok = all(b <= a + 1e-12 * vals[0] for a, b in zip(vals, vals[1:]))
    return ok, f"R from {vals[0]:.4f} down to {vals[-1]:.4f}"


def monotone_model(model, mean):
    """Copy of ``model`` centered with the true mean element instead of the sample mean."""
    import dataclasses

    return dataclasses.replace(model, center=mean.inner(model))


@check("recon", "kernel and feature coordinate routes agree")
def check_route_equivalence(fast: bool) -> Outcome:
    spec, o = _fixture()
    X = SampleSet.uniform(120, 35).points
    Y = SampleSet.uniform(3000, 36).points
    worst = 0.0
    for variant, m in (("ekpca", None), ("nystrom", 40)):
        model = fit(spec, X, variant, 4, m=m, seed=1)
        a = recon_H(model, o, Y).estimate
        b = recon_H_features(model, o, Y).estimate
        worst = max(worst, abs(a - b) / a)
    return worst <= 1e-6, f"max relative difference {worst:.1e}"


@check("recon", "Nystrom with m = n reproduces EKPCA errors")
def check_recon_degeneracy(fast: bool) -> Outcome:
    spec, o = _fixture()
    worst = 0.0
    Y = SampleSet.uniform(2000, 37).points
    for seed in range(2 if fast else 5):
        X = SampleSet.uniform(50, 400 + seed).points
        me = fit(spec, X, "ekpca", 4)
        mn = fit(spec, X, "nystrom", 4, m=50, seed=seed)
        for f in (recon_H, recon_L2):
            a, b = f(me, o, Y).estimate, f(mn, o, Y).estimate
            worst = max(worst, abs(a - b) / a)
    return worst <= 1e-6, f"max relative difference {worst:.1e}"


# ----------------------------------------------------------------------------
# bench


@check("bench", "log-log least squares")
def check_fit_rate(fast: bool) -> Outcome:
    rows = [BenchRow("ekpca", "H", n, n, 1, 0.1, 0, 3.0 * n**-0.25, 0.0, 10, 0) for n in (100, 200, 400, 800)]
    r = fit_rate(rows, "ekpca:H")
    return abs(r.slope + 0.25) <= 1e-12, f"slope {r.slope:.15f}"


@check("bench", "deterministic sweeps")
def check_determinism(fast: bool) -> Outcome:
    text = "kernel = spectral:alpha=2,D=50\nn = 30, 40, 50\nvariants = ekpca, nystrom, rff\nn_test = 200\nseed = 5\n"
    a = run_sweep(parse_config_text(text)).rows
    b = run_sweep(parse_config_text(text)).rows
    return [r.cells() for r in a] == [r.cells() for r in b], f"{len(a)} rows compared"


@check("bench", "RKHS-norm convergence rate")
def check_rate(fast: bool) -> Outcome:
    if fast:
        text = "kernel = spectral:alpha=2,D=200\nn = 100, 200, 400, 800\nvariants = ekpca\nnorms = H\ntrials = 8\nseed = 11\nn_test = 4000\n"
    else:
        text = "kernel = spectral:alpha=2,D=200\nn = 200, 400, 800, 1600\nvariants = ekpca\nnorms = H\ntrials = 20\nseed = 11\n"
    cfg = parse_config_text(text)
    r = fit_rate(run_sweep(cfg).rows, "ekpca:H", cfg.predicted_slope("ekpca", "H"), cfg.tol_H)
    return bool(r.passed), f"slope {r.slope:.3f} predicted {r.predicted:.3f}"


# ----------------------------------------------------------------------------


def checks() -> List[Check]:
    return list(_REGISTRY)


def run_checks(fast: bool = False, selected=None) -> List[CheckResult]:
    out = []
    for c in _REGISTRY:
        if selected and c.name not in selected:
            continue
        t0 = time.perf_counter()
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                ok, detail = c.run(fast)
        except Exception as exc:  # a crashing check is a failing check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        out.append(CheckResult(c.module, c.name, c.reference, bool(ok), detail, time.perf_counter() - t0))
    return out


def format_table(results: List[CheckResult]) -> str:
    headers = ("module", "check", "reference", "status", "time", "detail")
    body = [(r.module, r.name, r.reference, "PASS" if r.passed else "FAIL", f"{r.seconds:.1f}s", r.detail)
            for r in results]
    widths = [max(len(h), *(len(row[i]) for row in body)) if body else len(h) for i, h in enumerate(headers)]
    widths[-1] = len(headers[-1])
    line = lambda cells: "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
    lines = [line(headers), line(["-" * w for w in widths])]
    lines += [line(row) for row in body]
    n_fail = sum(not r.passed for r in results)
    lines.append(f"{len(results) - n_fail} passed, {n_fail} failed")
    return "\n".join(lines)
