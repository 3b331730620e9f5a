"""Convergence sweeps over ``n`` with schedule-driven ``ell``, ``m`` and ``t``.

Config files are plain text, one ``key = value`` per line. ``#`` starts a
comment. List values are comma separated and may be wrapped in brackets::

    kernel = spectral:alpha=2,D=200
    n = 200, 400, 800, 1600
    variants = ekpca, nystrom

Every key has a default except ``kernel`` and ``n``; the keys are the
fields of :class:`ExperimentConfig`.
"""

import csv
import logging
import math
import re
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, InputError, InsufficientDataError, RankError
from .estimators import fit as fit_model
from .kernels import KernelSpec, SampleSet, parse_kernel
from .oracle import build_oracle, effective_dim, effective_dim_infty, population_recon
from .recon import ProxyMean, recon_H, recon_L2

log = logging.getLogger(__name__)

ROW_FIELDS = ("variant", "norm", "n", "m", "ell", "t", "trial", "estimate", "se", "n_test", "seed")
RATE_FIELDS = ("group", "slope", "slope_se", "predicted", "R2", "pass")
THEORY_FIELDS = (
    "n", "ell", "t", "m_nystrom", "N_Sigma", "N_Cinf", "lambda_ell1", "R_pop", "T_pop",
    "R_upper", "R_nys_upper", "T_upper", "T_nys_upper", "m_threshold", "meets_threshold",
)
M_RULES = ("fixed", "full", "theta_log", "balanced_log")
VARIANT_NAMES = ("ekpca", "nystrom", "rff")
NORMS = ("H", "L2")
DELTA = 0.05


@dataclass
class ExperimentConfig:
    """One sweep. ``ell = ceil(n^(theta/alpha))`` for every cell.

    ``m_rule`` picks the Nystrom subsample size: ``fixed`` uses ``m``,
    ``full`` uses ``n``, ``theta_log`` uses ``ceil(m_const * n^theta * log n)``
    and ``balanced_log`` uses ``ceil(m_const * n^(alpha/(2 alpha - 1)) * log n)``.
    Random features use ``ceil(n^rff_gamma)`` unless ``rff_m`` is set.
    """

    kernel: str
    n: List[int]
    alpha: Optional[float] = None
    theta: float = 0.5
    m_rule: str = "theta_log"
    m_const: float = 3.0
    m: Optional[int] = None
    rff_gamma: float = 0.4
    rff_m: Optional[int] = None
    variants: List[str] = field(default_factory=lambda: ["ekpca", "nystrom"])
    norms: List[str] = field(default_factory=lambda: ["H", "L2"])
    trials: int = 1
    seed: int = 0
    dim: int = 1
    n_test: int = 10_000
    n_inner: int = 10_000
    proxy_factor: int = 10
    rtol: float = 1e-10
    tol_H: float = 0.1
    tol_L2: float = 0.12
    out_dir: str = "bench_out"
    rows_file: str = "rows.csv"
    rates_file: str = "rates.csv"
    plot_file: str = "plot.dat"
    theory_file: Optional[str] = None

    def __post_init__(self):
        self.spec = parse_kernel(self.kernel)
        if self.alpha is None:
            self.alpha = _infer_alpha(self.spec)
        if not self.alpha > 1:
            raise InputError(f"alpha must exceed 1, got {self.alpha}")
        if not 0 < self.theta <= self.alpha:
            raise InputError(f"theta must lie in (0, alpha], got {self.theta}")
        if not self.n or any(b <= a for a, b in zip(self.n, self.n[1:])):
            raise InputError("n schedule must be non-empty and strictly increasing")
        if self.n[0] < 3:
            raise InputError("every n must be at least 3")
        if self.trials < 1:
            raise InputError("trials must be at least 1")
        if self.m_rule not in M_RULES:
            raise InputError(f"m_rule must be one of {M_RULES}")
        if self.m_rule == "fixed" and self.m is None:
            raise InputError("m_rule = fixed needs m")
        for v in self.variants:
            if v not in VARIANT_NAMES:
                raise InputError(f"variants: unknown entry {v!r}")
        for s in self.norms:
            if s not in NORMS:
                raise InputError(f"norms: unknown entry {s!r}")
        if len(set(self.variants)) != len(self.variants) or len(set(self.norms)) != len(self.norms):
            raise InputError("variants and norms must not repeat")
        if self.spec.is_spectral and self.dim != 1:
            raise InputError("dim must be 1 for the spectral kernel, which lives on [0, 1]")
        if self.n_test < 2 or self.n_inner < 2:
            raise InputError("n_test and n_inner must be at least 2")

    # schedules --------------------------------------------------------------

    def ell(self, n: int) -> int:
        return int(math.ceil(n ** (self.theta / self.alpha) - 1e-12))

    def t(self, n: int) -> float:
        return float(n) ** (-min(self.theta, self.alpha / (2 * self.alpha - 1)))

    def m_nystrom(self, n: int) -> int:
        if self.m_rule == "fixed":
            m = self.m
        elif self.m_rule == "full":
            m = n
        else:
            expo = self.theta if self.m_rule == "theta_log" else self.alpha / (2 * self.alpha - 1)
            m = int(math.ceil(self.m_const * n**expo * math.log(n)))
        return min(int(m), n)

    def m_rff(self, n: int) -> int:
        if self.rff_m is not None:
            return int(self.rff_m)
        return int(math.ceil(n**self.rff_gamma - 1e-12))

    def predicted_slope(self, variant: str, norm: str) -> float:
        a, th = self.alpha, self.theta
        if norm == "H":
            return -min(th, 1.0) * (1 - 1 / a)
        l2 = -2 * th * (1 - 1 / (2 * a)) if th < a / (2 * a - 1) else -1.0
        if variant == "rff" and self.rff_m is None and self.rff_gamma < min(1.0, th * (2 - 1 / a)):
            return -self.rff_gamma
        return l2

    def tolerance(self, norm: str) -> float:
        return self.tol_H if norm == "H" else self.tol_L2


def _infer_alpha(spec: KernelSpec) -> float:
    # exact for a power-law profile: lam_2 / lam_1 = 2^-alpha
    if spec.is_spectral and len(spec.feature_eigenvalues) >= 2:
        lam = spec.lam
        return float(-math.log2(lam[1] / lam[0]))
    return 2.0


# ----------------------------------------------------------------------------
# config grammar

_LIST_INT = {"n"}
_LIST_STR = {"variants", "norms"}
_STR = {"kernel", "m_rule", "out_dir", "rows_file", "rates_file", "plot_file", "theory_file"}
_INT = {"trials", "seed", "dim", "n_test", "n_inner", "proxy_factor", "m", "rff_m"}
_KEYS = {f.name for f in fields(ExperimentConfig)}


def _convert(key: str, raw: str, lineno: int, path):
    def fail(msg):
        raise ConfigError(f"{key}: {msg}", line=lineno, path=path)

    if key in _STR:
        return raw
    if key in _LIST_INT or key in _LIST_STR:
        if raw.startswith("[") != raw.endswith("]"):
            fail("unbalanced brackets")
        body = raw[1:-1] if raw.startswith("[") else raw
        items = [s.strip() for s in body.split(",")]
        if any(s == "" for s in items):
            fail("empty list item")
        if key in _LIST_STR:
            return items
        return [_integer(s, fail) for s in items]
    if key in _INT:
        return _integer(raw, fail)
    try:
        return float(raw)
    except ValueError:
        fail(f"expected a number, got {raw!r}")


def _integer(raw: str, fail) -> int:
    try:
        v = float(raw)
    except ValueError:
        fail(f"expected an integer, got {raw!r}")
    if not math.isfinite(v) or v != int(v):
        fail(f"expected an integer, got {raw!r}")
    return int(v)


def parse_config_text(text: str, path=None) -> ExperimentConfig:
    values: Dict[str, object] = {}
    where: Dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        key, eq, raw = body.partition("=")
        key, raw = key.strip(), raw.strip()
        if not eq or not key:
            raise ConfigError(f"expected 'key = value', got {line.strip()!r}", line=lineno, path=path)
        if key not in _KEYS:
            raise ConfigError(f"unknown key {key!r}", line=lineno, path=path)
        if key in values:
            raise ConfigError(f"duplicate key {key!r} (first set on line {where[key]})", line=lineno, path=path)
        if raw == "":
            raise ConfigError(f"{key}: empty value", line=lineno, path=path)
        values[key] = _convert(key, raw, lineno, path)
        where[key] = lineno
    for required in ("kernel", "n"):
        if required not in values:
            raise ConfigError(f"missing required key {required!r}", path=path)
    try:
        return ExperimentConfig(**values)
    except InputError as exc:
        # point at the most likely offending line when there is one
        msg = str(exc)
        hits = [(m.start(), k) for k in where
                for m in [re.search(rf"(?<!\w){re.escape(k)}(?!\w)", msg)] if m]
        line = where[min(hits)[1]] if hits else None
        raise ConfigError(str(exc), line=line, path=path) from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", path=str(path)) from None
    return parse_config_text(text, str(path))


# ----------------------------------------------------------------------------
# sweep


@dataclass(frozen=True)
class BenchRow:
    variant: str
    norm: str
    n: int
    m: int
    ell: int
    t: float
    trial: int
    estimate: float
    se: float
    n_test: int
    seed: int

    def cells(self) -> List[str]:
        return [repr(v) if isinstance(v, float) else str(v) for v in (getattr(self, f) for f in ROW_FIELDS)]


@dataclass
class SweepResult:
    config: ExperimentConfig
    rows: List[BenchRow]
    theory: List[dict]
    skipped: List[Tuple[str, int, int, str]]


def _streams(seed: int, n: int, trial: int):
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(n, trial))
    return [np.random.default_rng(c) for c in ss.spawn(5)]


def theory_row(cfg: ExperimentConfig, oracle, kappa: float, n: int) -> dict:
    """Oracle quantities and bound values for one ``n`` at ``delta = 0.05``."""
    ell, t, m = cfg.ell(n), cfg.t(n), cfg.m_nystrom(n)
    NS = effective_dim(oracle, t)
    NC = effective_dim_infty(oracle, t)
    lam = oracle.sigma_eigs
    lam1 = float(lam[ell]) if ell < lam.size else 0.0
    R_pop, T_pop = population_recon(oracle, min(ell, oracle.D))
    lg = math.log(2 / DELTA)
    thr = max(max(67.0, 5 * NC) * math.log(4 * kappa / (t * DELTA)),
              140 * kappa / t * math.log(8 / (t * DELTA)))
    return {
        "n": n, "ell": ell, "t": t, "m_nystrom": m, "N_Sigma": NS, "N_Cinf": NC,
        "lambda_ell1": lam1, "R_pop": R_pop, "T_pop": T_pop,
        "R_upper": 3 * NS * (lam1 + t) + 32 * kappa * lg / n,
        "R_nys_upper": 6 * NS * (lam1 + 9 * t) + 32 * kappa * lg / n,
        "T_upper": 9 * NS * (lam1 + t) ** 2 + 64 * kappa**2 * lg / n,
        "T_nys_upper": 36 * NS * (lam1 + 9 * t) ** 2 + 32 * kappa**2 * lg / n,
        "m_threshold": thr,
        "meets_threshold": int(m >= thr),
    }


def run_sweep(cfg: ExperimentConfig) -> SweepResult:
    """Fit and score every (n, trial, variant, norm) cell of ``cfg``.

    All variants in a cell share the training sample and the test points, so
    their errors are directly comparable. Cells are seeded from
    ``(seed, n, trial)`` alone, which makes each cell reproducible on its own.
    """
    spec = cfg.spec
    oracle = build_oracle(spec) if spec.is_spectral else None
    kappa = spec.kappa if oracle is not None else None
    rows: List[BenchRow] = []
    theory: List[dict] = []
    skipped = []
    for n in cfg.n:
        ell, t = cfg.ell(n), cfg.t(n)
        if oracle is not None:
            th = theory_row(cfg, oracle, kappa, n)
            theory.append(th)
            log.info("n=%d ell=%d t=%.4g N_Sigma=%.4g N_Cinf=%.4g m=%d threshold=%.4g meets=%d",
                     n, ell, t, th["N_Sigma"], th["N_Cinf"], th["m_nystrom"], th["m_threshold"],
                     th["meets_threshold"])
        for trial in range(cfg.trials):
            g_sample, g_sub, g_rff, g_test, g_inner = _streams(cfg.seed, n, trial)
            X = SampleSet(g_sample.uniform(size=(n, cfg.dim)))
            Y = g_test.uniform(size=(cfg.n_test, cfg.dim))
            if oracle is not None:
                mean, inner = oracle, None
            else:
                mean = ProxyMean(spec, g_inner.uniform(size=(cfg.proxy_factor * n, cfg.dim)))
                inner = g_inner.uniform(size=(cfg.n_inner, cfg.dim)) if "L2" in cfg.norms else None
            for variant in cfg.variants:
                if variant == "nystrom":
                    m = cfg.m_nystrom(n)
                elif variant == "rff":
                    m = cfg.m_rff(n)
                else:
                    m = n
                if variant != "ekpca" and ell >= m:
                    skipped.append((variant, n, trial, f"ell={ell} >= m={m}"))
                    log.warning("skip %s n=%d trial=%d: ell=%d >= m=%d", variant, n, trial, ell, m)
                    continue
                seed_for = {"nystrom": g_sub, "rff": g_rff}.get(variant)
                try:
                    model = fit_model(spec, X, variant, ell, m=m, seed=seed_for, rtol=cfg.rtol)
                except RankError as exc:
                    if variant != "rff" or exc.achievable < 1:
                        skipped.append((variant, n, trial, str(exc)))
                        log.warning("skip %s n=%d trial=%d: %s", variant, n, trial, exc)
                        continue
                    # repeated feature draws span fewer directions than ell; the
                    # model then projects onto the whole random feature space
                    log.info("rff n=%d trial=%d: rank %d < ell=%d, using full rank",
                             n, trial, exc.achievable, ell)
                    model = fit_model(spec, X, variant, exc.achievable, m=m,
                                      seed=_streams(cfg.seed, n, trial)[2], rtol=cfg.rtol)
                for norm in cfg.norms:
                    if norm == "H" and variant == "rff":
                        continue
                    if norm == "H":
                        rep = recon_H(model, mean, Y)
                    else:
                        rep = recon_L2(model, mean, Y, inner=inner)
                    rows.append(BenchRow(variant, norm, n, m, model.ell, t, trial, rep.estimate, rep.se,
                                         rep.n_test, cfg.seed))
    rows.sort(key=lambda r: (VARIANT_NAMES.index(r.variant), NORMS.index(r.norm), r.n, r.trial))
    return SweepResult(cfg, rows, theory, skipped)


# ----------------------------------------------------------------------------
# rates


@dataclass(frozen=True)
class RateFit:
    group: str
    slope: float
    intercept: float
    slope_se: float
    r2: float
    n_values: Tuple[int, ...]
    means: Tuple[float, ...]
    ses: Tuple[float, ...]
    predicted: Optional[float] = None
    tolerance: Optional[float] = None

    @property
    def passed(self) -> Optional[bool]:
        if self.predicted is None or self.tolerance is None:
            return None
        return abs(self.slope - self.predicted) <= self.tolerance

    def cells(self) -> List[str]:
        p = self.passed
        return [self.group, repr(self.slope), repr(self.slope_se),
                "" if self.predicted is None else repr(self.predicted), repr(self.r2),
                "" if p is None else ("1" if p else "0")]


def cell_means(rows: Sequence[BenchRow], group: str):
    """Per-``n`` mean over trials and the standard error of that mean.

    With one trial per ``n`` the reported error is the test-point Monte Carlo SE.
    """
    variant, _, norm = group.partition(":")
    by_n: Dict[int, List[BenchRow]] = {}
    for r in rows:
        if r.variant == variant and r.norm == norm:
            by_n.setdefault(r.n, []).append(r)
    ns = sorted(by_n)
    means, ses = [], []
    for n in ns:
        est = np.array([r.estimate for r in by_n[n]])
        means.append(float(est.mean()))
        if est.size > 1:
            ses.append(float(est.std(ddof=1) / math.sqrt(est.size)))
        else:
            # a single trial only has its Monte Carlo error over test points
            ses.append(float(by_n[n][0].se))
    return ns, means, ses


def ols_loglog(x, y):
    """OLS fit of ``log y`` on ``log x``: (slope, intercept, slope_se, R^2)."""
    lx, ly = np.log(np.asarray(x, dtype=float)), np.log(np.asarray(y, dtype=float))
    A = np.column_stack([lx, np.ones_like(lx)])
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    resid = ly - A @ coef
    k = lx.size
    sxx = float(np.sum((lx - lx.mean()) ** 2))
    s2 = float(resid @ resid) / (k - 2) if k > 2 else 0.0
    sst = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / sst if sst > 0 else 1.0
    return float(coef[0]), float(coef[1]), math.sqrt(s2 / sxx), r2


def fit_rate(rows: Sequence[BenchRow], group: str, predicted: Optional[float] = None,
             tolerance: Optional[float] = None) -> RateFit:
    """Log-log least squares of the per-``n`` mean error on ``n`` for ``group = variant:norm``."""
    ns, means, ses = cell_means(rows, group)
    if len(ns) < 3:
        raise InsufficientDataError(f"{group}: need at least 3 distinct n values, got {len(ns)}")
    if min(means) <= 0:
        raise InputError(f"{group}: mean errors must be positive for a log-log fit")
    slope, icept, slope_se, r2 = ols_loglog(ns, means)
    return RateFit(group, slope, icept, slope_se, r2, tuple(ns), tuple(means), tuple(ses), predicted, tolerance)


def groups(rows: Sequence[BenchRow]) -> List[str]:
    seen = []
    for r in rows:
        g = f"{r.variant}:{r.norm}"
        if g not in seen:
            seen.append(g)
    return seen


def rate_fits(result: SweepResult) -> List[RateFit]:
    cfg = result.config
    fits = []
    for g in groups(result.rows):
        variant, _, norm = g.partition(":")
        try:
            fits.append(fit_rate(result.rows, g, cfg.predicted_slope(variant, norm), cfg.tolerance(norm)))
        except InsufficientDataError as exc:
            log.warning("no rate for %s", exc)
    return fits


# ----------------------------------------------------------------------------
# output


def _write_csv(path: Path, header, body):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(body)


def write_plot_data(path: Path, result: SweepResult):
    """One ``n mean se`` block per group, blocks separated by two blank lines."""
    gs = groups(result.rows)
    with open(path, "w") as fh:
        fh.write("# columns: x=n y=mean_error yerr=standard_error_over_trials\n")
        fh.write("# one block per series, select with gnuplot 'index':\n")
        for i, g in enumerate(gs):
            fh.write(f"#   index {i}: {g}\n")
        fh.write(f"# example: plot '{path.name}' index 0 using 1:2:3 with yerrorbars\n")
        for i, g in enumerate(gs):
            ns, means, ses = cell_means(result.rows, g)
            fh.write(f"\n\n# series {g}\n" if i else f"# series {g}\n")
            for n, y, e in zip(ns, means, ses):
                fh.write(f"{n} {y!r} {e!r}\n")


def write_outputs(result: SweepResult, out_dir=None) -> Dict[str, Path]:
    cfg = result.config
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"rows": out / cfg.rows_file, "rates": out / cfg.rates_file, "plot": out / cfg.plot_file}
    _write_csv(paths["rows"], ROW_FIELDS, [r.cells() for r in result.rows])
    _write_csv(paths["rates"], RATE_FIELDS, [f.cells() for f in rate_fits(result)])
    write_plot_data(paths["plot"], result)
    if cfg.theory_file:
        paths["theory"] = out / cfg.theory_file
        _write_csv(paths["theory"], THEORY_FIELDS,
                   [[repr(r[k]) if isinstance(r[k], float) else str(r[k]) for k in THEORY_FIELDS]
                    for r in result.theory])
    return paths
