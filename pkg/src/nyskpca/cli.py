"""Command line interface: ``nyskpca verify | bench | fit | embed``.

Exit codes: 0 on success, 1 when a verification check fails, 2 on bad input
(malformed files, invalid parameters, infeasible rank).
"""

import argparse
import logging
import sys
import warnings

import numpy as np

from .errors import InputError, RankError

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_INPUT = 2

log = logging.getLogger("nyskpca")


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which matches EXIT_INPUT
    pass


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nyskpca", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run the property suite")
    v.add_argument("--fast", action="store_true", help="smaller Monte Carlo sizes")
    v.add_argument("--check", action="append", metavar="NAME", help="run only the named check (repeatable)")
    v.add_argument("--list", action="store_true", help="list checks and exit")

    b = sub.add_parser("bench", help="run a convergence sweep from a config file")
    b.add_argument("--config", required=True, help="key = value config file")
    b.add_argument("--out-dir", help="override the config's out_dir")
    b.add_argument("--seed", type=int, help="override the config's seed")

    f = sub.add_parser("fit", help="fit a model on a CSV dataset")
    f.add_argument("--data", required=True, help="CSV, one point per row")
    f.add_argument("--kernel", required=True, help="e.g. gaussian:sigma=0.5 or spectral:alpha=2,D=200")
    f.add_argument("--variant", required=True, choices=("ekpca", "nystrom", "rff"))
    f.add_argument("--ell", required=True, type=int, help="number of components")
    f.add_argument("--m", type=int, help="subsample size (nystrom) or feature count (rff)")
    f.add_argument("--seed", type=int, default=0, help="seed for subsampling or feature draws")
    f.add_argument("--rtol", type=float, default=1e-10, help="relative spectral threshold")
    f.add_argument("--out", required=True, help="model JSON path")

    e = sub.add_parser("embed", help="evaluate a model's eigenfunctions on a CSV dataset")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--centered", action="store_true", help="subtract the fitted sample mean projection")
    return p


def cmd_verify(args) -> int:
    from .verify import checks, format_table, run_checks

    if args.list:
        for c in checks():
            print(f"{c.module:11s} {c.name:22s} {c.reference}")
        return EXIT_OK
    known = {c.name for c in checks()}
    for name in args.check or ():
        if name not in known:
            raise InputError(f"unknown check {name!r}")
    results = run_checks(fast=args.fast, selected=args.check)
    print(format_table(results))
    return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY


def cmd_bench(args) -> int:
    import dataclasses

    from .bench import load_config, run_sweep, write_outputs

    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    result = run_sweep(cfg)
    paths = write_outputs(result, args.out_dir)
    for kind, path in paths.items():
        print(f"{kind}: {path}")
    for variant, n, trial, why in result.skipped:
        print(f"skipped {variant} n={n} trial={trial}: {why}", file=sys.stderr)
    return EXIT_OK


def cmd_fit(args) -> int:
    from .estimators import fit
    from .kernels import load_csv, parse_kernel
    from .modelio import save_model

    spec = parse_kernel(args.kernel)
    data = load_csv(args.data)
    data.check_for(spec)
    if args.variant != "ekpca" and args.m is None:
        raise InputError(f"--m is required for variant {args.variant}")
    try:
        model = fit(spec, data, args.variant, args.ell, m=args.m, seed=args.seed, rtol=args.rtol)
    except RankError as exc:
        raise InputError(f"{exc} (achievable rank {exc.achievable})") from None
    save_model(model, args.out)
    print(f"fitted {model.variant}: n={model.n} m={model.m} ell={model.ell} -> {args.out}")
    return EXIT_OK


def cmd_embed(args) -> int:
    from .estimators import embed
    from .kernels import load_csv, save_csv
    from .modelio import load_model

    model = load_model(args.model)
    data = load_csv(args.data)
    if model.kernel is not None:
        data.check_for(model.kernel)
    Phi = embed(model, data.points)
    if args.centered:
        Phi = Phi - model.center
    save_csv(args.out, Phi, header=[f"phi_{i + 1}" for i in range(model.ell)])
    return EXIT_OK


COMMANDS = {"verify": cmd_verify, "bench": cmd_bench, "fit": cmd_fit, "embed": cmd_embed}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if not args.verbose:
        warnings.simplefilter("ignore", RuntimeWarning)
    np.seterr(all="ignore")
    try:
        return COMMANDS[args.command](args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
