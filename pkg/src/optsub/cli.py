"""
Command-line entry point: ``optsub theory|select|simulate|bench``.

Exit codes: 0 on success, 2 on bad input or configuration, 3 on a
numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from .distributions import FAMILIES, NORMAL, RngStream
from .errors import (
    ConfigError,
    DimensionMismatch,
    NonConvergence,
    NotPositiveDefinite,
    OptsubError,
    SingularInformation,
)
from .harness import (
    BenchConfig,
    ExperimentAborted,
    ExperimentConfig,
    bench_complexity,
    run_experiment,
    write_bench,
    write_outputs,
    write_records,
)
from .linalg import read_cov_csv, read_data_csv
from .subsamplers import ESTIMATED, KNOWN, METHODS, PILOT, THRESHOLD, SelectorConfig, select
from .theory import theory_table

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3

_NUMERIC_ERRORS = (NotPositiveDefinite, SingularInformation, NonConvergence, ExperimentAborted)


def _float_list(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _int_list(text):
    try:
        return [int(float(v)) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _parse_cov_source(text: str):
    """``known:PATH``, ``estimated`` or ``pilot[:FRAC]``."""
    if text == ESTIMATED:
        return ESTIMATED, None, None
    kind, _, arg = text.partition(":")
    if kind == KNOWN and arg:
        return KNOWN, read_cov_csv(arg), None
    if kind == PILOT:
        return PILOT, None, float(arg) if arg else None
    raise ConfigError(f"--cov must be known:PATH, estimated or pilot[:FRAC], got {text!r}")


def cmd_theory(args) -> int:
    rows = theory_table(args.d_list, args.alpha_list, args.family, args.nu, args.sigma_eps, args.mc_n, args.seed)
    out = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        w = csv.writer(out, lineterminator="\n")
        w.writerow(("d", "alpha", "q", "m2", "eff_unif", "approx_var"))
        for r in rows:
            w.writerow([r["d"], repr(r["alpha"]), repr(r["q"]), repr(r["m2"]), repr(r["eff_unif"]), repr(r["approx_var"])])
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_select(args) -> int:
    if (args.k is None) == (args.alpha is None):
        raise ConfigError("give exactly one of --k and --alpha")
    source, cov, frac = _parse_cov_source(args.cov)
    X = read_data_csv(args.input)
    if cov is not None and cov.d != X.d:
        raise DimensionMismatch(f"covariance has d={cov.d}, data has d={X.d}")
    config = SelectorConfig(
        method=args.method,
        k=args.k,
        alpha=args.alpha,
        cov_source=source,
        cov=cov,
        pilot_fraction=frac,
        family=args.family,
        nu=args.nu,
        keep_distances=False,
    )
    result = select(X, config, RngStream(args.seed))
    out = open(args.output, "w") if args.output else sys.stdout
    try:
        out.write(f"# k_achieved={result.k_achieved}\n")
        out.write(f"# elapsed_ms={1000.0 * result.elapsed:.3f}\n")
        out.write("index\n")
        out.writelines(f"{i}\n" for i in result.indices)
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_simulate(args) -> int:
    config = ExperimentConfig.from_file(args.config)
    out = Path(args.out)
    progress = None
    if args.verbose:
        def progress(n, v):
            print(f"n={n} replicate {v + 1}/{config.V}", file=sys.stderr)
    try:
        result = run_experiment(config, progress)
    except ExperimentAborted as exc:
        out.mkdir(parents=True, exist_ok=True)
        write_records(out / "records.csv", exc.partial.records)
        raise
    for path in write_outputs(result, out):
        print(path)
    return EXIT_OK


def cmd_bench(args) -> int:
    config = BenchConfig(n_list=args.n_list, d=args.d, k=args.k, rho=args.rho, repeats=args.repeats, seed=args.seed)
    result = bench_complexity(config)
    if args.output:
        write_bench(args.output, result)
    for method, n, ms in result.rows():
        print(f"{method:8s} n={n:<9d} median {ms:10.2f} ms")
    for method, slope in result.slopes.items():
        print(f"{method:8s} log-log slope {slope:.3f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="optsub", description="D-optimal subsampling for linear regression")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("theory", help="threshold, second moment and efficiency table")
    t.add_argument("--d-list", type=_int_list, required=True)
    t.add_argument("--alpha-list", type=_float_list, required=True)
    t.add_argument("--family", choices=FAMILIES, default=NORMAL)
    t.add_argument("--nu", type=float, default=None)
    t.add_argument("--sigma-eps", type=float, default=1.0)
    t.add_argument("--mc-n", type=int, default=1_000_000)
    t.add_argument("--seed", type=int, default=20_240_917)
    t.add_argument("--output", default=None)
    t.set_defaults(func=cmd_theory)

    s = sub.add_parser("select", help="select subdata from a CSV file")
    s.add_argument("--input", required=True)
    s.add_argument("--method", choices=METHODS, required=True)
    s.add_argument("--k", type=int, default=None)
    s.add_argument("--alpha", type=float, default=None)
    s.add_argument("--cov", default=ESTIMATED, help="known:PATH, estimated or pilot[:FRAC]")
    s.add_argument("--family", choices=FAMILIES, default=NORMAL, help=f"law used by --method {THRESHOLD}")
    s.add_argument("--nu", type=float, default=None)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--output", default=None)
    s.set_defaults(func=cmd_select)

    m = sub.add_parser("simulate", help="replicated determinant experiment")
    m.add_argument("--config", required=True)
    m.add_argument("--out", required=True)
    m.add_argument("--verbose", action="store_true")
    m.set_defaults(func=cmd_simulate)

    b = sub.add_parser("bench", help="selection time against n")
    b.add_argument("--n-list", type=_int_list, default=[100_000, 200_000, 400_000, 800_000])
    b.add_argument("--d", type=int, default=50)
    b.add_argument("--k", type=int, default=1000)
    b.add_argument("--rho", type=float, default=0.5)
    b.add_argument("--repeats", type=int, default=7)
    b.add_argument("--seed", type=int, default=11)
    b.add_argument("--output", default=None)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except _NUMERIC_ERRORS as exc:
        print(f"optsub: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OptsubError, ValueError, OSError) as exc:
        print(f"optsub: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
