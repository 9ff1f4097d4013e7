"""Command-line entry point.

Subcommands:
    run          --config <path> [--limiter on|off] [--out <dir>]
    convergence  --preset <name> --degrees <list> --levels <int> [--out <dir>]
    bench-dr     [--sizes <list>] [--neg-frac 0.05] [--reps 100] [--impl ...]
"""
import argparse
import sys
from dataclasses import replace

from ..errors import ConfigError, ConvergenceError, InfeasibleError, SolverError
from .bench import DEFAULT_SIZES, dr_benchmark, format_bench_table, write_bench_csv
from .config import parse_config_file
from .presets import run_convergence, run_preset


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="fpdg",
        description="Positivity-preserving semi-implicit DG experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment from a config file")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--limiter", choices=["on", "off"])
    p_run.add_argument("--out", help="output directory override")

    p_conv = sub.add_parser("convergence", help="run a refinement ladder")
    p_conv.add_argument("--preset", required=True,
                        choices=["ou_accuracy", "anisotropic"])
    p_conv.add_argument("--degrees", default="2",
                        help="comma-separated polynomial degrees, e.g. 2,3")
    p_conv.add_argument("--levels", type=int, default=2)
    p_conv.add_argument("--limiter", choices=["on", "off"], default="on")
    p_conv.add_argument("--out", default=".")

    p_bench = sub.add_parser("bench-dr", help="time the projection kernel")
    p_bench.add_argument("--sizes", default=",".join(str(s) for s in DEFAULT_SIZES))
    p_bench.add_argument("--neg-frac", type=float, default=0.05)
    p_bench.add_argument("--reps", type=int, default=100)
    p_bench.add_argument("--impl", default="auto",
                         choices=["auto", "python", "compiled", "both"])
    p_bench.add_argument("--out", help="also write the table to <out>/bench_dr.csv")
    return parser


def _cmd_run(args) -> int:
    config = parse_config_file(args.config)
    if args.limiter is not None:
        config = replace(config, limiter=args.limiter == "on")
    if args.out is not None:
        config = replace(config, out_dir=args.out)
    art = run_preset(config)
    print(f"wrote {art.diagnostics_path}")
    if art.dump_path:
        print(f"wrote {art.dump_path}")
    if art.l2h_final is not None:
        print(f"final L2h error  : {art.l2h_final:.6e}")
        print(f"final Linf error : {art.linf_final:.6e}")
    if art.sigma_final is not None:
        print(f"final covariance diag: {art.sigma_final[0,0]:.6e} {art.sigma_final[1,1]:.6e}")
    if art.result is not None:
        print(f"mass drift       : {art.result.mass_drift:.3e}")
    return 0


def _cmd_convergence(args) -> int:
    degrees = [int(d) for d in args.degrees.split(",") if d]
    outputs = run_convergence(args.preset, degrees, args.levels, args.out,
                              limiter=args.limiter == "on")
    for degree, (path, rows) in outputs.items():
        print(f"k={degree}: wrote {path}")
        for dx, tau, e1, r1, e2, r2 in rows:
            r1s = f"{r1:6.3f}" if r1 is not None else "     -"
            r2s = f"{r2:6.3f}" if r2 is not None else "     -"
            print(f"  dx={dx:<10.6g} tau={tau:<9.3g} err1={e1:.4e} rate {r1s}"
                  f"  err2={e2:.4e} rate {r2s}")
    return 0


def _cmd_bench(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",") if s]
    impls = ["python", "compiled"] if args.impl == "both" else [args.impl]
    all_rows = []
    for impl in impls:
        rows = dr_benchmark(sizes=sizes, neg_frac=args.neg_frac,
                            reps=args.reps, impl=impl)
        print(format_bench_table(rows))
        all_rows.extend(rows)
    if args.out:
        import os

        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "bench_dr.csv")
        write_bench_csv(path, all_rows)
        print(f"wrote {path}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "convergence":
            return _cmd_convergence(args)
        if args.command == "bench-dr":
            return _cmd_bench(args)
    except ConfigError as exc:
        parser.exit(2, f"error: {exc}\n")
    except (SolverError, ConvergenceError, InfeasibleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
