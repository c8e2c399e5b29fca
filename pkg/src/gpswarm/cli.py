"""``gpswarm`` command line: single runs, experiments, significance tables and the illustrative dump.

Exit codes: 0 success, 2 configuration error, 1 anything else.
"""

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .benchfns import DOMAIN_PRESETS, REGISTRY, function_names, make_function, make_spec
from .config import bundled_config, load_experiment
from .core import ConfigurationError
from .harness import (MissingCell, default_parallelism, emit_convergence_data, run_experiment,
                      significance_table, write_experiment, write_significance)
from .memory import MemoryConfig
from .optimizer import VARIANTS, PsoParams, RunConfig, run

EXIT_OK, EXIT_INTERNAL, EXIT_CONFIG = 0, 1, 2

log = logging.getLogger("gpswarm")


def _bounds(text):
    if text in DOMAIN_PRESETS:
        return text
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected a preset ({', '.join(DOMAIN_PRESETS)}) or 'low,high', got {text!r}") from None
    return (lo, hi)


def _add_gp_flags(p):
    p.add_argument("--refit-every", type=int, help="iterations between hyperparameter refits")
    p.add_argument("--fit-restarts", type=int, help="Nelder-Mead restarts per refit")
    p.add_argument("--memory-cap", type=int, help="maximum memory size (default 25 * n_par)")
    p.add_argument("--rho", type=float, help="memory surprise threshold")


def build_parser():
    parser = argparse.ArgumentParser(prog="gpswarm", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"gpswarm {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="one optimizer run")
    p.add_argument("--variant", default="spso2011", help=f"one of {', '.join(VARIANTS)}")
    p.add_argument("--function", default="sphere")
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--budget", type=int, help="evaluations (default 100 * dim)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-par", type=int, default=50)
    p.add_argument("--bounds", type=_bounds, help="domain preset or 'low,high'")
    p.add_argument("--shifted", action="store_true")
    p.add_argument("--rotated", action="store_true")
    p.add_argument("--instance-seed", type=int, default=0, help="seed for shift and rotation")
    p.add_argument("--record-every", type=int)
    p.add_argument("--ball", default="linear", help="SPSO2011 radius law: linear (default) or volume")
    p.add_argument("--out", default="gpswarm-run")
    _add_gp_flags(p)

    p = sub.add_parser("experiment", help="multi-run experiment from a TOML/JSON config")
    p.add_argument("--config", help="config file (default: bundled desk_scale.toml)")
    p.add_argument("--out", default="gpswarm-experiment")
    p.add_argument("--parallelism", type=int, help="worker processes (default $GPSWARM_THREADS or 1)")
    p.add_argument("--runs", type=int)
    p.add_argument("--budget-per-dim", type=int)
    p.add_argument("--base-seed", type=int)
    p.add_argument("--pooled-variance", action="store_true", default=None)
    p.add_argument("--no-traces", action="store_true")
    _add_gp_flags(p)

    p = sub.add_parser("significance", help="one-sided t-tests from a runs.csv")
    p.add_argument("runs_csv")
    p.add_argument("--reference", required=True, help="reference variant")
    p.add_argument("--pooled-variance", action="store_true")
    p.add_argument("--out", help="write the table here instead of stdout")

    p = sub.add_parser("illustrate", help="C1 on 2-D Ackley with surrogate snapshots")
    p.add_argument("--out", default="gpswarm-illustrate")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds to run")
    p.add_argument("--refit-every", type=int, default=5)
    p.add_argument("--fit-restarts", type=int, default=10)

    sub.add_parser("list-functions", help="registered benchmark functions")
    return parser


def cmd_run(args):
    spec = make_spec(args.function, args.dim, seed=args.instance_seed, shifted=args.shifted,
                     rotated=args.rotated, bounds=args.bounds)
    params = PsoParams.preset(args.variant, n_par=args.n_par, ball=args.ball)
    mem = MemoryConfig(**{k: v for k, v in (("rho", args.rho), ("cap", args.memory_cap)) if v is not None})
    cfg_kw = {k: v for k, v in (("refit_every", args.refit_every), ("fit_restarts", args.fit_restarts),
                                ("record_every", args.record_every)) if v is not None}
    cfg = RunConfig(budget=args.budget or 100 * args.dim, seed=args.seed, memory_cfg=mem, **cfg_kw)
    record = run(make_function(spec), spec.domain, params, cfg, function_name=spec.label)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    emit_convergence_data([record], out / "trace.csv")
    summary = record.summary()
    summary["offset"] = spec.offset
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
    print(f"best value {record.best_value:.10g} after {record.n_evals} evaluations")
    return EXIT_OK


def cmd_experiment(args):
    path = args.config or bundled_config()
    overrides = {"runs": args.runs, "budget_per_dim": args.budget_per_dim, "base_seed": args.base_seed,
                 "refit_every": args.refit_every, "fit_restarts": args.fit_restarts,
                 "memory_cap": args.memory_cap, "rho": args.rho, "pooled_variance": args.pooled_variance}
    e = load_experiment(path, overrides)
    parallelism = args.parallelism or default_parallelism() or 1
    if parallelism < 1:
        raise ConfigurationError("--parallelism must be positive")

    def progress(done, total):
        log.info("%d/%d runs done", done, total)

    result = run_experiment(e, parallelism=parallelism, progress=progress)
    paths = write_experiment(e, result, args.out, write_traces=not args.no_traces)
    for row in result.summary:
        print(f"{row.function:>14} {row.variant:>9}  mean {row.mean:.6g}  median {row.median:.6g}")
    print(f"wrote {paths['summary']}")
    if not result.complete:
        print(f"{len(result.failures)} run(s) failed; see manifest.json", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


def cmd_significance(args):
    try:
        with open(args.runs_csv, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ConfigurationError(f"cannot read {args.runs_csv}: {exc}") from exc
    missing = {"function", "variant", "best_value"} - set(rows[0] if rows else {})
    if missing:
        raise ConfigurationError(f"{args.runs_csv}: missing column(s) {', '.join(sorted(missing))}")
    values = {}
    for r in rows:
        values.setdefault((r["function"], r["variant"]), []).append(float(r["best_value"]))
    if not any(v == args.reference for _, v in values):
        raise ConfigurationError(f"reference variant {args.reference!r} not found in {args.runs_csv}")
    try:
        table = significance_table(values, args.reference, pooled=args.pooled_variance)
    except MissingCell as exc:
        raise ConfigurationError(str(exc)) from exc
    if args.out:
        write_significance(table, args.out)
    for row in table:
        flag = "*" if row.significant else " "
        print(f"{row.function:>14} {row.reference} < {row.other:<9} t={row.t: .4f} p={row.p:.4g} {flag}")
    return EXIT_OK


def cmd_illustrate(args):
    from .illustrate import illustrate

    if args.seeds < 1:
        raise ConfigurationError("--seeds must be positive")
    records = illustrate(args.out, seed=args.seed, seeds=args.seeds, refit_every=args.refit_every,
                         fit_restarts=args.fit_restarts)
    for rec in records:
        print(f"seed {rec.seed}: best {rec.best_value:.6g}")
    return EXIT_OK


def cmd_list_functions(args):
    for name in function_names():
        entry = REGISTRY[name]
        lo, hi = entry.bounds
        print(f"{name:<22} default domain [{lo:g}, {hi:g}]  min dim {entry.min_dim}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "experiment": cmd_experiment, "significance": cmd_significance,
            "illustrate": cmd_illustrate, "list-functions": cmd_list_functions}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigurationError as exc:
        print(f"gpswarm: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyboardInterrupt:
        print("gpswarm: interrupted", file=sys.stderr)
        return 130
    except Exception as exc:  # noqa: BLE001 - mapped to the internal-error exit code
        log.debug("internal error", exc_info=True)
        print(f"gpswarm: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
