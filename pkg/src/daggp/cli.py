"""Command-line entry point for the benchmark experiments.

Three subcommands mirror the experiment kinds:

    daggp fit --dag dag1 --model dag_gp_plus --out results.csv
    daggp al  --dag dag1 --model dag_gp_plus --budget 10 --out al.csv
    daggp bo  --dag dag1 --model dag_gp_plus --budget 30 --out bo.csv

``--out PATH.csv`` writes the CSV table plus a ``PATH.json`` sidecar with
aggregates, the model manifest hash, and wall time; without ``--out`` the
CSV goes to stdout.  Failures print one JSON error line to stderr and
exit nonzero.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .bench import ExperimentConfig, run_experiment

_COMMON_FLAGS = (
    ("--dag", dict(required=True, choices=("dag1", "dag2", "dag3"), help="benchmark model")),
    ("--model", dict(required=True,
                     choices=("dag_gp_plus", "dag_gp", "gp_plus", "gp", "do"),
                     help="surrogate variant")),
    ("--n-obs", dict(type=int, default=100, help="observational sample size")),
    ("--n-int", dict(type=int, default=None,
                     help="interventional points per task (default depends on the dag)")),
    ("--replicates", dict(type=int, default=10, help="independent replicates")),
    ("--seed", dict(type=int, default=0, help="master seed")),
    ("--grid", dict(type=int, default=50,
                    help="evaluation grid resolution (1-D count; higher dims scale down)")),
    ("--mc-samples", dict(type=int, default=None,
                          help="Monte Carlo budget for prior means and effect simulation "
                               "(default 300, with a tenth of it for cross-covariances)")),
    ("--noise-var", dict(type=float, default=None,
                         help="observation noise variance (default depends on the dag)")),
    ("--family", dict(choices=("rff", "affine"), default="rff",
                      help="conditional family for the fitted densities")),
    ("--truth-mc", dict(type=int, default=20000, help="oracle simulation budget")),
    ("--out", dict(default=None, help="CSV output path (JSON sidecar written next to it)")),
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="daggp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="kind", required=True)
    for kind, title in (("fit", "grid RMSE of the fitted functions"),
                        ("al", "greedy information-gain acquisition"),
                        ("bo", "expected-improvement optimization")):
        p = sub.add_parser(kind, help=title)
        for flag, kwargs in _COMMON_FLAGS:
            p.add_argument(flag, **kwargs)
        if kind in ("al", "bo"):
            p.add_argument("--budget", type=int, default=None,
                           help="acquisition steps (default: 10 for al, 30 for bo)")
        if kind == "al":
            p.add_argument("--strategy", choices=("mi", "random"), default="mi",
                           help="acquisition rule")
        if kind == "bo":
            p.add_argument("--objective", choices=("min", "max"), default="min",
                           help="optimization direction")
    return parser


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    mc = {} if args.mc_samples is None else dict(
        mean_samples=args.mc_samples,
        pair_samples=max(10, args.mc_samples // 10),
        effect_mc=args.mc_samples,
    )
    return ExperimentConfig(
        dag=args.dag,
        kind=args.kind,
        model=args.model,
        n_obs=args.n_obs,
        n_int=args.n_int,
        replicates=args.replicates,
        master_seed=args.seed,
        grid_resolution=args.grid,
        truth_mc=args.truth_mc,
        noise_var=args.noise_var,
        conditional_family=args.family,
        budget=getattr(args, "budget", None),
        strategy=getattr(args, "strategy", "mi"),
        objective=getattr(args, "objective", "min"),
        **mc,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _config_from_args(args)
        report = run_experiment(config)
        if args.out is None:
            sys.stdout.write(report.csv_text())
        else:
            report.write_csv(args.out)
            json_path = os.path.splitext(args.out)[0] + ".json"
            report.write_json(json_path)
            print(f"wrote {args.out} and {json_path}")
    except (ValueError, ArithmeticError, OSError) as exc:
        line = json.dumps({"error": type(exc).__name__, "message": str(exc)})
        print(line, file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
