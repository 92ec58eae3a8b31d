"""``pbdfs`` command line: gen, label, train, predict, eval-ml, heuristic, report.

Exit codes: 0 success, 1 runtime error, 2 usage error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import asdict

from . import bench
from .generators import PROBLEMS
from .mip import InstanceFormatError
from .predictor import ModelFormatError
from .search import VARIANTS

log = logging.getLogger("pbdfs")


class UsageError(Exception):
    pass


def _config(args, **overrides) -> bench.ExperimentConfig:
    overrides = {k: v for k, v in overrides.items() if v is not None}
    try:
        if args.config:
            return bench.ExperimentConfig.load(args.config, **overrides)
        return bench.ExperimentConfig(**overrides)
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"bad configuration: {exc}") from exc


def _run_gen(args):
    cfg = _config(args, problem=args.problem, seed=args.seed, affinity=args.affinity)
    count = args.count if args.count is not None else (cfg.n_train if args.scale == "small" else cfg.n_test)
    if count < 1:
        raise UsageError("--count must be >= 1")
    paths = bench.cmd_gen(cfg, args.out, args.scale, count)
    print(f"wrote {len(paths)} instances to {paths[0].parent}")


def _run_label(args):
    cfg = _config(args)
    counts = bench.cmd_label(
        args.dataset,
        node_limit=args.node_limit if args.node_limit is not None else cfg.label_node_limit,
        time_limit=args.time_limit if args.time_limit is not None else cfg.label_time_limit,
    )
    print(" ".join(f"{k}={v}" for k, v in counts.items()))


def _run_train(args):
    cfg = _config(args, model=args.model, seed=args.seed, epochs=args.epochs, lr=args.lr,
                  nlayers=args.nlayers, hidden=args.hidden)
    out = bench.cmd_train(args.dataset, cfg, args.out)
    print(f"model written to {out}")


def _run_predict(args):
    n = bench.cmd_predict(args.dataset, args.model)
    print(f"wrote probabilities for {n} instances")


def _run_eval(args):
    rows = bench.cmd_eval_ml(args.dataset, args.model, args.out)
    for r in rows:
        if r["instance"] == "mean":
            print(f"{r['scale']}: mean AP {r['ap']:.4f} (prevalence {r['prevalence']:.4f}, {r['n']} instances)")


def _run_heuristic(args):
    cfg = _config(args, variant=args.variant, termination=args.termination)
    if cfg.variant not in VARIANTS:
        raise UsageError(f"unknown variant {cfg.variant!r}")
    row = bench.cmd_heuristic(args.dataset, args.method, args.out, args.model, cfg.variant, cfg.termination)
    print(", ".join(f"{k}={v}" for k, v in asdict(row).items()))


def _run_report(args):
    for row in bench.cmd_report(args.results, args.out):
        print(", ".join(f"{k}={v}" for k, v in asdict(row).items()))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pbdfs", description="Probabilistic-branching DFS experiment pipeline")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="log progress at INFO level")
    sub = p.add_subparsers(dest="command", required=True)

    def cmd(name, fn, help_text, config=True):
        s = sub.add_parser(name, help=help_text, parents=[common])
        if config:
            s.add_argument("--config", help="TOML or JSON experiment config")
        s.set_defaults(func=fn)
        return s

    s = cmd("gen", _run_gen, "generate instances")
    s.add_argument("--problem", choices=PROBLEMS)
    s.add_argument("--scale", choices=bench.SCALES, default="small")
    s.add_argument("--count", type=int)
    s.add_argument("--seed", type=int, help="first seed; seeds run seed..seed+count-1")
    s.add_argument("--affinity", type=int)
    s.add_argument("--out", required=True, help="dataset root directory")

    s = cmd("label", _run_label, "solve instances exactly and write labels")
    s.add_argument("dataset")
    s.add_argument("--node-limit", type=int)
    s.add_argument("--time-limit", type=float)

    s = cmd("train", _run_train, "train a prediction model")
    s.add_argument("dataset", nargs="+")
    s.add_argument("--model", choices=("gcn", "lr"))
    s.add_argument("--seed", type=int)
    s.add_argument("--epochs", type=int)
    s.add_argument("--lr", type=float)
    s.add_argument("--nlayers", type=int)
    s.add_argument("--hidden", type=int)
    s.add_argument("--out", required=True, help="model file")

    s = cmd("predict", _run_predict, "write probability vectors", config=False)
    s.add_argument("dataset")
    s.add_argument("--model", required=True)

    s = cmd("eval-ml", _run_eval, "average precision per instance and scale", config=False)
    s.add_argument("dataset", nargs="+")
    s.add_argument("--model", required=True)
    s.add_argument("--out", required=True, help="CSV file")

    s = cmd("heuristic", _run_heuristic, "run a primal heuristic on every instance")
    s.add_argument("dataset")
    s.add_argument("--method", choices=bench.METHODS, required=True)
    s.add_argument("--model")
    s.add_argument("--variant")
    s.add_argument("--termination", help="first_feasible, time:S, nodes:N or none")
    s.add_argument("--out", required=True, help="results directory")

    s = cmd("report", _run_report, "aggregate heuristic results", config=False)
    s.add_argument("results")
    s.add_argument("--out", required=True, help="CSV file")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        print(f"pbdfs {args.command}: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, InstanceFormatError, ModelFormatError) as exc:
        print(f"pbdfs {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
