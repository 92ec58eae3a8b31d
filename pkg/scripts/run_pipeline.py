"""Desk-scale experiment for one problem family.

Generates train/test sets at three scales, labels them, trains the GCN and
logistic-regression predictors, writes per-scale AP tables and runs every
heuristic on the large test set.

    python3 scripts/run_pipeline.py --problem misp --work runs/misp [--config cfg.toml]
"""
import argparse
import logging
from pathlib import Path

from pbdfs import bench


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--problem", default="misp")
    ap.add_argument("--work", required=True)
    ap.add_argument("--config")
    ap.add_argument("--termination", default=None, help="override, e.g. time:20")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    over = {"problem": args.problem, "termination": args.termination}
    cfg = bench.ExperimentConfig.load(args.config, **over) if args.config else bench.ExperimentConfig(
        **{k: v for k, v in over.items() if v is not None})
    work = Path(args.work)
    train_dir, test_dir = work / "train", work / "test"

    bench.cmd_gen(cfg, train_dir, "small", cfg.n_train, cfg.seed)
    for scale in bench.SCALES:
        bench.cmd_gen(cfg, test_dir, scale, cfg.n_test, cfg.seed + 100000)
    bench.cmd_label(train_dir, cfg.label_node_limit, cfg.label_time_limit)
    bench.cmd_label(test_dir, cfg.label_node_limit, cfg.label_time_limit)

    models = {}
    for kind in ("gcn", "lr"):
        c = bench.ExperimentConfig(**{**cfg.__dict__, "model": kind})
        models[kind] = bench.cmd_train([train_dir], c, work / f"{kind}.json")
        rows = bench.cmd_eval_ml([test_dir], models[kind], work / f"ap_{kind}.csv")
        for r in rows:
            if r["instance"] == "mean":
                print(f"{kind} {r['scale']}: AP {r['ap']:.4f}  prevalence {r['prevalence']:.4f}")

    large = test_dir / cfg.problem / "large"
    results = work / "results"
    for method in bench.METHODS:
        model = models["lr"] if method == "pbdfs-lr" else models["gcn"]
        bench.cmd_heuristic(large, method, results, model, cfg.variant, cfg.termination)
    for row in bench.cmd_report(results, work / "report.csv"):
        print(row)


if __name__ == "__main__":
    main()
