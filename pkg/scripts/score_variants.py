"""Compare the three branching-score variants on labeled instances.

For each variant, runs PB-DFS with a trained model until the first feasible
solution (or a node limit) and prints shifted-geomean objective and time.

    python3 scripts/score_variants.py DATASET_DIR MODEL_JSON [--termination nodes:500]
"""
import argparse

from pbdfs import bench
from pbdfs.mip import read_instance
from pbdfs.predictor import load_model
from pbdfs.search import VARIANTS, Termination, pb_dfs


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("dataset")
    ap.add_argument("model")
    ap.add_argument("--termination", default="first_feasible")
    args = ap.parse_args()
    model = load_model(args.model)
    term = Termination.parse(args.termination)
    preds = []
    for path in bench.instance_files(args.dataset):
        inst = read_instance(path)
        p, t = bench.predict_instance(model, inst)
        preds.append((inst, p, t))
    print("variant,best_objective,best_time_s,n_no_feasible")
    for v in VARIANTS:
        rows = []
        for inst, p, t in preds:
            res = pb_dfs(inst, p, v, term)
            found = res.incumbent is not None
            rows.append({"found": int(found), "calls": 1,
                         "best_objective": res.incumbent.objective if found else 0,
                         "best_time_s": res.incumbent.found_at + t if found else 0,
                         "total_time_s": res.stats.wall_time_s + t})
        r = bench.aggregate(v, rows)
        print(f"{v},{r.best_objective:.6g},{r.best_time_s:.3f},{r.n_no_feasible}")


if __name__ == "__main__":
    main()
