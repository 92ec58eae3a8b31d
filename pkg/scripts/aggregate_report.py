"""Recompute the heuristic report from raw per-instance CSVs.

Deliberately independent of the package: only the stdlib is used, so the
aggregation can be checked against ``pbdfs report`` output.

    python3 scripts/aggregate_report.py RESULTS_DIR
"""
import csv
import math
import sys
from pathlib import Path

COLUMNS = ("best_objective", "best_time_s", "calls", "total_time_s")


def sgm(values, shift=1.0):
    if not values:
        return math.nan
    return math.exp(sum(math.log(v + shift) for v in values) / len(values)) - shift


def aggregate_file(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    ok = [r for r in rows if r["found"] == "1"]
    out = {"method": Path(path).parent.name, "n_no_feasible": len(rows) - len(ok)}
    for col in COLUMNS:
        out[col] = sgm([float(r[col]) for r in ok])
    return out


def main(argv):
    if len(argv) != 2:
        print(__doc__, file=sys.stderr)
        return 2
    files = sorted(Path(argv[1]).glob("*/instances.csv"))
    w = csv.writer(sys.stdout)
    w.writerow(["method", "best_objective", "best_time_s", "n_no_feasible", "calls", "total_time_s"])
    for f in files:
        r = aggregate_file(f)
        w.writerow([r["method"], f"{r['best_objective']:.6g}", f"{r['best_time_s']:.6g}", r["n_no_feasible"],
                    f"{r['calls']:.6g}", f"{r['total_time_s']:.6g}"])
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
