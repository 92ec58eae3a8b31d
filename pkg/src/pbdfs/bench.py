"""Dataset pipeline: generate, label, train, predict, evaluate and run heuristics.

A dataset directory holds ``{problem}/{scale}/{seed}.json`` instances with
sidecar files next to each one:

    {seed}.meta.json   generator name, parameters and seed
    {seed}.sol.json    exact solution: objective, values, proved_optimal
    {seed}.feat.json   normalized feature dump (cache)
    {seed}.prob.json   probability vector from ``predict``
"""
from __future__ import annotations

import csv
import json
import logging
import math
import re
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .features import instance_features, read_features, write_features
from .generators import PROBLEMS, generate
from .linkage import build_linkage_graph, normalized_laplacian
from .mip import read_instance, write_instance
from .predictor import TrainConfig, TrainExample, average_precision, load_model, predict, save_model, train
from .search import Termination, baseline_dfs, lp_rounding, pb_dfs, solve_exact

log = logging.getLogger(__name__)

SCALES = ("small", "medium", "large")
METHODS = ("pbdfs-gcn", "pbdfs-lr", "pbdfs-oracle", "dfs", "rounding")
_INSTANCE_RE = re.compile(r"^(\d+)\.json$")

GRAPH_SIZES = {"small": [50, 100], "medium": [150, 150], "large": [200, 200]}
CAP_SIZES = {"small": [30, 40, 100, 150], "medium": [50, 50, 200, 200], "large": [60, 60, 250, 250]}


@dataclass
class ExperimentConfig:
    problem: str = "misp"
    sizes: dict = field(default_factory=dict)
    n_train: int = 100
    n_test: int = 20
    n_heuristic: int = 30
    model: str = "gcn"
    variant: str = "max"
    termination: str = "first_feasible"
    cutoff_s: float = 20.0
    seed: int = 0
    affinity: int = 4
    epochs: int = 200
    lr: float = 1e-2
    nlayers: int = 20
    hidden: int = 32
    label_node_limit: int | None = None
    label_time_limit: float | None = None

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise ValueError(f"unknown problem {self.problem!r}; expected one of {PROBLEMS}")
        if not self.sizes:
            self.sizes = dict(CAP_SIZES if self.problem == "cap" else GRAPH_SIZES)
        for name in ("n_train", "n_test", "n_heuristic"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        s, m, l = (self.sizes[k] for k in SCALES)
        if not (max(s) < max(m) < max(l) and min(s) < min(m) < min(l)):
            raise ValueError(f"sizes must be strictly ordered small < medium < large, got {self.sizes}")
        Termination.parse(self.termination)

    def train_config(self) -> TrainConfig:
        return TrainConfig(self.model, self.nlayers, self.hidden, self.lr, self.epochs, self.seed)

    @classmethod
    def load(cls, path, **overrides) -> "ExperimentConfig":
        path = Path(path)
        if path.suffix == ".toml":
            try:
                import tomllib
            except ModuleNotFoundError:
                import tomli as tomllib
            data = tomllib.loads(path.read_text(encoding="utf-8"))
        else:
            data = json.loads(path.read_text(encoding="utf-8"))
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data)


def instance_size(config: ExperimentConfig, scale: str, seed: int) -> tuple[int, int]:
    """Problem size for one seed, drawn uniformly from the scale's range."""
    rng = np.random.default_rng([seed, SCALES.index(scale)])
    r = config.sizes[scale]
    if config.problem == "cap":
        return int(rng.integers(r[0], r[1] + 1)), int(rng.integers(r[2], r[3] + 1))
    return int(rng.integers(r[0], r[1] + 1)), 0


def instance_files(root) -> list[Path]:
    """All instance files under ``root``, sorted by directory then numeric seed."""
    root = Path(root)
    found = [p for p in root.rglob("*.json") if _INSTANCE_RE.match(p.name)]
    return sorted(found, key=lambda p: (str(p.parent), int(p.stem)))


def _sidecar(path: Path, kind: str) -> Path:
    return path.with_name(f"{path.stem}.{kind}.json")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj) + "\n", encoding="utf-8")


def _read_json(path: Path):
    return json.loads(path.read_text(encoding="utf-8"))


# -- commands ----------------------------------------------------------------


def cmd_gen(config: ExperimentConfig, out, scale: str, count: int, first_seed: int | None = None) -> list[Path]:
    if scale not in SCALES:
        raise ValueError(f"unknown scale {scale!r}")
    first_seed = config.seed if first_seed is None else first_seed
    folder = Path(out) / config.problem / scale
    folder.mkdir(parents=True, exist_ok=True)
    written = []
    for seed in range(first_seed, first_seed + count):
        inst, meta = generate(config.problem, instance_size(config, scale, seed), seed, config.affinity)
        meta["scale"] = scale
        path = folder / f"{seed}.json"
        write_instance(inst, path)
        _write_json(_sidecar(path, "meta"), meta)
        written.append(path)
    log.info("generated %d %s/%s instances in %s", count, config.problem, scale, folder)
    return written


def cmd_label(root, node_limit: int | None = None, time_limit: float | None = None) -> dict:
    counts = {"labeled": 0, "skipped": 0, "unproved": 0}
    for path in instance_files(root):
        sol_path = _sidecar(path, "sol")
        if sol_path.exists():
            log.info("skip %s: already labeled", path)
            counts["skipped"] += 1
            continue
        inst = read_instance(path)
        res = solve_exact(inst, node_limit=node_limit, time_limit=time_limit)
        values = None if res.solution is None else res.solution.astype(int).tolist()
        _write_json(sol_path, {"objective": res.objective, "values": values, "proved_optimal": res.proved_optimal})
        counts["labeled"] += 1
        if not res.proved_optimal:
            counts["unproved"] += 1
            log.warning("%s: limit reached, label not proved optimal (excluded from training)", path)
    return counts


def load_label(path: Path) -> dict | None:
    sol = _sidecar(path, "sol")
    return _read_json(sol) if sol.exists() else None


def cached_features(path: Path, inst=None) -> np.ndarray:
    feat = _sidecar(path, "feat")
    if feat.exists():
        return read_features(feat).values
    inst = inst or read_instance(path)
    F = instance_features(inst)
    write_features(F, feat)
    return F.values


def load_examples(roots, require_proved: bool = True) -> list[TrainExample]:
    examples = []
    for root in roots:
        for path in instance_files(root):
            label = load_label(path)
            if label is None or label["values"] is None:
                continue
            if require_proved and not label["proved_optimal"]:
                continue
            inst = read_instance(path)
            L = normalized_laplacian(build_linkage_graph(inst))
            examples.append(TrainExample(L, cached_features(path, inst), np.array(label["values"], dtype=float)))
    return examples


def cmd_train(roots, config: ExperimentConfig, out) -> Path:
    examples = load_examples(roots)
    if not examples:
        raise ValueError("no optimally labeled instances to train on")
    model = train(examples, config.train_config())
    save_model(model, out)
    log.info("trained %s on %d instances -> %s", config.model, len(examples), out)
    return Path(out)


def predict_instance(model, inst) -> tuple[np.ndarray, float]:
    """Probabilities for one instance and the wall time spent (features + model)."""
    t0 = time.perf_counter()
    F = instance_features(inst)
    L = normalized_laplacian(build_linkage_graph(inst))
    p = predict(model, L, F.values)
    return p, time.perf_counter() - t0


def cmd_predict(root, model_path) -> int:
    model = load_model(model_path)
    n = 0
    for path in instance_files(root):
        inst = read_instance(path)
        L = normalized_laplacian(build_linkage_graph(inst))
        p = predict(model, L, cached_features(path, inst))
        _write_json(_sidecar(path, "prob"), [float(v) for v in p])
        n += 1
    return n


def cmd_eval_ml(roots, model_path, out) -> list[dict]:
    """Per-instance AP plus a mean row per scale, written as CSV."""
    model = load_model(model_path)
    rows = []
    for root in roots:
        for path in instance_files(root):
            label = load_label(path)
            if label is None or label["values"] is None:
                raise ValueError(f"{path}: missing label")
            y = np.array(label["values"])
            if y.sum() == 0:
                log.warning("%s: no positive labels, AP undefined; skipped", path)
                continue
            inst = read_instance(path)
            L = normalized_laplacian(build_linkage_graph(inst))
            p = predict(model, L, cached_features(path, inst))
            scale = _read_json(_sidecar(path, "meta")).get("scale", path.parent.name)
            rows.append({"scale": scale, "instance": path.stem, "n": len(y),
                         "prevalence": float(y.mean()), "ap": average_precision(p, y)})
    if not rows:
        raise ValueError("no labeled instances to evaluate")
    out_rows = list(rows)
    for scale in sorted({r["scale"] for r in rows}):
        sub = [r for r in rows if r["scale"] == scale]
        out_rows.append({"scale": scale, "instance": "mean", "n": len(sub),
                         "prevalence": float(np.mean([r["prevalence"] for r in sub])),
                         "ap": float(np.mean([r["ap"] for r in sub]))})
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=["scale", "instance", "n", "prevalence", "ap"])
        w.writeheader()
        w.writerows(out_rows)
    return out_rows


# -- heuristic runs and reports ------------------------------------------------

INSTANCE_FIELDS = ["instance", "found", "best_objective", "best_time_s", "prediction_time_s",
                   "calls", "total_time_s", "nodes", "lp_solves", "backtracks"]


@dataclass
class ReportRow:
    method: str
    best_objective: float
    best_time_s: float
    n_no_feasible: int
    calls: float
    total_time_s: float


def shifted_geomean(values, shift: float = 1.0) -> float:
    """``exp(mean(log(v + shift))) - shift``; NaN for an empty input."""
    v = np.asarray(list(values), dtype=float)
    if len(v) == 0:
        return math.nan
    return float(np.exp(np.mean(np.log(v + shift))) - shift)


def aggregate(method: str, rows: list[dict]) -> ReportRow:
    """Shifted geometric means over instances where the method found a solution."""
    ok = [r for r in rows if int(r["found"])]
    return ReportRow(
        method=method,
        best_objective=shifted_geomean(float(r["best_objective"]) for r in ok),
        best_time_s=shifted_geomean(float(r["best_time_s"]) for r in ok),
        n_no_feasible=len(rows) - len(ok),
        calls=shifted_geomean(float(r["calls"]) for r in ok),
        total_time_s=shifted_geomean(float(r["total_time_s"]) for r in ok),
    )


def run_method(method: str, inst, model=None, label=None, variant: str = "max", term: Termination | None = None):
    """Run one heuristic on one instance; returns ``(SearchResult-like, prediction_time)``."""
    term = term or Termination.first_feasible()
    if method in ("pbdfs-gcn", "pbdfs-lr"):
        if model is None:
            raise ValueError(f"{method} needs a model file")
        p, t_pred = predict_instance(model, inst)
        return pb_dfs(inst, p, variant, term), t_pred
    if method == "pbdfs-oracle":
        if label is None or label.get("values") is None:
            raise ValueError("pbdfs-oracle needs labeled instances")
        return pb_dfs(inst, np.array(label["values"], dtype=float), variant, term), 0.0
    if method == "dfs":
        return baseline_dfs(inst, term), 0.0
    if method == "rounding":
        return lp_rounding(inst), 0.0
    raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")


def cmd_heuristic(root, method: str, out, model_path=None, variant: str = "max",
                  termination: str = "first_feasible") -> ReportRow:
    """Run ``method`` on every instance; writes trajectories, stats and ``instances.csv``."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    term = Termination.parse(termination)
    model = None
    if method in ("pbdfs-gcn", "pbdfs-lr"):
        if model_path is None or not Path(model_path).exists():
            raise ValueError(f"{method} needs an existing model file")
        model = load_model(model_path)
    folder = Path(out) / method
    folder.mkdir(parents=True, exist_ok=True)
    rows = []
    for path in instance_files(root):
        inst = read_instance(path)
        res, t_pred = run_method(method, inst, model, load_label(path), variant, term)
        name = f"{path.parent.name}-{path.stem}"
        if method == "rounding":
            inc = res
            found = inc is not None
            row = {"instance": name, "found": int(found),
                   "best_objective": inc.objective if found else "", "best_time_s": round(inc.found_at, 3) if found else "",
                   "prediction_time_s": 0.0, "calls": 1, "total_time_s": round(inc.found_at, 3) if found else "",
                   "nodes": 1, "lp_solves": 1, "backtracks": 0}
        else:
            res.trajectory.write_csv(folder / f"{name}.traj.csv")
            stats = res.stats.to_dict()
            stats["prediction_time_s"] = t_pred
            _write_json(folder / f"{name}.stats.json", stats)
            found = res.incumbent is not None
            row = {"instance": name, "found": int(found),
                   "best_objective": res.incumbent.objective if found else "",
                   "best_time_s": round(res.incumbent.found_at + t_pred, 3) if found else "",
                   "prediction_time_s": round(t_pred, 3), "calls": 1,
                   "total_time_s": round(res.stats.wall_time_s + t_pred, 3),
                   "nodes": res.stats.nodes, "lp_solves": res.stats.lp_solves, "backtracks": res.stats.backtracks}
        rows.append(row)
    with open(folder / "instances.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=INSTANCE_FIELDS)
        w.writeheader()
        w.writerows(rows)
    return aggregate(method, rows)


def read_instance_rows(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def cmd_report(results_dir, out) -> list[ReportRow]:
    """Aggregate every ``{method}/instances.csv`` under ``results_dir`` into one CSV."""
    report = []
    for csv_path in sorted(Path(results_dir).glob("*/instances.csv")):
        report.append(aggregate(csv_path.parent.name, read_instance_rows(csv_path)))
    if not report:
        raise ValueError(f"no instances.csv files under {results_dir}")
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=[f.name for f in fields(ReportRow)])
        w.writeheader()
        for r in report:
            w.writerow({k: (f"{v:.6g}" if isinstance(v, float) else v) for k, v in asdict(r).items()})
    return report
