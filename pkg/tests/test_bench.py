import csv
import json
import logging
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from pbdfs import bench
from pbdfs.cli import main
from pbdfs.generators import UGraph, formulate_misp
from pbdfs.mip import write_instance
from pbdfs.predictor import LogRegModel, average_precision, save_model

ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture(scope="module")
def labeled(tmp_path_factory):
    """A tiny labeled MISP dataset plus a briefly trained GCN."""
    d = tmp_path_factory.mktemp("ds")
    assert main(["gen", "--problem", "misp", "--scale", "small", "--count", "4", "--out", str(d)]) == 0
    assert main(["label", str(d)]) == 0
    assert main(["train", str(d), "--nlayers", "3", "--hidden", "8", "--epochs", "5", "--out", str(d / "m.json")]) == 0
    return d


def test_gen_writes_instances_and_metadata(tmp_path):
    assert main(["gen", "--problem", "misp", "--count", "3", "--out", str(tmp_path)]) == 0
    folder = tmp_path / "misp" / "small"
    assert sorted(p.name for p in folder.iterdir()) == ["0.json", "0.meta.json", "1.json", "1.meta.json",
                                                         "2.json", "2.meta.json"]
    meta = json.loads((folder / "1.meta.json").read_text())
    assert meta["generator"] == "misp" and meta["seed"] == 1 and 50 <= meta["params"]["n"] <= 100


def test_gen_byte_identical(tmp_path):
    for sub in ("a", "b"):
        assert main(["gen", "--problem", "cap", "--count", "2", "--seed", "5", "--out", str(tmp_path / sub)]) == 0
    for f in (tmp_path / "a" / "cap" / "small").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / "cap" / "small" / f.name).read_bytes()


def test_unknown_problem_usage_error(tmp_path, capsys):
    assert main(["gen", "--problem", "tsp", "--out", str(tmp_path)]) == 2


def test_bad_config_usage_error(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"problem": "misp", "sizes": {"small": [50, 100], "medium": [40, 60], "large": [200, 200]}}))
    assert main(["gen", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    cfg.write_text(json.dumps({"n_train": 0}))
    assert main(["gen", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    cfg.write_text(json.dumps({"colour": "blue"}))
    assert main(["gen", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_toml_config_with_override(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('problem = "vcp"\nseed = 3\n[sizes]\nsmall = [10, 12]\nmedium = [20, 22]\nlarge = [30, 32]\n')
    c = bench.ExperimentConfig.load(cfg, seed=9)
    assert c.problem == "vcp" and c.seed == 9 and c.sizes["small"] == [10, 12]
    assert main(["gen", "--config", str(cfg), "--count", "2", "--out", str(tmp_path / "d")]) == 0
    assert sorted(p.name for p in (tmp_path / "d" / "vcp" / "small").glob("?.json")) == ["3.json", "4.json"]


def test_label_p3_and_skip(tmp_path, caplog):
    folder = tmp_path / "misp" / "small"
    folder.mkdir(parents=True)
    write_instance(formulate_misp(UGraph.from_edges(3, [(0, 1), (1, 2)])), folder / "0.json")
    assert main(["label", str(tmp_path)]) == 0
    sol = json.loads((folder / "0.sol.json").read_text())
    assert sol == {"objective": 2.0, "values": [1, 0, 1], "proved_optimal": True}
    with caplog.at_level(logging.INFO, logger="pbdfs"):
        counts = bench.cmd_label(tmp_path)
    assert counts["skipped"] == 1 and counts["labeled"] == 0
    assert any("already labeled" in r.message for r in caplog.records)


def test_label_node_limit_unproved_excluded(tmp_path):
    bench.cmd_gen(bench.ExperimentConfig(), tmp_path, "small", 1)
    assert main(["label", str(tmp_path), "--node-limit", "1"]) == 0
    sol = json.loads((tmp_path / "misp" / "small" / "0.sol.json").read_text())
    assert sol["proved_optimal"] is False
    assert bench.load_examples([tmp_path]) == []
    assert main(["train", str(tmp_path), "--out", str(tmp_path / "m.json")]) == 1


def test_train_empty_runtime_error(tmp_path):
    assert main(["train", str(tmp_path), "--out", str(tmp_path / "m.json")]) == 1
    assert not (tmp_path / "m.json").exists()


def test_predict_writes_probabilities(labeled):
    assert main(["predict", str(labeled), "--model", str(labeled / "m.json")]) == 0
    for path in bench.instance_files(labeled):
        probs = json.loads(path.with_name(f"{path.stem}.prob.json").read_text())
        n = json.loads(path.read_text())["nvars"]
        assert len(probs) == n and all(0 < p < 1 for p in probs)


def test_missing_model_runtime_error(labeled, tmp_path):
    assert main(["predict", str(labeled), "--model", str(tmp_path / "nope.json")]) == 1
    assert main(["heuristic", str(labeled), "--method", "pbdfs-gcn", "--out", str(tmp_path)]) == 1


def test_eval_constant_model_near_prevalence(labeled, tmp_path):
    model = LogRegModel.init(49)
    save_model(model, tmp_path / "const.json")
    assert main(["eval-ml", str(labeled), "--model", str(tmp_path / "const.json"), "--out", str(tmp_path / "ap.csv")]) == 0
    rows = list(csv.DictReader(open(tmp_path / "ap.csv")))
    assert [r["instance"] for r in rows if r["instance"] == "mean"] == ["mean"]
    # with constant scores the rank order is arbitrary; over shuffled labels AP averages to about the prevalence
    rng = np.random.default_rng(0)
    for r in rows[:-1]:
        y = np.array(json.loads((labeled / "misp" / "small" / f"{r['instance']}.sol.json").read_text())["values"])
        aps = [average_precision(np.full(len(y), 0.5), rng.permutation(y)) for _ in range(400)]
        assert np.mean(aps) == pytest.approx(y.mean(), abs=0.03)


def test_eval_missing_labels(tmp_path):
    bench.cmd_gen(bench.ExperimentConfig(), tmp_path, "small", 1)
    save_model(LogRegModel.init(49), tmp_path / "m.json")
    assert main(["eval-ml", str(tmp_path), "--model", str(tmp_path / "m.json"), "--out", str(tmp_path / "a.csv")]) == 1


def test_heuristics_and_report(labeled, tmp_path):
    res = tmp_path / "res"
    for method in ("pbdfs-oracle", "dfs", "pbdfs-gcn", "rounding"):
        assert main(["heuristic", str(labeled), "--method", method, "--model", str(labeled / "m.json"),
                     "--out", str(res)]) == 0
    oracle = bench.read_instance_rows(res / "pbdfs-oracle" / "instances.csv")
    for row in oracle:
        seed = row["instance"].split("-")[-1]
        sol = json.loads((labeled / "misp" / "small" / f"{seed}.sol.json").read_text())
        assert float(row["best_objective"]) == sol["objective"]
    dfs = bench.aggregate("dfs", bench.read_instance_rows(res / "dfs" / "instances.csv"))
    assert dfs.n_no_feasible == 0 and dfs.calls == pytest.approx(1.0)
    assert (res / "dfs" / "small-0.traj.csv").exists() and (res / "dfs" / "small-0.stats.json").exists()
    gcn = bench.read_instance_rows(res / "pbdfs-gcn" / "instances.csv")
    assert all(float(r["best_time_s"]) >= float(r["prediction_time_s"]) for r in gcn)

    assert main(["report", str(res), "--out", str(tmp_path / "report.csv")]) == 0
    ours = list(csv.DictReader(open(tmp_path / "report.csv")))
    out = subprocess.run([sys.executable, str(ROOT / "scripts" / "aggregate_report.py"), str(res)],
                         capture_output=True, text=True, check=True).stdout
    theirs = list(csv.DictReader(out.splitlines()))
    assert ours == theirs


def test_shifted_geomean():
    assert bench.shifted_geomean([0, 3]) == pytest.approx(1.0)
    assert bench.shifted_geomean([5]) == pytest.approx(5.0)
    assert np.isnan(bench.shifted_geomean([]))


def test_aggregate_skips_unsolved():
    rows = [{"found": 1, "best_objective": 3, "best_time_s": 0.0, "calls": 1, "total_time_s": 1.0},
            {"found": 0, "best_objective": "", "best_time_s": "", "calls": 1, "total_time_s": 9.0}]
    r = bench.aggregate("x", rows)
    assert r.n_no_feasible == 1 and r.best_objective == pytest.approx(3.0) and r.total_time_s == pytest.approx(1.0)


def test_console_script_exit_codes(tmp_path):
    ok = subprocess.run([sys.executable, "-m", "pbdfs.cli", "report", str(tmp_path), "--out", str(tmp_path / "r.csv")],
                        capture_output=True, text=True)
    assert ok.returncode == 1
    usage = subprocess.run([sys.executable, "-m", "pbdfs.cli", "frobnicate"], capture_output=True, text=True)
    assert usage.returncode == 2
