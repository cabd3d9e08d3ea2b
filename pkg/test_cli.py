"""End-to-end tests of the fairexp command line on a small synthetic dataset"""

import json

import pandas as pd
import pytest

from backend.cli import PARETO_COLUMNS, main
from backend.fairexp.storage.artifacts import list_runs

BASE = {
    "epochs": 3,
    "patience": 3,
    "hidden_width": 6,
    "lam": 0.5,
    "eval_explainer": "gradient",
}


def _config(tmp_path, name="experiment.json", **overrides):
    doc = {
        "dataset": {"kind": "synthetic", "n": 160, "d": 4, "bias": 0.3, "seed": 1},
        "split": {"fractions": [0.6, 0.2, 0.2], "seed": 0},
        "seeds": [0],
        "method": "cfa",
        "base": dict(BASE),
    }
    doc.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


def _grid(config, out, *extra):
    args = ["grid", "--config", config, "--out", str(out), "--parallel", "1"]
    return main(args + list(extra))


# ── train ──────────────────────────────────────────────────────────────────────


def test_train_writes_run_files(tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["train", "--config", _config(tmp_path), "--out", str(out)])
    assert code == 0
    names = sorted(p.name for p in (out / "runs").iterdir())
    assert names == ["base_0.checkpoint.json", "base_0.epochs.jsonl", "base_0.json"]
    assert "base seed 0: test score" in capsys.readouterr().out


def test_train_seed_override(tmp_path):
    out = tmp_path / "out"
    config = _config(tmp_path)
    args = ["train", "--config", config, "--out", str(out), "--seed-override", "4", "7"]
    assert main(args) == 0
    assert [p.name for p in list_runs(out)] == ["base_4.json", "base_7.json"]


def test_train_export_explanations(tmp_path):
    out = tmp_path / "out"
    args = ["train", "--config", _config(tmp_path), "--out", str(out)]
    assert main(args + ["--export-explanations"]) == 0
    table = pd.read_csv(out / "explanations" / "base_0.csv")
    assert table.columns.tolist() == ["instance", "feature", "importance"]
    assert (table["importance"] >= 0).all()


def test_train_rejects_grid(tmp_path):
    config = _config(tmp_path, grid={"lam": [0.1, 1.0]})
    assert main(["train", "--config", config, "--out", str(tmp_path / "o")]) == 2


def test_missing_config_file(tmp_path):
    missing = str(tmp_path / "nope.json")
    assert main(["train", "--config", missing, "--out", str(tmp_path)]) == 2


def test_missing_dataset_file(tmp_path):
    dataset = {
        "path": "absent.csv",
        "label_column": "y",
        "sensitive_column": "s",
        "positive_label": "1",
        "sensitive_mapping": {"a": 0, "b": 1},
    }
    config = _config(tmp_path, dataset=dataset)
    assert main(["train", "--config", config, "--out", str(tmp_path / "o")]) == 2


def test_config_without_dataset(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"seeds": [0]}), encoding="utf-8")
    assert main(["train", "--config", str(path), "--out", str(tmp_path)]) == 2


def test_all_runs_failing_returns_their_exit_code(tmp_path, capsys):
    # masking every feature is impossible: k_mask must stay below d
    config = _config(tmp_path, base={**BASE, "k_mask": 4})
    assert main(["train", "--config", config, "--out", str(tmp_path / "o")]) == 2
    assert "all 1 runs failed" in capsys.readouterr().err


# ── grid ───────────────────────────────────────────────────────────────────────


def test_grid_two_by_two_with_two_seeds(tmp_path, capsys):
    out = tmp_path / "out"
    config = _config(
        tmp_path,
        seeds=[0, 1],
        grid={"lam": [0.1, 1.0], "distance": ["sw", "mse"]},
    )
    assert _grid(config, out) == 0
    assert len(list_runs(out)) == 8

    summary = pd.read_csv(out / "summary.csv")
    assert len(summary) == 4
    assert summary["cell"].tolist() == sorted(summary["cell"])
    assert (summary["n_runs"] == 2).all()
    doc = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    assert doc["winner"] in summary["cell"].tolist()
    assert f"winner: {doc['winner']}" in capsys.readouterr().out


def test_grid_identical_cells_pick_first_id(tmp_path):
    out = tmp_path / "out"
    config = _config(tmp_path, grid={"reweight_eta": [1.0, 0.5]})
    assert _grid(config, out) == 0
    summary = pd.read_csv(out / "summary.csv")
    assert summary["val_score_mean"].nunique() == 1
    doc = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    assert doc["winner"] == "reweight_eta=0.5"


def test_grid_rerun_is_byte_identical(tmp_path):
    config = _config(tmp_path, seeds=[0, 1], grid={"lam": [0.0, 1.0]})
    assert _grid(config, tmp_path / "a") == 0
    assert _grid(config, tmp_path / "b") == 0
    for name in ("summary.csv", "summary.json", "runs/lam=1_1.json"):
        first = (tmp_path / "a" / name).read_bytes()
        assert first == (tmp_path / "b" / name).read_bytes()


def test_grid_per_seed_selection(tmp_path):
    out = tmp_path / "out"
    config = _config(
        tmp_path, seeds=[0, 1], grid={"lam": [0.0, 1.0]}, selection="per_seed"
    )
    assert _grid(config, out) == 0
    doc = json.loads((out / "summary.json").read_text(encoding="utf-8"))
    assert sorted(doc["per_seed_winners"]) == ["0", "1"]


def test_grid_distance_override(tmp_path):
    out = tmp_path / "out"
    assert _grid(_config(tmp_path), out, "--distance", "kl") == 0
    run = json.loads((out / "runs" / "base_0.json").read_text(encoding="utf-8"))
    assert run["config"]["distance"]["kind"] == "kl"


# ── pareto ─────────────────────────────────────────────────────────────────────


def test_pareto_from_two_summaries(tmp_path):
    cfa_dir = tmp_path / "cfa"
    mlp_dir = tmp_path / "mlp"
    assert _grid(_config(tmp_path, grid={"lam": [0.1, 1.0]}), cfa_dir) == 0
    assert _grid(_config(tmp_path, "mlp.json", method="vanilla"), mlp_dir) == 0

    out = tmp_path / "pareto"
    summaries = [str(cfa_dir / "summary.csv"), str(mlp_dir / "summary.csv")]
    assert main(["pareto", *summaries, "--out", str(out)]) == 0

    table = pd.read_csv(out / "pareto.csv")
    assert table.columns.tolist() == PARETO_COLUMNS
    assert len(table) == 3
    assert not table["dominated"].all()
    doc = json.loads((out / "pareto.json").read_text(encoding="utf-8"))
    assert doc["source"] == "test"
    assert len(doc["frontier"]) == int((~table["dominated"]).sum())


def test_pareto_malformed_summary(tmp_path):
    bad = tmp_path / "summary.csv"
    bad.write_text("cell,score\nx,1\n", encoding="utf-8")
    assert main(["pareto", str(bad)]) == 2


def test_pareto_missing_summary(tmp_path):
    assert main(["pareto", str(tmp_path / "none.csv")]) == 2


# ── lambda-sweep ───────────────────────────────────────────────────────────────


def test_lambda_sweep_table(tmp_path):
    out = tmp_path / "out"
    lambdas = ["10", "0", "0.001", "0.01", "0.1", "1"]
    args = ["lambda-sweep", "--config", _config(tmp_path), "--out", str(out)]
    assert main(args + ["--parallel", "1", "--lambdas", *lambdas]) == 0
    table = pd.read_csv(out / "lambda_sweep.csv")
    assert table["lam"].tolist() == [0.0, 0.001, 0.01, 0.1, 1.0, 10.0]
    assert (table["n_runs"] == 1).all()
    assert (out / "summary.csv").exists()


def test_lambda_sweep_needs_two_values(tmp_path):
    args = ["lambda-sweep", "--config", _config(tmp_path), "--out", str(tmp_path)]
    assert main(args + ["--lambdas", "1"]) == 2


@pytest.mark.slow
def test_grid_parallel_matches_serial(tmp_path):
    config = _config(tmp_path, seeds=[0, 1], grid={"lam": [0.0, 1.0]})
    assert _grid(config, tmp_path / "serial") == 0
    args = ["grid", "--config", config, "--out", str(tmp_path / "pool")]
    assert main(args + ["--parallel", "2"]) == 0
    serial = (tmp_path / "serial" / "summary.csv").read_bytes()
    assert serial == (tmp_path / "pool" / "summary.csv").read_bytes()
