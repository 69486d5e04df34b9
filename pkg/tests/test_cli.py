import json
from pathlib import Path

import pytest

from graphdoor.cli import EXIT_CONFIG, EXIT_OK, main
from graphdoor.experiment import default_config, validate_config

TINY_CONFIG = {
    "seed": 42,
    "dataset": {"kind": "synthetic", "classes": 3, "per_class": 30,
                "nodes_mean": 15, "feature_dim": 3, "class_sep": 1.5},
    "model": {"arch": "gcn", "num_layers": 2, "hidden_dim": 8},
    "train": {"epochs": 3},
    "attack": {"n_targets": 2, "poisoning_ratio": 0.1,
               "trigger": {"size_fraction": 0.4}},
}


def write_cfg(tmp_path, extra=None, name="cfg.json"):
    cfg = json.loads(json.dumps(TINY_CONFIG))
    if extra:
        for key, val in extra.items():
            if isinstance(val, dict):
                cfg.setdefault(key, {}).update(val)
            else:
                cfg[key] = val
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def test_defaults_match_reference_values(capsys):
    assert main(["defaults"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    atk = doc["attack"]
    assert atk["n_targets"] == 3
    assert atk["poisoning_ratio"] == 0.05
    assert atk["strategy"] == "random"
    assert atk["k"] == 1
    assert atk["mechanism"] == "injection"
    assert atk["trigger"]["size_fraction"] is None  # resolved by the n_avg rule


def test_trigger_defaults_rule(small_ds):
    from graphdoor.core import relabel_to_degree_features
    from graphdoor.experiment import resolve_trigger_spec

    cfg = default_config()
    spec = resolve_trigger_spec(cfg, small_ds)  # n_avg ~ 20 < 150
    assert spec.size_fraction == 0.20
    assert spec.edge_density == 0.8
    deg = relabel_to_degree_features(small_ds)
    spec = resolve_trigger_spec(cfg, deg)
    assert spec.edge_density == 0.2
    assert spec.feature_mode == "degree"


def test_validate_ok(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    assert main(["validate", str(cfg)]) == EXIT_OK
    assert capsys.readouterr().out == ""


def test_validate_oversubscription(tmp_path, capsys):
    cfg = write_cfg(
        tmp_path,
        {"dataset": {"classes": 10, "per_class": 10},
         "attack": {"n_targets": 10, "poisoning_ratio": 0.3}},
    )
    assert main(["validate", str(cfg)]) == EXIT_CONFIG
    assert "oversubscribed" in capsys.readouterr().out


def test_validate_missing_tu_path(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"dataset": {"kind": "tu", "path": str(tmp_path / "nope")}})
    assert main(["validate", str(cfg)]) == EXIT_CONFIG
    out = capsys.readouterr().out
    assert "dataset.path" in out


def test_validate_default_config_clean():
    assert validate_config(default_config()) == []


def test_run_writes_artifacts(tmp_path, capsys):
    cfg = write_cfg(tmp_path)
    out = tmp_path / "run1"
    assert main(["run", str(cfg), "--out", str(out)]) == EXIT_OK
    for rel in (
        "manifest.json",
        "models/clean_model.json",
        "models/backdoored_model.json",
        "plans/poison_plan.json",
        "plans/triggers.json",
        "reports/report.json",
        "reports/report.csv",
    ):
        assert (out / rel).exists(), rel
    report = json.loads((out / "reports" / "report.json").read_text())
    assert len(report["asr"]) == 2
    assert report["mechanism"] == "injection"


def test_run_replacement_mechanism(tmp_path):
    cfg = write_cfg(tmp_path, {"attack": {"mechanism": "replacement"}})
    out = tmp_path / "run_rep"
    assert main(["run", str(cfg), "--out", str(out)]) == EXIT_OK
    report = json.loads((out / "reports" / "report.json").read_text())
    assert report["mechanism"] == "replacement"
    assert len(report["asr"]) == 2


def test_run_replay_identical_report(tmp_path):
    cfg = write_cfg(tmp_path)
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["run", str(cfg), "--out", str(out1)]) == EXIT_OK
    assert main(["run", str(cfg), "--out", str(out2)]) == EXIT_OK
    assert (out1 / "reports/report.json").read_bytes() == (
        out2 / "reports/report.json"
    ).read_bytes()


def test_run_bad_config_exit_code(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"attack": {"poisoning_ratio": 5.0}})
    assert main(["run", str(cfg)]) == EXIT_CONFIG


def test_run_defenses_and_sweep(tmp_path):
    cfg = write_cfg(
        tmp_path,
        {
            "defenses": {
                "randomized_smoothing": {"n_samples": 3, "sigmas": [0.0, 0.5]},
                "fine_pruning": {"prune_ratios": [0.0, 0.5], "finetune_epochs": 1},
            },
            "sweep": {"parameter": "k", "values": [1, 2]},
        },
    )
    out = tmp_path / "full"
    assert main(["run", str(cfg), "--out", str(out)]) == EXIT_OK
    assert (out / "reports/rs_curve.csv").exists()
    assert (out / "reports/fp_curve.csv").exists()
    assert (out / "reports/sweep_k.csv").exists()
    sweep = json.loads((out / "reports/sweep_k.json").read_text())
    assert len(sweep["cells"]) == 2
    assert all(c["status"] == "ok" for c in sweep["cells"])


def test_seed_override_changes_report(tmp_path):
    cfg = write_cfg(tmp_path)
    out1, out2 = tmp_path / "s1", tmp_path / "s2"
    assert main(["run", str(cfg), "--out", str(out1), "--seed", "1"]) == EXIT_OK
    assert main(["run", str(cfg), "--out", str(out2), "--seed", "2"]) == EXIT_OK
    m1 = json.loads((out1 / "manifest.json").read_text())
    m2 = json.loads((out2 / "manifest.json").read_text())
    assert m1["hashes"]["dataset"] != m2["hashes"]["dataset"]
