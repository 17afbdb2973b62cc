import json
from pathlib import Path

import numpy as np
import pytest

from idopt import models
from idopt.cli import main
from idopt.dataset import encode_all, load_csv, titanic_path
from idopt.optimizer import read_trajectory_csv

CASES = Path(__file__).resolve().parents[1] / "cases"


@pytest.fixture(scope="module")
def artifacts(tmp_path_factory):
    d = tmp_path_factory.mktemp("art")
    assert main(["train", "--model", "mlp", "--out", str(d / "mlp.json")]) == 0
    assert main(["train", "--model", "forest", "--out", str(d / "forest.json")]) == 0
    assert main(["density", "--out", str(d / "kde.json")]) == 0
    return d


def short_case(artifacts, name, iterations=8, **changes):
    doc = json.loads((CASES / f"{name}.json").read_text())
    doc["optimizer"]["iterations"] = iterations
    doc["model"] = str(artifacts / Path(doc["model"]).name)
    if "density" in doc:
        doc["density"] = str(artifacts / "kde.json")
    doc.update(changes)
    path = artifacts / f"{name}_{iterations}.json"
    path.write_text(json.dumps(doc))
    return path


def test_train_writes_model_and_metrics(artifacts, capsys):
    _, doc = models.load_model(artifacts / "mlp.json")
    assert set(doc["metrics"]) >= {"auc", "accuracy"}
    assert len(doc["schema"]["dims"]) == 12
    assert main(["train", "--model", "forest", "--out", str(artifacts / "f2.json")]) == 0
    assert "auc=" in capsys.readouterr().out


def test_density_support_is_all_rows(artifacts):
    kde, _ = models.load_model(artifacts / "kde.json")
    assert kde.support.shape == (891, 12)
    assert kde.bandwidth == 0.2
    assert np.all(kde.evaluate(kde.support[:20]) > 0)


@pytest.mark.parametrize("argv", [
    ["train", "--data", "/nonexistent/t.csv", "--out", "x.json"],
    ["density", "--bandwidth", "0", "--out", "x.json"],
    ["optimize", "--config", "/nonexistent/c.json", "--out", "o"],
    ["report", "/nonexistent/t.csv"],
])
def test_config_errors_exit_2(argv, tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == 2
    err = capsys.readouterr().err
    assert "error" in err


def test_bad_path_is_named(capsys):
    main(["train", "--data", "/nonexistent/t.csv", "--out", "x.json"])
    assert "/nonexistent/t.csv" in capsys.readouterr().err


def test_invalid_modality_lists_valid_ones(artifacts, tmp_path, capsys):
    cfg = short_case(artifacts, "case4", constraints=[{"feature": "embarked", "modality": "Z"}])
    assert main(["optimize", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "'Z'" in err and "'Q'" in err and "'S'" in err
    assert not list(tmp_path.iterdir())


def test_missing_model_exit_2(artifacts, tmp_path):
    cfg = short_case(artifacts, "case1", model="missing.json")
    assert main(["optimize", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_optimize_builtin(tmp_path):
    cfg = tmp_path / "bowl.json"
    cfg.write_text(json.dumps({
        "name": "bowl", "model": "builtin:bowl", "dim": 2,
        "optimizer": {"iterations": 300, "optimizer": {"type": "gradient_ascent"}, "ridge": 0},
    }))
    assert main(["optimize", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rep = json.loads((tmp_path / "o" / "bowl_report.json").read_text())
    np.testing.assert_allclose(rep["centers"], [1, 1], atol=0.05)
    assert rep["final_mean"] == pytest.approx(5.0, abs=1e-3)


def test_case4_pinning_in_every_row(artifacts, tmp_path):
    cfg = short_case(artifacts, "case4", iterations=20)
    assert main(["optimize", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    _, doc = models.load_model(artifacts / "mlp.json")
    names = [d["name"] for d in doc["schema"]["dims"]]
    traj = read_trajectory_csv(tmp_path / "case4_trajectory.csv")
    emb = [i for i, n in enumerate(names) if n.startswith("embarked=")]
    q = names.index("embarked=Q")
    age = names.index("age")
    for r in traj:
        assert r.centers[age] == 2.0 and r.half_lengths[age] == 1.0
        for i in emb:
            assert r.centers[i] == (1.0 if i == q else 0.0)
            assert r.half_lengths[i] == 1e-3
    rep = json.loads((tmp_path / "case4_report.json").read_text())
    assert rep["domain"]["categorical"]["embarked"]["modality"] == "Q"
    assert len(rep["penalties"]) == 5


def test_case5_starts_on_data_row(artifacts, tmp_path):
    cfg = short_case(artifacts, "case5", iterations=3)
    assert main(["optimize", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    traj = read_trajectory_csv(tmp_path / "case5_trajectory.csv")
    row0 = encode_all(load_csv(titanic_path())).features[0]
    np.testing.assert_array_equal(traj[0].centers, row0)
    np.testing.assert_array_equal(traj[0].half_lengths, 0.1)
    rep = json.loads((tmp_path / "case5_report.json").read_text())
    assert "final_model_mean" in rep and "initial_model_mean" in rep


def test_end_to_end_determinism(tmp_path):
    outs = []
    for k in range(2):
        d = tmp_path / f"r{k}"
        d.mkdir()
        assert main(["train", "--model", "mlp", "--out", str(d / "mlp.json")]) == 0
        cfg = short_case(d, "case1", iterations=10)
        assert main(["optimize", "--config", str(cfg), "--out", str(d / "o")]) == 0
        outs.append((d / "o" / "case1_trajectory.csv").read_bytes())
    assert outs[0] == outs[1]


def test_seed_override_changes_run(artifacts, tmp_path):
    cfg = short_case(artifacts, "case1", iterations=3)
    main(["optimize", "--config", str(cfg), "--out", str(tmp_path / "a")])
    main(["optimize", "--config", str(cfg), "--out", str(tmp_path / "b"), "--seed", "5"])
    assert ((tmp_path / "a" / "case1_trajectory.csv").read_bytes()
            != (tmp_path / "b" / "case1_trajectory.csv").read_bytes())


def test_report_summary(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"name": "c", "model": "builtin:bowl", "dim": 2,
                               "optimizer": {"iterations": 300, "ridge": 0,
                                             "optimizer": {"type": "gradient_ascent"}}}))
    main(["optimize", "--config", str(cfg), "--out", str(tmp_path)])
    capsys.readouterr()
    assert main(["report", str(tmp_path / "c_trajectory.csv")]) == 0
    out = capsys.readouterr().out
    assert "records        300" in out
    assert "best" in out and "final sigma" in out


def test_report_monotone_best_is_last(tmp_path, capsys):
    from idopt.optimizer import Record, Trajectory
    t = Trajectory([Record(i, float(i), float(i), dict.fromkeys(
        ["gain_half", "pen_center", "pen_binary", "pen_cat_width", "pen_group_sum"], 0.0),
        np.zeros(1), np.ones(1)) for i in range(1, 6)])
    t.write_csv(tmp_path / "t.csv")
    main(["report", str(tmp_path / "t.csv")])
    assert "best 5 (iter 5)" in capsys.readouterr().out


def test_report_empty_file(tmp_path, capsys):
    (tmp_path / "e.csv").write_text("")
    assert main(["report", str(tmp_path / "e.csv")]) == 1
    assert "no records" in capsys.readouterr().err
