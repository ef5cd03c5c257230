import csv
import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from funkernel.cli import main
from funkernel.data_io import read_curves_csv

EXAMPLE = Path(__file__).resolve().parents[1] / "configs" / "example_run.json"


def small_config(tmp_path, **overrides):
    cfg = json.loads(EXAMPLE.read_text())
    cfg["synth"].update(n=24, n_test=8)
    cfg["lambda_grid"] = [1e-3, 1e-1]
    cfg["bandwidth_grids"] = {"sigma_c": [2.0, 4.0]}
    cfg["folds"] = 3
    cfg.update(overrides)
    (tmp_path / "data").mkdir(exist_ok=True)
    path = tmp_path / "run.json"
    path.write_text(json.dumps(cfg))
    return path


def run(cmd, cfg, *extra):
    return main([cmd, "--config", str(cfg), *extra])


def test_synth_writes_four_files_deterministically(tmp_path):
    cfg = small_config(tmp_path)
    cfg_data = json.loads(cfg.read_text())
    cfg_data["synth"]["n_test"] = 0
    cfg.write_text(json.dumps(cfg_data))
    assert run("synth", cfg) == 0
    files = sorted(p.name for p in (tmp_path / "data").iterdir())
    assert files == ["covariates.csv", "discrete.csv", "response.csv", "truth.csv"]
    first = {f: (tmp_path / "data" / f).read_bytes() for f in files}
    assert run("synth", cfg) == 0
    assert all((tmp_path / "data" / f).read_bytes() == b for f, b in first.items())


def test_synth_exit_codes(tmp_path):
    cfg = small_config(tmp_path)
    assert run("synth", cfg, "--out", str(tmp_path / "nope")) == 3
    bad = small_config(tmp_path)
    d = json.loads(bad.read_text())
    d["synth"]["n"] = 0
    bad.write_text(json.dumps(d))
    assert run("synth", bad) == 2


def test_config_errors(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert run("fit", p) == 2
    p.write_text(json.dumps({"surprise": 1}))
    assert run("fit", p) == 2
    assert run("fit", tmp_path / "missing.json") == 3


@pytest.fixture
def pipeline(tmp_path):
    cfg = small_config(tmp_path)
    assert run("synth", cfg) == 0
    return tmp_path, cfg


def test_fit_writes_model_and_report(pipeline):
    tmp_path, cfg = pipeline
    assert run("fit", cfg) == 0
    report = json.loads((tmp_path / "fit_report.json").read_text())
    for key in ("n", "m", "p", "k", "lambda", "residual", "wall_time_s"):
        assert key in report
    assert report["n"] == 24 and report["m"] == 31 and report["p"] == 2
    assert report["residual"] < 1e-8
    first = (tmp_path / "model.fkm").read_bytes()
    assert run("fit", cfg) == 0
    assert (tmp_path / "model.fkm").read_bytes() == first


def test_fit_rejects_nonpositive_lambda(pipeline):
    tmp_path, cfg = pipeline
    d = json.loads(cfg.read_text())
    for lam in (0.0, -1.0):
        d["lambda"] = lam
        cfg.write_text(json.dumps(d))
        assert run("fit", cfg) == 2
    del d["lambda"]
    cfg.write_text(json.dumps(d))
    assert run("fit", cfg) == 2


def test_fit_data_error_exit_4(pipeline, capsys):
    tmp_path, cfg = pipeline
    resp = tmp_path / "data" / "response.csv"
    lines = resp.read_text().splitlines()
    resp.write_text("\n".join(lines[:-1] + ["s023,1,notanumber"]) + "\n")
    assert run("fit", cfg) == 4
    assert "notanumber" in capsys.readouterr().err


def test_cv_table_and_determinism(pipeline):
    tmp_path, cfg = pipeline
    assert run("cv", cfg) == 0
    table = (tmp_path / "cv_scores.csv").read_text()
    rows = list(csv.DictReader(table.splitlines()))
    assert list(rows[0]) == ["fold", "lambda", "sigma_d", "sigma_c", "sigma_y", "ise", "chosen"]
    assert len(rows) == 3 * 2 * 2
    chosen = {(r["lambda"], r["sigma_c"]) for r in rows if r["chosen"] == "1"}
    assert len(chosen) == 1
    assert sum(r["chosen"] == "1" for r in rows) == 3
    best = json.loads((tmp_path / "best_config.json").read_text())
    assert "lambda_grid" not in best and best["lambda"] == float(next(iter(chosen))[0])
    assert run("cv", cfg) == 0
    assert (tmp_path / "cv_scores.csv").read_text() == table
    # the chosen configuration feeds straight into fit
    assert main(["fit", "--config", str(tmp_path / "best_config.json")]) == 0


def test_cv_single_candidate_and_fold_errors(pipeline):
    tmp_path, cfg = pipeline
    d = json.loads(cfg.read_text())
    d["lambda_grid"] = [0.01]
    d["bandwidth_grids"] = {}
    cfg.write_text(json.dumps(d))
    assert run("cv", cfg) == 0
    rows = list(csv.DictReader((tmp_path / "cv_scores.csv").read_text().splitlines()))
    assert len(rows) == 3 and all(r["chosen"] == "1" for r in rows)
    d["folds"] = 1000
    cfg.write_text(json.dumps(d))
    assert run("cv", cfg) == 2
    d["folds"] = 3
    del d["lambda_grid"]
    cfg.write_text(json.dumps(d))
    assert run("cv", cfg) == 2


def test_predict_on_training_covariates_matches_fit(pipeline):
    tmp_path, cfg = pipeline
    from funkernel import fitted_values, load_model

    assert run("fit", cfg) == 0
    d = json.loads(cfg.read_text())
    d["predict"] = {"covariates": "data/covariates.csv", "discrete": "data/discrete.csv", "out": "train_pred.csv"}
    cfg.write_text(json.dumps(d))
    assert run("predict", cfg) == 0
    ids, grid, P = read_curves_csv(tmp_path / "train_pred.csv")
    model = load_model(tmp_path / "model.fkm")
    F = fitted_values(model)
    order = [model.covariates.ids.index(i) for i in ids]
    np.testing.assert_allclose(P, F[order], rtol=1e-12, atol=1e-12 * np.abs(F).max())


def test_predict_empty_set(pipeline):
    tmp_path, cfg = pipeline
    assert run("fit", cfg) == 0
    (tmp_path / "empty_c.csv").write_text("sample_id,variable,s,value\n")
    (tmp_path / "empty_d.csv").write_text("sample_id,group,z\n")
    d = json.loads(cfg.read_text())
    d["predict"] = {"covariates": "empty_c.csv", "discrete": "empty_d.csv", "out": "empty_pred.csv"}
    cfg.write_text(json.dumps(d))
    assert run("predict", cfg) == 0
    assert (tmp_path / "empty_pred.csv").read_text() == "sample_id,t,value\n"


def test_predict_mismatched_grid(pipeline, capsys):
    tmp_path, cfg = pipeline
    assert run("fit", cfg) == 0
    src = (tmp_path / "data" / "test_covariates.csv").read_text().splitlines()
    out = [src[0]]
    for line in src[1:]:
        sid, var, s, v = line.split(",")
        if var == "x2" and float(s) == 0.5:
            s = "0.505"
        out.append(",".join([sid, var, s, v]))
    (tmp_path / "data" / "test_covariates.csv").write_text("\n".join(out) + "\n")
    assert run("predict", cfg) == 4
    assert "'x2'" in capsys.readouterr().err


def test_eval_examples(tmp_path):
    g = np.linspace(0, 1, 11)
    lines = ["sample_id,t,value"] + [f"{s},{float(t)!r},{np.sin(t) + i}" for i, s in enumerate("ab") for t in g]
    (tmp_path / "truth.csv").write_text("\n".join(lines) + "\n")
    shifted = ["sample_id,t,value"] + [f"{s},{float(t)!r},{np.sin(t) + i + 1}" for i, s in enumerate("ab") for t in g]
    (tmp_path / "pred.csv").write_text("\n".join(shifted) + "\n")
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"eval": {"predictions": "truth.csv", "truth": "truth.csv", "report": "r.json",
                                        "plot_data": "mse.csv"}}))
    assert run("eval", cfg) == 0
    assert json.loads((tmp_path / "r.json").read_text())["mean_ise"] == 0.0
    cfg.write_text(json.dumps({"eval": {"predictions": "pred.csv", "truth": "truth.csv", "report": "r.json",
                                        "plot_data": "mse.csv"}}))
    assert run("eval", cfg) == 0
    assert json.loads((tmp_path / "r.json").read_text())["mean_ise"] == pytest.approx(1.0, rel=1e-12)
    mse = list(csv.reader((tmp_path / "mse.csv").read_text().splitlines()))
    assert mse[0] == ["t", "mse"] and len(mse) == 12
    assert all(float(r[1]) == pytest.approx(1.0) for r in mse[1:])
    (tmp_path / "short.csv").write_text("\n".join(shifted[:12]) + "\n")
    cfg.write_text(json.dumps({"eval": {"predictions": "short.csv", "truth": "truth.csv"}}))
    assert run("eval", cfg) == 4


def test_full_pipeline_smoke(pipeline):
    tmp_path, cfg = pipeline
    for cmd in ("fit", "predict", "eval"):
        assert run(cmd, cfg, "--threads", "2") == 0
    metrics = json.loads((tmp_path / "eval_report.json").read_text())
    assert np.isfinite(metrics["mean_ise"])
    assert metrics["n"] == 8
    assert metrics["mean_ise"] < 0.5


def test_centering_flag(pipeline):
    tmp_path, cfg = pipeline
    d = json.loads(cfg.read_text())
    d["center"] = True
    cfg.write_text(json.dumps(d))
    for cmd in ("fit", "predict", "eval"):
        assert run(cmd, cfg) == 0
    assert np.isfinite(json.loads((tmp_path / "eval_report.json").read_text())["mean_ise"])


def test_module_entry_point(tmp_path):
    import subprocess
    import sys

    r = subprocess.run([sys.executable, "-m", "funkernel", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "synth" in r.stdout
