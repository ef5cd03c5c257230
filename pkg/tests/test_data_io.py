import numpy as np
import pytest

from funkernel import (
    DataError,
    FitConfig,
    IncompatibleGridsError,
    IntegrityError,
    KernelConfig,
    ParseError,
    SyntheticConfig,
    UnsupportedVersionError,
    evaluate,
    fit,
    generate_synthetic,
    load_dataset,
    load_model,
    predict_many,
    save_model,
    uniform_grid,
)
from funkernel.data_io import MODEL_MAGIC, write_synthetic
from funkernel.samples import Centering

from conftest import random_problem


def write(path, text):
    path.write_text(text)
    return path


def test_empty_covariates_is_integrity_error(tmp_path):
    for text in ("", "sample_id,variable,s,value\n"):
        with pytest.raises(IntegrityError):
            load_dataset(write(tmp_path / "c.csv", text))


def test_single_sample(tmp_path):
    c = write(tmp_path / "c.csv", "sample_id,variable,s,value\na,x1,0,1\na,x1,1,2\n")
    r = write(tmp_path / "r.csv", "sample_id,t,value\na,0,5\na,1,6\n")
    ts = load_dataset(c, response_path=r).training_set
    assert ts.n == 1 and ts.m == 2 and ts.p == 1 and ts.k == 0
    np.testing.assert_array_equal(ts.Y, [[5, 6]])


def test_one_hot_encoding(tmp_path):
    c = write(tmp_path / "c.csv", "sample_id,variable,s,value\n" + "".join(
        f"{i},x1,{s},{s}\n" for i in "pqr" for s in (0, 1)))
    d = write(tmp_path / "d.csv", "sample_id,grp,z\np,A,0.5\nq,B,1.5\nr,A,-1\n")
    ds = load_dataset(c, d, categorical=["grp"])
    np.testing.assert_array_equal(ds.covariates.xd, [[1, 0, 0.5], [0, 1, 1.5], [1, 0, -1]])
    assert ds.encoding["categorical"] == {"grp": ["A", "B"]}


def test_referential_integrity_names_missing_id(tmp_path):
    c = write(tmp_path / "c.csv", "sample_id,variable,s,value\na,x1,0,1\na,x1,1,2\nb,x1,0,1\nb,x1,1,2\n")
    r = write(tmp_path / "r.csv", "sample_id,t,value\na,0,5\na,1,6\n")
    with pytest.raises(IntegrityError, match="'b'"):
        load_dataset(c, response_path=r)
    d = write(tmp_path / "d.csv", "sample_id,z\na,1\nb,2\nzz,3\n")
    with pytest.raises(IntegrityError, match="'zz'"):
        load_dataset(c, d)


def test_grid_mismatch_names_variable_and_coordinate(tmp_path):
    c = write(tmp_path / "c.csv", "sample_id,variable,s,value\na,x1,0,1\na,x1,1,2\nb,x1,0,1\nb,x1,0.5,2\n")
    with pytest.raises(IncompatibleGridsError, match=r"x1.*index 1.*0\.5"):
        load_dataset(c)


def test_parse_error_row_and_column(tmp_path):
    c = write(tmp_path / "c.csv", "sample_id,variable,s,value\na,x1,0,1\na,x1,1,oops\n")
    with pytest.raises(ParseError, match=r"row 3.*'value'"):
        load_dataset(c)
    c = write(tmp_path / "c2.csv", "id,variable,s,value\n")
    with pytest.raises(ParseError):
        load_dataset(c)


def test_unknown_category_at_prediction(tmp_path):
    data = generate_synthetic(SyntheticConfig(n=6, seed=1, discrete=[
        {"name": "g", "type": "categorical", "levels": ["A", "B"]}]))
    paths = write_synthetic(tmp_path, data)
    ds = load_dataset(paths[0], paths[1], paths[2], ["g"])
    model = fit(ds.training_set, FitConfig(0.1, KernelConfig()), encoding=ds.encoding)
    text = paths[1].read_text().replace(",A\n", ",C\n", 1)
    bad = write(tmp_path / "bad.csv", text)
    with pytest.raises(DataError, match="'C'"):
        load_dataset(paths[0], bad, expect=model)


def test_csv_roundtrip_is_exact(tmp_path):
    data = generate_synthetic(SyntheticConfig(n=7, p=2, seed=3, discrete=[
        {"name": "g", "type": "categorical", "levels": ["A", "B", "C"]},
        {"name": "z", "type": "numeric"}]))
    paths = write_synthetic(tmp_path, data)
    ds = load_dataset(paths[0], paths[1], paths[2], ["g"])
    ts = data.train
    assert ds.covariates.ids == ts.covariates.ids
    for q in range(2):
        np.testing.assert_allclose(ds.covariates.xc[q], ts.covariates.xc[q], rtol=1e-12, atol=0)
        assert ds.covariates.s_grids[q] == ts.covariates.s_grids[q]
    np.testing.assert_allclose(ds.Y, ts.Y, rtol=1e-12, atol=0)
    np.testing.assert_array_equal(ds.Y, ts.Y)  # 17 significant digits round-trip binary64
    # the one-hot layout may order levels differently, but distances are unchanged
    d_mem = ((ts.covariates.xd[:, None] - ts.covariates.xd[None]) ** 2).sum(-1)
    d_csv = ((ds.covariates.xd[:, None] - ds.covariates.xd[None]) ** 2).sum(-1)
    np.testing.assert_allclose(d_csv, d_mem, rtol=1e-12)


def test_covariate_rows_sorted(tmp_path):
    data = generate_synthetic(SyntheticConfig(n=3, p=2, seed=0, s_grid={"start": 0, "stop": 1, "num": 3}))
    paths = write_synthetic(tmp_path, data)
    rows = [line.split(",") for line in paths[0].read_text().splitlines()[1:]]
    keys = [(r[1], r[0], float(r[2])) for r in rows]
    assert keys == sorted(keys)


def test_write_synthetic_requires_existing_dir(tmp_path):
    data = generate_synthetic(SyntheticConfig(n=2))
    with pytest.raises(FileNotFoundError):
        write_synthetic(tmp_path / "missing", data)


# ------------------------------------------------------------------ evaluation


def test_evaluate_examples():
    g = uniform_grid(0, 1, 101)
    truth = np.random.default_rng(0).normal(size=(3, 101))
    assert evaluate(truth, truth, g)["mean_ise"] == 0.0
    m = evaluate(truth + 1.0, truth, g)
    np.testing.assert_allclose(m["ise"], 1.0, rtol=1e-12)
    m = evaluate(truth + g.points, truth, g)
    assert all(abs(v - 1 / 3) <= 2e-4 for v in m["ise"])
    assert m["root_mean_ise"] == pytest.approx(np.sqrt(m["mean_ise"]))
    with pytest.raises(DataError):
        evaluate(truth[:2], truth, g)
    with pytest.raises(IncompatibleGridsError):
        evaluate(truth, truth, uniform_grid(0, 1, 5))


# ------------------------------------------------------------------ model files


def _model(rng, centering=False):
    ts = random_problem(rng, 6, 5, p=2, k=2)
    c = None
    if centering:
        c = Centering.from_training(ts)
        ts = c.center(ts)
    return fit(ts, FitConfig(0.05, KernelConfig(sigma_c=2.0, sigma_y=0.3)), centering=c,
               encoding={"columns": ["a", "b"], "categorical": {}, "variables": ["x1", "x2"]})


@pytest.mark.parametrize("centering", [False, True])
def test_model_roundtrip_exact(tmp_path, rng, centering):
    model = _model(rng, centering)
    save_model(model, tmp_path / "m.fkm")
    back = load_model(tmp_path / "m.fkm")
    assert np.array_equal(back.alpha, model.alpha)
    assert back.kernel == model.kernel and back.lam == model.lam
    assert back.encoding == model.encoding
    X = random_problem(rng, 10, 5, p=2, k=2).covariates
    assert np.array_equal(predict_many(back, X), predict_many(model, X))
    save_model(back, tmp_path / "m2.fkm")
    assert (tmp_path / "m.fkm").read_bytes() == (tmp_path / "m2.fkm").read_bytes()


def test_model_file_integrity(tmp_path, rng):
    path = tmp_path / "m.fkm"
    save_model(_model(rng), path)
    blob = path.read_bytes()
    assert blob.startswith(MODEL_MAGIC)
    write_b = (tmp_path / "t.fkm")
    write_b.write_bytes(blob[:-10])
    with pytest.raises(IntegrityError, match="length"):
        load_model(write_b)
    flipped = bytearray(blob)
    flipped[len(blob) // 2] ^= 0x01
    write_b.write_bytes(bytes(flipped))
    with pytest.raises(IntegrityError, match="checksum"):
        load_model(write_b)
    write_b.write_bytes(b"NOTAMODEL" + blob[9:])
    with pytest.raises(IntegrityError):
        load_model(write_b)


def test_model_version_bump(tmp_path, rng):
    path = tmp_path / "m.fkm"
    save_model(_model(rng), path)
    blob = bytearray(path.read_bytes())
    blob[len(MODEL_MAGIC)] = 2
    path.write_bytes(bytes(blob))
    with pytest.raises(UnsupportedVersionError, match=r"version 2.*version 1"):
        load_model(path)
