"""CSV datasets, model files and evaluation metrics.

File formats
------------
functional covariates
    ``sample_id,variable,s,value``; rows sorted by (variable, sample_id, s).
discrete covariates
    ``sample_id,<col1>,<col2>,...``; categorical columns are declared by the
    caller and one-hot encoded.
responses, predictions, ground truth
    ``sample_id,t,value``.
model file
    ``FUNKERNEL`` magic, little-endian uint32 format version, uint64 payload
    length, a JSON payload (arrays base64-encoded float64) and a trailing
    SHA-256 of everything before it.
"""

from __future__ import annotations

import base64
import csv
import hashlib
import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, IncompatibleGridsError, IntegrityError, ParseError, UnsupportedVersionError
from .estimator import FittedModel
from .grid import Grid
from .kernels import KernelConfig
from .samples import Centering, Covariates, TrainingSet

__all__ = [
    "Dataset",
    "load_dataset",
    "read_curves_csv",
    "write_covariates_csv",
    "write_discrete_csv",
    "write_curves_csv",
    "write_synthetic",
    "encode_discrete",
    "evaluate",
    "save_model",
    "load_model",
    "MODEL_MAGIC",
    "MODEL_VERSION",
]

MODEL_MAGIC = b"FUNKERNEL"
MODEL_VERSION = 1
_HEADER = struct.Struct("<IQ")
_DIGEST = 32


def fmt(x: float) -> str:
    return format(float(x), ".17g")


# ------------------------------------------------------------------ CSV reading


def _float(cell, path, row, col):
    try:
        v = float(cell)
    except (TypeError, ValueError):
        raise ParseError(f"{path}: row {row}, column {col!r}: non-numeric value {cell!r}") from None
    if not math.isfinite(v):
        raise DataError(f"{path}: row {row}, column {col!r}: non-finite value {cell!r}")
    return v


def _rows(path, expected_header):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise IntegrityError(f"{path}: file is empty")
        header = [h.strip() for h in header]
        if expected_header is not None and header != expected_header:
            raise ParseError(f"{path}: expected header {','.join(expected_header)}, got {','.join(header)}")
        rows = [r for r in reader if r]
    return header, rows


def _assemble(path, groups, order, what):
    """Turn {id: [(coord, value)]} into a common grid and an (n, m) array."""
    grid_pts = None
    first = None
    out = []
    for sid in order:
        pairs = sorted(groups[sid])
        pts = np.array([c for c, _ in pairs])
        vals = np.array([v for _, v in pairs])
        if grid_pts is None:
            grid_pts, first = pts, sid
            if pts.size != np.unique(pts).size:
                raise DataError(f"{path}: {what}: duplicate coordinates for sample {sid!r}")
        elif pts.shape != grid_pts.shape or np.any(pts != grid_pts):
            n = min(pts.size, grid_pts.size)
            neq = np.nonzero(pts[:n] != grid_pts[:n])[0]
            i = int(neq[0]) if neq.size else n
            a = grid_pts[i] if i < grid_pts.size else None
            b = pts[i] if i < pts.size else None
            raise IncompatibleGridsError(
                f"{path}: {what}: sample {sid!r} grid differs from sample {first!r} "
                f"at index {i} ({b!r} vs {a!r})"
            )
        out.append(vals)
    try:
        grid = Grid(grid_pts)
    except Exception as exc:
        raise DataError(f"{path}: {what}: {exc}") from None
    return grid, np.array(out).reshape(len(order), len(grid))


def read_functional_csv(path):
    """Parse a covariates file into (ids, variable names, grids, arrays)."""
    header, rows = _rows(path, ["sample_id", "variable", "s", "value"])
    if not rows:
        return [], [], [], []
    ids, seen = [], set()
    data = {}
    for r, row in enumerate(rows, start=2):
        if len(row) != 4:
            raise ParseError(f"{path}: row {r}: expected 4 columns, got {len(row)}")
        sid, var = row[0].strip(), row[1].strip()
        s = _float(row[2], path, r, "s")
        v = _float(row[3], path, r, "value")
        if sid not in seen:
            seen.add(sid)
            ids.append(sid)
        data.setdefault(var, {}).setdefault(sid, []).append((s, v))
    # variable order follows the file's sort order
    variables = sorted(data)
    grids, arrays = [], []
    for var in variables:
        missing = [sid for sid in ids if sid not in data[var]]
        if missing:
            raise IntegrityError(f"{path}: sample_id {missing[0]!r} has no values for variable {var!r}")
        g, a = _assemble(path, data[var], ids, f"variable {var!r}")
        grids.append(g)
        arrays.append(a)
    return ids, variables, grids, arrays


def read_curves_csv(path):
    """Parse a ``sample_id,t,value`` file into (ids, grid or None, (n, m) array)."""
    _, rows = _rows(path, ["sample_id", "t", "value"])
    ids, groups = [], {}
    for r, row in enumerate(rows, start=2):
        if len(row) != 3:
            raise ParseError(f"{path}: row {r}: expected 3 columns, got {len(row)}")
        sid = row[0].strip()
        if sid not in groups:
            ids.append(sid)
            groups[sid] = []
        groups[sid].append((_float(row[1], path, r, "t"), _float(row[2], path, r, "value")))
    if not ids:
        return [], None, np.zeros((0, 0))
    grid, Y = _assemble(path, groups, ids, "response")
    return ids, grid, Y


def read_discrete_csv(path):
    header, rows = _rows(path, None)
    if not header or header[0] != "sample_id":
        raise ParseError(f"{path}: first column must be sample_id")
    cols = header[1:]
    if len(set(cols)) != len(cols):
        raise ParseError(f"{path}: duplicate column names")
    table = {}
    for r, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise ParseError(f"{path}: row {r}: expected {len(header)} columns, got {len(row)}")
        sid = row[0].strip()
        if sid in table:
            raise DataError(f"{path}: duplicate sample_id {sid!r}")
        table[sid] = (r, [c.strip() for c in row[1:]])
    return cols, table


def encode_discrete(path, cols, table, ids, categorical=(), levels=None):
    """One-hot encode categorical columns; parse the rest as numbers.

    ``levels`` maps categorical columns to their level lists (as stored in a
    model); when absent the sorted distinct values are used.
    """
    categorical = list(categorical)
    unknown = [c for c in categorical if c not in cols]
    if unknown:
        raise DataError(f"{path}: declared categorical column {unknown[0]!r} not in file")
    levels = {k: list(v) for k, v in (levels or {}).items()}
    blocks = []
    for j, col in enumerate(cols):
        values = [table[sid][1][j] for sid in ids]
        if col in categorical:
            lv = levels.get(col)
            if lv is None:
                lv = sorted(set(values))
                levels[col] = lv
            index = {v: i for i, v in enumerate(lv)}
            block = np.zeros((len(ids), len(lv)))
            for i, v in enumerate(values):
                if v not in index:
                    raise DataError(f"{path}: column {col!r}: unknown category {v!r} (known: {lv})")
                block[i, index[v]] = 1.0
        else:
            block = np.array([_float(v, path, table[sid][0], col) for v, sid in zip(values, ids)]).reshape(-1, 1)
        blocks.append(block)
    xd = np.hstack(blocks) if blocks else np.zeros((len(ids), 0))
    return xd, {"columns": list(cols), "categorical": {c: levels[c] for c in categorical}}


@dataclass(frozen=True, eq=False)
class Dataset:
    covariates: Covariates
    variables: tuple
    encoding: dict
    Y: np.ndarray | None = None
    t_grid: Grid | None = None

    @property
    def training_set(self) -> TrainingSet:
        if self.Y is None:
            raise DataError("dataset has no responses")
        return TrainingSet(self.covariates, self.Y, self.t_grid)


def load_dataset(
    covariates_path,
    discrete_path=None,
    response_path=None,
    categorical=(),
    *,
    expect=None,
    allow_empty=False,
) -> Dataset:
    """Read and cross-validate the dataset files.

    ``expect`` is a fitted model whose variable names, grids and discrete
    encoding the covariates must match (prediction sets).  ``allow_empty``
    permits a header-only covariates file when ``expect`` supplies the grids.
    """
    ids, variables, grids, arrays = read_functional_csv(covariates_path)
    enc_expected = (expect.encoding or {}) if expect is not None else None
    if not ids:
        if not (allow_empty and expect is not None):
            raise IntegrityError(f"{covariates_path}: no samples")
        k = expect.covariates.k
        cov = Covariates((), np.zeros((0, k)), tuple(np.zeros((0, len(g))) for g in expect.s_grids), expect.s_grids)
        return Dataset(cov, tuple(enc_expected.get("variables", ())), dict(enc_expected))

    if expect is not None:
        want = list(enc_expected.get("variables", [f"x{q + 1}" for q in range(expect.covariates.p)]))
        if variables != want:
            extra = sorted(set(variables) ^ set(want))
            raise IncompatibleGridsError(
                f"{covariates_path}: functional variables {variables} do not match the model's {want}"
                + (f" (offending: {extra[0]!r})" if extra else "")
            )
        for var, g, mg in zip(variables, grids, expect.s_grids):
            diff = mg.first_difference(g)
            if diff is not None:
                raise IncompatibleGridsError(
                    f"{covariates_path}: variable {var!r}: s-grid differs from the model's at index "
                    f"{diff[0]} ({diff[2]!r} vs {diff[1]!r})"
                )
        grids = list(expect.s_grids)

    if discrete_path is not None:
        cols, table = read_discrete_csv(discrete_path)
        for sid in ids:
            if sid not in table:
                raise IntegrityError(f"{discrete_path}: sample_id {sid!r} missing")
        for sid in table:
            if sid not in set(ids):
                raise IntegrityError(f"{covariates_path}: sample_id {sid!r} (from {discrete_path}) missing")
        if enc_expected is not None:
            if cols != enc_expected.get("columns", []):
                raise DataError(f"{discrete_path}: columns {cols} do not match the model's {enc_expected.get('columns')}")
            categorical = list(enc_expected.get("categorical", {}))
            levels = enc_expected.get("categorical", {})
        else:
            levels = None
        xd, enc = encode_discrete(discrete_path, cols, table, ids, categorical, levels)
    else:
        if enc_expected is not None and enc_expected.get("columns"):
            raise DataError("the model expects discrete covariates but no discrete file was given")
        if categorical:
            raise DataError("categorical columns declared but no discrete file was given")
        xd, enc = np.zeros((len(ids), 0)), {"columns": [], "categorical": {}}
    enc["variables"] = list(variables)
    cov = Covariates(tuple(ids), xd, tuple(arrays), tuple(grids))

    Y = t_grid = None
    if response_path is not None:
        rids, t_grid, R = read_curves_csv(response_path)
        if not rids:
            raise IntegrityError(f"{response_path}: no samples")
        pos = {sid: i for i, sid in enumerate(rids)}
        for sid in ids:
            if sid not in pos:
                raise IntegrityError(f"{response_path}: sample_id {sid!r} missing")
        for sid in rids:
            if sid not in set(ids):
                raise IntegrityError(f"{covariates_path}: sample_id {sid!r} (from {response_path}) missing")
        Y = R[[pos[sid] for sid in ids]]
    return Dataset(cov, tuple(variables), enc, Y, t_grid)


# ------------------------------------------------------------------ CSV writing


def write_covariates_csv(path, cov: Covariates, variables=None):
    variables = list(variables or [f"x{q + 1}" for q in range(cov.p)])
    order = sorted(range(cov.p), key=lambda q: variables[q])
    ids = sorted(range(cov.n), key=lambda i: cov.ids[i])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id", "variable", "s", "value"])
        for q in order:
            pts = cov.s_grids[q].points
            for i in ids:
                for s, v in zip(pts, cov.xc[q][i]):
                    w.writerow([cov.ids[i], variables[q], fmt(s), fmt(v)])


def write_discrete_csv(path, ids, columns, values: dict):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id", *columns])
        for i in sorted(range(len(ids)), key=lambda i: ids[i]):
            row = [ids[i]]
            for c in columns:
                v = values[c][i]
                row.append(v if isinstance(v, str) else fmt(v))
            w.writerow(row)


def write_curves_csv(path, ids, grid: Grid, Y):
    Y = np.asarray(Y)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sample_id", "t", "value"])
        if len(ids) == 0:
            return
        for i in sorted(range(len(ids)), key=lambda i: ids[i]):
            for t, v in zip(grid.points, Y[i]):
                w.writerow([ids[i], fmt(t), fmt(v)])


def write_synthetic(out_dir, data, prefix="") -> list:
    """Write covariates, discrete, response and truth CSVs; returns the paths."""
    out_dir = Path(out_dir)
    if not out_dir.is_dir():
        raise FileNotFoundError(f"output directory {str(out_dir)!r} does not exist")
    ts = data.train
    paths = [out_dir / f"{prefix}{name}.csv" for name in ("covariates", "discrete", "response", "truth")]
    write_covariates_csv(paths[0], ts.covariates)
    write_discrete_csv(paths[1], ts.covariates.ids, data.discrete_columns, data.discrete_values)
    write_curves_csv(paths[2], ts.covariates.ids, ts.t_grid, ts.Y)
    write_curves_csv(paths[3], ts.covariates.ids, ts.t_grid, data.truth)
    return paths


# ------------------------------------------------------------------ evaluation


def evaluate(pred, truth, t_grid: Grid) -> dict:
    """Integrated squared error per sample and its mean / root mean.

    Also returns ``mse_curve``, the pointwise mean squared error over samples.
    """
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise DataError(f"prediction shape {pred.shape} != truth shape {truth.shape}")
    if pred.ndim != 2 or pred.shape[1] != len(t_grid):
        raise IncompatibleGridsError(f"curves have {pred.shape[-1]} points, grid has {len(t_grid)}")
    D = pred - truth
    ise = (D * D) @ t_grid.weights
    n = pred.shape[0]
    mean = float(ise.mean()) if n else 0.0
    return {
        "n": n,
        "ise": ise.tolist(),
        "mean_ise": mean,
        "root_mean_ise": math.sqrt(mean),
        "mse_curve": ((D * D).mean(axis=0) if n else np.zeros(len(t_grid))).tolist(),
    }


# ------------------------------------------------------------------ model files


def _arr(a) -> dict:
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"dtype": "<f8", "shape": list(a.shape), "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _unarr(d) -> np.ndarray:
    if d.get("dtype") != "<f8":
        raise IntegrityError(f"unsupported array dtype {d.get('dtype')!r}")
    raw = base64.b64decode(d["data"])
    a = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    return a.reshape(d["shape"])


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def save_model(model: FittedModel, path) -> None:
    cov = model.covariates
    payload = {
        "kernel": model.kernel.to_dict(),
        "lambda": model.lam,
        "t_grid": _arr(model.t_grid.points),
        "s_grids": [_arr(g.points) for g in cov.s_grids],
        "ids": list(cov.ids),
        "xd": _arr(cov.xd),
        "xc": [_arr(c) for c in cov.xc],
        "alpha": _arr(model.alpha),
        "diagnostics": _jsonable(model.diagnostics),
        "encoding": _jsonable(model.encoding),
        "centering": None
        if model.centering is None
        else {"xc_means": [_arr(c) for c in model.centering.xc_means], "y_mean": _arr(model.centering.y_mean)},
    }
    body = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")
    head = MODEL_MAGIC + _HEADER.pack(MODEL_VERSION, len(body))
    digest = hashlib.sha256(head + body).digest()
    Path(path).write_bytes(head + body + digest)


def load_model(path) -> FittedModel:
    blob = Path(path).read_bytes()
    n0 = len(MODEL_MAGIC)
    if len(blob) < n0 + _HEADER.size or not blob.startswith(MODEL_MAGIC):
        raise IntegrityError(f"{path}: not a funkernel model file")
    version, length = _HEADER.unpack_from(blob, n0)
    if version != MODEL_VERSION:
        raise UnsupportedVersionError(
            f"{path}: model format version {version} is not supported (this build reads version {MODEL_VERSION})"
        )
    start = n0 + _HEADER.size
    if len(blob) != start + length + _DIGEST:
        raise IntegrityError(
            f"{path}: length mismatch (expected {start + length + _DIGEST} bytes, found {len(blob)})"
        )
    if hashlib.sha256(blob[: start + length]).digest() != blob[start + length:]:
        raise IntegrityError(f"{path}: checksum mismatch")
    try:
        d = json.loads(blob[start: start + length])
        t_grid = Grid(_unarr(d["t_grid"]))
        s_grids = tuple(Grid(_unarr(g)) for g in d["s_grids"])
        cov = Covariates(tuple(d["ids"]), _unarr(d["xd"]), tuple(_unarr(c) for c in d["xc"]), s_grids)
        cen = d.get("centering")
        centering = None
        if cen is not None:
            centering = Centering(tuple(_unarr(c) for c in cen["xc_means"]), _unarr(cen["y_mean"]), t_grid)
        return FittedModel(
            cov,
            _unarr(d["alpha"]),
            t_grid,
            KernelConfig.from_dict(d["kernel"]),
            float(d["lambda"]),
            d.get("diagnostics") or {},
            centering,
            d.get("encoding"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise IntegrityError(f"{path}: malformed payload: {exc}") from None
