"""Command-line interface: ``funkernel {synth,fit,cv,predict,eval} --config RUN.json``.

Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 numerical or
data error.  Human-readable reports go to stderr; machine-readable JSON
reports go to a file.  Relative paths in the config resolve against the
config file's directory.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import _accel
from .data_io import (
    evaluate,
    fmt,
    load_dataset,
    load_model,
    read_curves_csv,
    save_model,
    write_curves_csv,
    write_synthetic,
)
from .errors import ConfigError, DataError, FunkernelError, IncompatibleGridsError
from .estimator import FitConfig, cross_validate, fit, predict_many
from .kernels import KernelConfig
from .samples import Centering
from .synthetic import SyntheticConfig, generate_synthetic

log = logging.getLogger("funkernel")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_DATA = 0, 2, 3, 4

_TOP_KEYS = {
    "data", "synth", "out_dir", "kernel", "lambda", "lambda_grid", "bandwidth_grids", "solver",
    "folds", "seed", "center", "model", "report", "cv", "predict", "eval",
}


@dataclass
class RunConfig:
    raw: dict
    base: Path
    overrides: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be an object")
        unknown = set(raw) - _TOP_KEYS
        if unknown:
            raise ConfigError(f"{path}: unknown fields {sorted(unknown)}")
        return cls(raw, path.resolve().parent)

    def path(self, value, what) -> Path:
        if not isinstance(value, str) or not value:
            raise ConfigError(f"{what} must be a non-empty path")
        p = Path(value)
        return p if p.is_absolute() else self.base / p

    def section(self, name) -> dict:
        sec = self.raw.get(name)
        if not isinstance(sec, dict):
            raise ConfigError(f"config needs a {name!r} object")
        return sec

    def get(self, name, default=None):
        return self.raw.get(name, default)

    @property
    def seed(self) -> int:
        s = self.overrides.get("seed", self.raw.get("seed", 0))
        if not isinstance(s, int) or isinstance(s, bool):
            raise ConfigError(f"seed must be an integer, got {s!r}")
        return s

    def kernel(self) -> KernelConfig:
        return KernelConfig.from_dict(self.raw.get("kernel", {}))

    def solver(self) -> dict:
        sol = self.raw.get("solver", {"name": "cholesky"})
        if isinstance(sol, str):
            sol = {"name": sol}
        if not isinstance(sol, dict):
            raise ConfigError("solver must be a name or an object")
        unknown = set(sol) - {"name", "tol", "max_iter", "jitter"}
        if unknown:
            raise ConfigError(f"unknown solver fields {sorted(unknown)}")
        return {
            "solver": sol.get("name", "cholesky"),
            "tol": sol.get("tol", 1e-10),
            "max_iter": sol.get("max_iter"),
            "jitter": sol.get("jitter", 0.0),
        }

    def dataset(self, expect=None, allow_empty=False, section="data"):
        d = self.section(section)
        cat = d.get("categorical", [])
        if not isinstance(cat, list):
            raise ConfigError("categorical must be a list of column names")
        return load_dataset(
            self.path(d.get("covariates"), f"{section}.covariates"),
            self.path(d["discrete"], f"{section}.discrete") if d.get("discrete") else None,
            self.path(d["response"], f"{section}.response") if d.get("response") else None,
            cat,
            expect=expect,
            allow_empty=allow_empty,
        )


def _number(v, what):
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise ConfigError(f"{what} must be a number, got {v!r}")
    return float(v)


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


def _center_if(cfg: RunConfig, ts):
    if cfg.get("center", False):
        c = Centering.from_training(ts)
        return c.center(ts), c
    return ts, None


# ------------------------------------------------------------------ commands


def cmd_synth(cfg: RunConfig) -> int:
    sd = dict(cfg.section("synth"))
    if "seed" in cfg.overrides:
        sd["seed"] = cfg.overrides["seed"]
    scfg = SyntheticConfig.from_dict(sd)
    out = cfg.overrides.get("out") or cfg.path(cfg.get("out_dir", "."), "out_dir")
    out = Path(out)
    data = generate_synthetic(scfg)
    paths = write_synthetic(out, data)
    if data.test is not None:
        paths += write_synthetic(out, data.test, prefix="test_")
    _say(f"synth: n={scfg.n} n_test={scfg.n_test} p={scfg.p} k={len(scfg.discrete)} "
         f"m={len(scfg.t_grid_obj)} noise_sigma={scfg.noise_sigma} seed={scfg.seed}")
    for p in paths:
        _say(f"  wrote {p}")
    return EXIT_OK


def _lambda(cfg: RunConfig) -> float:
    if "lambda" not in cfg.raw:
        raise ConfigError("fit needs 'lambda' (use the cv command for 'lambda_grid')")
    return _number(cfg.raw["lambda"], "lambda")


def cmd_fit(cfg: RunConfig) -> int:
    fc = FitConfig(_lambda(cfg), cfg.kernel(), **cfg.solver())
    model_path = Path(cfg.overrides.get("out") or cfg.path(cfg.get("model", "model.fkm"), "model"))
    ds = cfg.dataset()
    ts, centering = _center_if(cfg, ds.training_set)
    t0 = time.perf_counter()
    model = fit(ts, fc, centering=centering, encoding=ds.encoding)
    wall = time.perf_counter() - t0
    save_model(model, model_path)
    d = model.diagnostics
    report = {
        "command": "fit",
        "n": ts.n, "m": ts.m, "p": ts.p, "k": ts.k,
        "lambda": fc.lam,
        "kernel": fc.kernel.to_dict(),
        "solver": d["solver"],
        "solver_iterations": d["iterations"],
        "jitter": d["jitter"],
        "residual": d["residual"],
        "wall_time_s": wall,
        "backend": _accel.backend(),
        "model": str(model_path),
    }
    report_path = Path(cfg.path(cfg.get("report"), "report")) if cfg.get("report") else model_path.with_suffix(".fit.json")
    _write_json(report_path, report)
    _say(f"fit: n={ts.n} m={ts.m} p={ts.p} k={ts.k} lambda={fc.lam:g} solver={d['solver']} "
         f"residual={d['residual']:.3e} time={wall:.3f}s")
    _say(f"  model  {model_path}\n  report {report_path}")
    return EXIT_OK


def cmd_cv(cfg: RunConfig) -> int:
    if "lambda_grid" not in cfg.raw:
        raise ConfigError("cv needs 'lambda_grid'")
    grid = cfg.raw["lambda_grid"]
    if not isinstance(grid, list):
        raise ConfigError("lambda_grid must be a list")
    lam_grid = [_number(v, "lambda_grid entry") for v in grid]
    bw = cfg.get("bandwidth_grids", {}) or {}
    if not isinstance(bw, dict):
        raise ConfigError("bandwidth_grids must be an object")
    folds = cfg.get("folds", 5)
    kernel = cfg.kernel()
    sol = cfg.solver()
    ds = cfg.dataset()
    ts, _ = _center_if(cfg, ds.training_set)
    res = cross_validate(ts, lam_grid, bw, folds, kernel, cfg.seed, sol["solver"], sol["tol"], sol["jitter"])

    cvsec = cfg.raw.get("cv", {}) or {}
    table = Path(cfg.overrides.get("out") or cfg.path(cvsec.get("table", "cv_scores.csv"), "cv.table"))
    with open(table, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["fold", "lambda", "sigma_d", "sigma_c", "sigma_y", "ise", "chosen"])
        for r in res.rows:
            w.writerow([r.fold, fmt(r.lam), fmt(r.sigma_d), fmt(r.sigma_c), fmt(r.sigma_y), fmt(r.ise),
                        int(res.is_best(r))])
    best = dict(cfg.raw)
    best.pop("lambda_grid", None)
    best.pop("bandwidth_grids", None)
    best["lambda"] = res.best.lam
    best["kernel"] = res.best.kernel.to_dict()
    best_path = (cfg.path(cvsec["best"], "cv.best") if cvsec.get("best")
                 else table.with_name(table.stem + ".best.json"))
    _write_json(Path(best_path), best)
    k = res.best.kernel
    _say(f"cv: {folds} folds, {len(res.scores)} candidates; best lambda={res.best.lam:g} "
         f"sigma_d={k.sigma_d:g} sigma_c={k.sigma_c:g} sigma_y={k.sigma_y:g} mean ISE={res.best_score:.6g}")
    _say(f"  table {table}\n  best  {best_path}")
    return EXIT_OK


def cmd_predict(cfg: RunConfig) -> int:
    model = load_model(cfg.path(cfg.get("model", "model.fkm"), "model"))
    sec = cfg.section("predict")
    out = Path(cfg.overrides.get("out") or cfg.path(sec.get("out", "predictions.csv"), "predict.out"))
    ds = cfg.dataset(expect=model, allow_empty=True, section="predict")
    Y = predict_many(model, ds.covariates)
    write_curves_csv(out, ds.covariates.ids, model.t_grid, Y)
    _say(f"predict: {ds.covariates.n} samples on {model.m} grid points -> {out}")
    return EXIT_OK


def cmd_eval(cfg: RunConfig) -> int:
    sec = cfg.section("eval")
    pids, pgrid, P = read_curves_csv(cfg.path(sec.get("predictions"), "eval.predictions"))
    tids, tgrid, T = read_curves_csv(cfg.path(sec.get("truth"), "eval.truth"))
    if sorted(pids) != sorted(tids):
        missing = sorted(set(pids) ^ set(tids))
        raise DataError(f"prediction and truth sample ids differ (e.g. {missing[0]!r})")
    if not pids:
        raise DataError("no samples to evaluate")
    diff = tgrid.first_difference(pgrid)
    if diff is not None:
        raise IncompatibleGridsError(f"prediction and truth t-grids differ at index {diff[0]}")
    pos = {s: i for i, s in enumerate(pids)}
    P = P[[pos[s] for s in tids]]
    metrics = evaluate(P, T, tgrid)
    metrics["command"] = "eval"
    metrics["ids"] = list(tids)
    report = Path(cfg.overrides.get("out") or cfg.path(sec.get("report", "eval_report.json"), "eval.report"))
    _write_json(report, metrics)
    if sec.get("plot_data"):
        with open(cfg.path(sec["plot_data"], "eval.plot_data"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "mse"])
            for t, v in zip(tgrid.points, metrics["mse_curve"]):
                w.writerow([fmt(t), fmt(v)])
    _say(f"eval: n={metrics['n']} mean ISE={metrics['mean_ise']:.6g} root mean ISE={metrics['root_mean_ise']:.6g}")
    _say(f"  report {report}")
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "fit": cmd_fit, "cv": cmd_cv, "predict": cmd_predict, "eval": cmd_eval}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="funkernel", description="Multiple functional regression with operator-valued kernels.")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="run configuration (JSON)")
    ap.add_argument("--out", help="override the command's main output path")
    ap.add_argument("--seed", type=int, help="override the configured seed")
    ap.add_argument("--threads", type=int, default=0, help="worker threads for pairwise kernels (0 = auto)")
    ap.add_argument("--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.threads < 0:
            raise ConfigError("--threads must be >= 0")
        cfg = RunConfig.load(args.config)
        if args.seed is not None:
            cfg.overrides["seed"] = args.seed
        if args.out:
            cfg.overrides["out"] = Path(args.out)
        _accel.set_threads(args.threads)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        _say(f"config error: {exc}")
        return EXIT_CONFIG
    except OSError as exc:
        _say(f"I/O error: {exc}")
        return EXIT_IO
    except FunkernelError as exc:
        _say(f"error: {exc}")
        return EXIT_DATA


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
