"""Seeded synthetic data from the multiple functional linear model.

Responses are generated as::

    y_i(t) = a(t) + sum_k int x_ik(s) beta_k(s, t) ds + (discrete effects)(t) + eps_i(t)

with the integral evaluated by trapezoidal quadrature on the s-grid and
``eps_i(t_l)`` iid normal.  Covariate curves are random Fourier combinations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .grid import Grid, uniform_grid
from .samples import Covariates, TrainingSet

__all__ = [
    "SyntheticConfig",
    "SyntheticData",
    "generate_synthetic",
    "eval_curve",
    "eval_surface",
    "fourier_curves",
    "linear_model_response",
]


# ------------------------------------------------------------------ specs


def _num(spec, key, default=None):
    v = spec.get(key, default)
    if v is None or not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
        raise ConfigError(f"{spec.get('type', 'spec')}: {key!r} must be a finite number, got {v!r}")
    return float(v)


def eval_curve(spec, t) -> np.ndarray:
    """Evaluate a 1-d curve spec (constant, polynomial, sine, zero) at ``t``."""
    t = np.asarray(t, dtype=np.float64)
    if spec is None:
        return np.zeros_like(t)
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return np.full_like(t, float(spec))
    if not isinstance(spec, dict):
        raise ConfigError(f"invalid curve spec {spec!r}")
    kind = spec.get("type")
    if kind == "zero":
        return np.zeros_like(t)
    if kind == "constant":
        return np.full_like(t, _num(spec, "value"))
    if kind == "polynomial":
        coef = spec.get("coefficients")
        if not isinstance(coef, list) or not coef:
            raise ConfigError("polynomial curve needs a non-empty 'coefficients' list")
        return np.polynomial.polynomial.polyval(t, [float(c) for c in coef])
    if kind == "sine":
        a = _num(spec, "amplitude", 1.0)
        f = _num(spec, "frequency", 1.0)
        ph = _num(spec, "phase", 0.0)
        return a * np.sin(2.0 * np.pi * f * t + ph)
    raise ConfigError(f"unknown curve type {kind!r}")


_POLY2 = ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))


def eval_surface(spec, s, t) -> np.ndarray:
    """Evaluate a regression surface spec on the tensor grid, shape (len(s), len(t)).

    A spec is one term or a list of terms that are summed.  Terms:
    ``gaussian_bump(center_s, center_t, scale, amplitude)`` and
    ``polynomial(coefficients)`` of total degree <= 2 with coefficient order
    ``1, s, t, s^2, s t, t^2``.
    """
    s = np.asarray(s, dtype=np.float64)[:, None]
    t = np.asarray(t, dtype=np.float64)[None, :]
    if isinstance(spec, list):
        out = np.zeros((s.shape[0], t.shape[1]))
        for term in spec:
            out += eval_surface(term, s[:, 0], t[0])
        return out
    if not isinstance(spec, dict):
        raise ConfigError(f"invalid surface spec {spec!r}")
    kind = spec.get("type")
    if kind == "zero":
        return np.zeros((s.shape[0], t.shape[1]))
    if kind == "gaussian_bump":
        cs, ct = _num(spec, "center_s"), _num(spec, "center_t")
        scale = _num(spec, "scale")
        if scale <= 0:
            raise ConfigError("gaussian_bump scale must be positive")
        amp = _num(spec, "amplitude", 1.0)
        return amp * np.exp(-((s - cs) ** 2 + (t - ct) ** 2) / (2.0 * scale**2))
    if kind == "polynomial":
        coef = spec.get("coefficients")
        if not isinstance(coef, list) or not 1 <= len(coef) <= 6:
            raise ConfigError("polynomial surface takes 1 to 6 coefficients (1, s, t, s^2, s t, t^2)")
        out = np.zeros((s.shape[0], t.shape[1]))
        for c, (ds, dt) in zip(coef, _POLY2):
            out = out + float(c) * s**ds * t**dt
        return out
    raise ConfigError(f"unknown surface type {kind!r}")


def _grid_from(spec, name) -> Grid:
    if isinstance(spec, Grid):
        return spec
    if not isinstance(spec, dict):
        raise ConfigError(f"{name}: expected {{'start', 'stop', 'num'}} or 'points'")
    if "points" in spec:
        return Grid(spec["points"])
    num = spec.get("num")
    if not isinstance(num, int) or num < 2:
        raise ConfigError(f"{name}: 'num' must be an integer >= 2, got {num!r}")
    start, stop = _num(spec, "start", 0.0), _num(spec, "stop", 1.0)
    if not stop > start:
        raise ConfigError(f"{name}: stop must exceed start")
    return uniform_grid(start, stop, num)


def default_surfaces(p: int) -> list:
    return [
        {"type": "gaussian_bump", "center_s": (q + 1) / (p + 1), "center_t": 1 - (q + 1) / (p + 1),
         "scale": 0.25, "amplitude": 2.0}
        for q in range(p)
    ]


@dataclass
class SyntheticConfig:
    """Ground-truth model and sampling design.

    ``discrete`` lists raw discrete columns; each is either
    ``{"name", "type": "categorical", "levels": [...], "offsets": [curve spec per level]}``
    or ``{"name", "type": "numeric", "effect": curve spec}`` (effect scaled by the value).
    """

    n: int
    p: int = 1
    s_grid: dict = field(default_factory=lambda: {"start": 0.0, "stop": 1.0, "num": 51})
    t_grid: dict = field(default_factory=lambda: {"start": 0.0, "stop": 1.0, "num": 31})
    intercept: object = None
    surfaces: list | None = None
    harmonics: int = 3
    coef_sigma: float = 1.0
    discrete: list = field(default_factory=list)
    noise_sigma: float = 0.1
    seed: int = 0
    n_test: int = 0
    k: int | None = None

    def __post_init__(self):
        if not isinstance(self.n, int) or isinstance(self.n, bool) or self.n < 1:
            raise ConfigError(f"n must be a positive integer, got {self.n!r}")
        if not isinstance(self.n_test, int) or self.n_test < 0:
            raise ConfigError(f"n_test must be a non-negative integer, got {self.n_test!r}")
        if not isinstance(self.p, int) or self.p < 1:
            raise ConfigError(f"p must be a positive integer, got {self.p!r}")
        if not isinstance(self.harmonics, int) or self.harmonics < 0:
            raise ConfigError("harmonics must be a non-negative integer")
        if not (isinstance(self.noise_sigma, (int, float)) and self.noise_sigma >= 0):
            raise ConfigError(f"noise_sigma must be >= 0, got {self.noise_sigma!r}")
        if not self.coef_sigma >= 0:
            raise ConfigError("coef_sigma must be >= 0")
        if not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer")
        if self.surfaces is None:
            self.surfaces = default_surfaces(self.p)
        if len(self.surfaces) != self.p:
            raise ConfigError(f"{len(self.surfaces)} surfaces given for p={self.p}")
        if self.k is not None and self.k != len(self.discrete):
            raise ConfigError(f"k={self.k} but {len(self.discrete)} discrete columns are declared")
        names = set()
        for col in self.discrete:
            name = col.get("name")
            if not isinstance(name, str) or not name or name in names or name == "sample_id":
                raise ConfigError(f"discrete column needs a unique non-empty name, got {name!r}")
            names.add(name)
            kind = col.get("type")
            if kind == "categorical":
                levels = col.get("levels")
                if not isinstance(levels, list) or len(levels) < 1:
                    raise ConfigError(f"categorical column {name!r} needs 'levels'")
                offs = col.get("offsets", [None] * len(levels))
                if len(offs) != len(levels):
                    raise ConfigError(f"categorical column {name!r}: one offset curve per level")
            elif kind != "numeric":
                raise ConfigError(f"discrete column {name!r}: type must be 'categorical' or 'numeric'")
        self.s_grid_obj = _grid_from(self.s_grid, "s_grid")
        self.t_grid_obj = _grid_from(self.t_grid, "t_grid")
        # validates the specs eagerly
        for surf in self.surfaces:
            eval_surface(surf, self.s_grid_obj.points[:2], self.t_grid_obj.points[:2])
        eval_curve(self.intercept, self.t_grid_obj.points[:2])

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticConfig":
        if not isinstance(d, dict):
            raise ConfigError("synth config must be an object")
        allowed = {"n", "p", "k", "s_grid", "t_grid", "intercept", "surfaces", "harmonics", "coef_sigma",
                   "discrete", "noise_sigma", "seed", "n_test"}
        unknown = set(d) - allowed
        if unknown:
            raise ConfigError(f"unknown synth fields {sorted(unknown)}")
        if "n" not in d:
            raise ConfigError("synth config needs 'n'")
        return cls(**d)

    @property
    def categorical(self) -> list:
        return [c["name"] for c in self.discrete if c["type"] == "categorical"]


# ------------------------------------------------------------------ generation


def fourier_curves(rng: np.random.Generator, n: int, grid: Grid, harmonics: int, coef_sigma: float) -> np.ndarray:
    """Random smooth curves ``c0 + sum_h a_h cos(2 pi h u) + b_h sin(2 pi h u)``.

    ``u`` rescales the grid to [0, 1]; harmonic ``h`` coefficients have
    standard deviation ``coef_sigma / h``.
    """
    u = (grid.points - grid.start) / grid.span
    out = coef_sigma * rng.standard_normal(n)[:, None] * np.ones(len(grid))
    for h in range(1, harmonics + 1):
        ab = rng.standard_normal((n, 2)) * (coef_sigma / h)
        out += ab[:, :1] * np.cos(2 * np.pi * h * u) + ab[:, 1:] * np.sin(2 * np.pi * h * u)
    return out


def linear_model_response(xc, s_grids, t_grid: Grid, surfaces, intercept=None) -> np.ndarray:
    """Noiseless ``a(t) + sum_k int x_k(s) beta_k(s, t) ds`` on ``t_grid``, shape (n, m)."""
    n = xc[0].shape[0]
    y = np.zeros((n, len(t_grid))) + eval_curve(intercept, t_grid.points)
    for x, g, surf in zip(xc, s_grids, surfaces):
        beta = eval_surface(surf, g.points, t_grid.points)
        y += (x * g.weights) @ beta
    return y


@dataclass(frozen=True, eq=False)
class SyntheticData:
    """A generated dataset: the training set plus noiseless responses and raw discrete values."""

    train: TrainingSet
    truth: np.ndarray
    discrete_columns: tuple
    discrete_values: dict
    categorical: tuple
    test: "SyntheticData | None" = None


def _one_hot(values, levels):
    out = np.zeros((len(values), len(levels)))
    index = {lv: j for j, lv in enumerate(levels)}
    for i, v in enumerate(values):
        out[i, index[v]] = 1.0
    return out


def generate_synthetic(cfg: SyntheticConfig) -> SyntheticData:
    """Draw ``n + n_test`` samples; the last ``n_test`` form ``.test``."""
    rng = np.random.default_rng(cfg.seed)
    N = cfg.n + cfg.n_test
    sg, tg = cfg.s_grid_obj, cfg.t_grid_obj
    xc = tuple(fourier_curves(rng, N, sg, cfg.harmonics, cfg.coef_sigma) for _ in range(cfg.p))
    truth = linear_model_response(xc, (sg,) * cfg.p, tg, cfg.surfaces, cfg.intercept)

    raw = {}
    blocks = []
    for col in cfg.discrete:
        name = col["name"]
        if col["type"] == "categorical":
            levels = [str(v) for v in col["levels"]]
            idx = rng.integers(0, len(levels), size=N)
            raw[name] = [levels[i] for i in idx]
            offs = np.array([eval_curve(o, tg.points) for o in col.get("offsets", [None] * len(levels))])
            truth = truth + offs[idx]
            blocks.append(_one_hot(raw[name], levels))
        else:
            v = rng.standard_normal(N)
            raw[name] = [float(x) for x in v]
            truth = truth + v[:, None] * eval_curve(col.get("effect"), tg.points)[None, :]
            blocks.append(v[:, None])
    xd = np.hstack(blocks) if blocks else np.zeros((N, 0))
    Y = truth + cfg.noise_sigma * rng.standard_normal(truth.shape)

    width = max(3, len(str(N - 1)))
    ids = [f"s{i:0{width}d}" for i in range(N)]
    cols = tuple(c["name"] for c in cfg.discrete)
    cat = tuple(cfg.categorical)

    def part(lo, hi, test=None):
        cov = Covariates(ids[lo:hi], xd[lo:hi], tuple(c[lo:hi] for c in xc), (sg,) * cfg.p)
        return SyntheticData(
            TrainingSet(cov, Y[lo:hi], tg),
            truth[lo:hi].copy(),
            cols,
            {k: v[lo:hi] for k, v in raw.items()},
            cat,
            test,
        )

    test = part(cfg.n, N) if cfg.n_test else None
    return part(0, cfg.n, test)
