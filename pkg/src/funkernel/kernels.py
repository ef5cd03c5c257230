"""Scalar input kernels, the response kernel and operator-valued blocks.

The operator-valued kernel acts on a response curve ``g`` as::

    (K(x_i, x_j) g)(t) = [k_d(x_i^d, x_j^d) + k_c(x_i^c, x_j^c)] * int k_y(s, t) g(s) ds

Curves are represented by their values on the response grid, so the integral
operator becomes the matrix ``K_y @ W`` with ``W = diag(trapezoid weights)``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import _accel
from .errors import ConfigError, DimensionError, IncompatibleGridsError
from .grid import Grid, l2_distance_sq, l2_inner
from .samples import Covariates, Sample

__all__ = [
    "KernelConfig",
    "ResponseGram",
    "k_discrete",
    "k_functional",
    "kappa",
    "kappa_matrix",
    "response_gram",
    "operator_block",
    "median_bandwidth",
]

FUNCTIONAL_KERNELS = ("linear", "gaussian")
OPERATORS = ("integral", "identity")


@dataclass(frozen=True)
class KernelConfig:
    """Kernel choices and bandwidths.

    ``sigma_c`` is ignored by the linear functional kernel.  The discrete and
    response kernels are always Gaussian, ``exp(-d**2 / (2 sigma**2))``, and the
    two input kernels are always summed.
    """

    sigma_d: float = 1.0
    functional: str = "gaussian"
    sigma_c: float = 1.0
    sigma_y: float = 0.1
    operator: str = "integral"

    def __post_init__(self):
        if self.functional not in FUNCTIONAL_KERNELS:
            raise ConfigError(f"unknown functional kernel {self.functional!r}; expected one of {FUNCTIONAL_KERNELS}")
        if self.operator not in OPERATORS:
            raise ConfigError(f"unknown operator {self.operator!r}; expected one of {OPERATORS}")
        for name in ("sigma_d", "sigma_c", "sigma_y"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be a positive finite number, got {v!r}")
            object.__setattr__(self, name, float(v))

    def replace(self, **changes) -> "KernelConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        functional = {"name": self.functional}
        if self.functional == "gaussian":
            functional["sigma"] = self.sigma_c
        return {
            "discrete": {"name": "gaussian", "sigma": self.sigma_d},
            "functional": functional,
            "response": {"name": "gaussian", "sigma": self.sigma_y},
            "operator": self.operator,
            "combine": "sum",
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KernelConfig":
        if not isinstance(d, dict):
            raise ConfigError("kernel config must be an object")
        kw = {}
        disc = d.get("discrete", {"name": "gaussian"})
        if disc.get("name", "gaussian") != "gaussian":
            raise ConfigError(f"unsupported discrete kernel {disc.get('name')!r}")
        if "sigma" in disc:
            kw["sigma_d"] = disc["sigma"]
        func = d.get("functional", {"name": "gaussian"})
        kw["functional"] = func.get("name", "gaussian")
        if "sigma" in func:
            kw["sigma_c"] = func["sigma"]
        resp = d.get("response", {"name": "gaussian"})
        if resp.get("name", "gaussian") != "gaussian":
            raise ConfigError(f"unsupported response kernel {resp.get('name')!r}")
        if "sigma" in resp:
            kw["sigma_y"] = resp["sigma"]
        if "operator" in d:
            kw["operator"] = d["operator"]
        if d.get("combine", "sum") != "sum":
            raise ConfigError("only combine='sum' is supported")
        return cls(**kw)

    def as_flat(self) -> dict:
        return asdict(self)


def _gauss(d2, sigma):
    return np.exp(-np.asarray(d2) / (2.0 * sigma * sigma))


def k_discrete(u, v, sigma_d: float) -> float:
    """Gaussian kernel on discrete covariate vectors; ``0.0`` when both are empty."""
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if u.size != v.size:
        raise DimensionError(f"discrete vectors have lengths {u.size} and {v.size}")
    if u.size == 0:
        return 0.0
    d = u - v
    return float(_gauss(np.dot(d, d), sigma_d))


def k_functional(xc_i, xc_j, cfg: KernelConfig) -> float:
    """Kernel on tuples of ``p`` curves (linear or Gaussian in the summed L2 geometry)."""
    if len(xc_i) != len(xc_j):
        raise DimensionError(f"curve tuples have lengths {len(xc_i)} and {len(xc_j)}")
    if cfg.functional == "linear":
        return float(sum(l2_inner(a, b) for a, b in zip(xc_i, xc_j)))
    d2 = sum(l2_distance_sq(a, b) for a, b in zip(xc_i, xc_j))
    return float(_gauss(d2, cfg.sigma_c))


def kappa(x_i: Sample, x_j: Sample, cfg: KernelConfig) -> float:
    """Scalar factor ``k_d + k_c`` of the operator-valued kernel."""
    return k_discrete(x_i.xd, x_j.xd, cfg.sigma_d) + k_functional(x_i.xc, x_j.xc, cfg)


def kappa_matrix(A: Covariates, B: Covariates | None, cfg: KernelConfig) -> np.ndarray:
    """Vectorised ``[kappa(a_i, b_j)]`` of shape (len(A), len(B)).

    With ``B=None`` the training matrix ``kappa(A, A)`` is returned, exactly
    symmetric.
    """
    sym = B is None
    if sym:
        B = A
    else:
        A.check_compatible(B)
    out = np.zeros((A.n, B.n))
    if A.k:
        out += _gauss(_accel.sqdist_weighted(A.xd, B.xd, np.ones(A.k)), cfg.sigma_d)
    if cfg.functional == "linear":
        for a, b, g in zip(A.xc, B.xc, A.s_grids):
            out += _accel.inner_weighted(a, b, g.weights)
    elif A.p:
        d2 = np.zeros((A.n, B.n))
        for a, b, g in zip(A.xc, B.xc, A.s_grids):
            d2 += _accel.sqdist_weighted(a, b, g.weights)
        out += _gauss(d2, cfg.sigma_c)
    if sym:
        out = 0.5 * (out + out.T)
    return out


def median_bandwidth(X: Covariates) -> float:
    """Median pairwise distance between functional covariate tuples (for sigma_c)."""
    d2 = np.zeros((X.n, X.n))
    for a, g in zip(X.xc, X.s_grids):
        d2 += _accel.sqdist_weighted(a, a, g.weights)
    iu = np.triu_indices(X.n, 1)
    med = float(np.sqrt(np.median(d2[iu]))) if iu[0].size else 1.0
    return med if med > 0 else 1.0


@dataclass(frozen=True, eq=False)
class ResponseGram:
    """Response-kernel Gram matrix on the t-grid together with the grid weights."""

    grid: Grid
    K_y: np.ndarray
    sigma_y: float

    @property
    def weights(self) -> np.ndarray:
        return self.grid.weights

    @property
    def m(self) -> int:
        return len(self.grid)

    @property
    def KW(self) -> np.ndarray:
        """Discretised integral operator ``K_y @ diag(w)``."""
        return self.K_y * self.weights[None, :]

    @property
    def WKW(self) -> np.ndarray:
        w = self.weights
        return w[:, None] * self.K_y * w[None, :]

    def cross(self, points) -> np.ndarray:
        """``k_y(t_l, points[r])`` with shape (m, len(points))."""
        return _accel.gaussian_1d(self.grid.points, np.asarray(points, dtype=np.float64), self.sigma_y)


def response_gram(t_grid: Grid, cfg: KernelConfig) -> ResponseGram:
    if not isinstance(t_grid, Grid):
        t_grid = Grid(t_grid)
    K = _accel.gaussian_1d(t_grid.points, t_grid.points, cfg.sigma_y)
    K = 0.5 * (K + K.T)
    np.fill_diagonal(K, 1.0)
    K.setflags(write=False)
    return ResponseGram(t_grid, K, cfg.sigma_y)


def operator_block(kappa_ij: float, rg: ResponseGram, operator: str = "integral") -> np.ndarray:
    """The m x m matrix of ``K(x_i, x_j)`` acting on grid values."""
    if operator == "integral":
        return kappa_ij * rg.KW
    if operator == "identity":
        return kappa_ij * np.eye(rg.m)
    raise ConfigError(f"unknown operator {operator!r}")


def block_operator(rg: ResponseGram, operator: str) -> np.ndarray:
    """``operator_block(1.0, ...)``: the shared m x m factor of every block."""
    return operator_block(1.0, rg, operator)


def check_grid_match(expected: Grid, got: Grid, what: str) -> None:
    diff = expected.first_difference(got)
    if diff is not None:
        raise IncompatibleGridsError(f"{what}: grids differ at index {diff[0]} ({diff[1]} vs {diff[2]})")
