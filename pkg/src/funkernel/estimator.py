"""Function-valued kernel ridge regression with an operator-valued kernel.

Each training sample ``j`` carries a coefficient curve ``g_j`` represented by
its values ``alpha[j, l] = g_j(t_l)`` on the response grid.  The fitted
coefficients solve the block system ``(K + lam I) alpha = Y`` where block
``(i, j)`` of ``K`` is ``kappa(x_i, x_j) * B`` and ``B`` is ``K_y @ W`` for the
integral operator or the identity.  Vectors of length ``n*m`` are laid out
sample-major: entry ``i*m + l`` is sample ``i`` at grid point ``t_l``.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from . import _accel
from .errors import (
    ConfigError,
    DataError,
    NumericalError,
    UnsupportedEvaluationError,
)
from .grid import Curve, Grid
from .kernels import (
    KernelConfig,
    ResponseGram,
    block_operator,
    check_grid_match,
    kappa_matrix,
    response_gram,
)
from .samples import Centering, Covariates, Sample, TrainingSet

__all__ = [
    "Sample",
    "TrainingSet",
    "FitConfig",
    "FittedModel",
    "CVResult",
    "assemble_gram",
    "fit",
    "predict",
    "predict_many",
    "fitted_values",
    "objective",
    "cross_validate",
]

log = logging.getLogger(__name__)

SOLVERS = ("cholesky", "conjugate_gradient", "eigen")
DENSE_LIMIT = 4000
JITTER_LADDER = (1e-10, 1e-8)


@dataclass(frozen=True)
class FitConfig:
    """Regularisation, kernel and linear-solver settings.

    ``jitter`` is the first diagonal shift tried by the Cholesky path, relative
    to ``trace / (n m)``; failures escalate through ``1e-10`` and ``1e-8``.
    ``tol`` bounds the relative residual of the conjugate-gradient solve.
    """

    lam: float
    kernel: KernelConfig = field(default_factory=KernelConfig)
    solver: str = "cholesky"
    tol: float = 1e-10
    max_iter: int | None = None
    jitter: float = 0.0

    def __post_init__(self):
        if not (isinstance(self.lam, (int, float)) and math.isfinite(self.lam) and self.lam > 0):
            raise ConfigError(f"lambda must be a positive finite number, got {self.lam!r}")
        if self.solver not in SOLVERS:
            raise ConfigError(f"unknown solver {self.solver!r}; expected one of {SOLVERS}")
        if not self.tol > 0:
            raise ConfigError(f"solver tolerance must be positive, got {self.tol!r}")
        if self.jitter < 0:
            raise ConfigError(f"jitter must be non-negative, got {self.jitter!r}")
        if self.max_iter is not None and self.max_iter < 1:
            raise ConfigError("max_iter must be at least 1")
        object.__setattr__(self, "lam", float(self.lam))


@dataclass(frozen=True, eq=False)
class FittedModel:
    covariates: Covariates
    alpha: np.ndarray
    t_grid: Grid
    kernel: KernelConfig
    lam: float
    diagnostics: dict = field(default_factory=dict)
    centering: Centering | None = None
    encoding: dict | None = None

    def __post_init__(self):
        a = np.array(self.alpha, dtype=np.float64)
        if a.shape != (self.covariates.n, len(self.t_grid)):
            raise DataError(f"alpha has shape {a.shape}, expected {(self.covariates.n, len(self.t_grid))}")
        if not np.all(np.isfinite(a)):
            raise NumericalError("fitted coefficients are not finite")
        a.setflags(write=False)
        object.__setattr__(self, "alpha", a)

    @property
    def n(self) -> int:
        return self.covariates.n

    @property
    def m(self) -> int:
        return len(self.t_grid)

    @property
    def s_grids(self) -> tuple:
        return self.covariates.s_grids


# ------------------------------------------------------------------ assembly


def assemble_gram(ts: TrainingSet, kernel: KernelConfig) -> np.ndarray:
    """Dense (n m) x (n m) block Gram matrix ``[kappa_ij * B]``."""
    kap = kappa_matrix(ts.covariates, None, kernel)
    rg = response_gram(ts.t_grid, kernel)
    return _accel.kron(kap, block_operator(rg, kernel.operator))


def _apply_K(kap, B, alpha):
    # rows of the result: sum_j kappa_ij * B @ alpha_j
    return kap @ alpha @ B.T


def _relative_residual(kap, B, alpha, Y, lam):
    r = Y - _apply_K(kap, B, alpha) - lam * alpha
    ny = np.linalg.norm(Y)
    return float(np.linalg.norm(r) / ny) if ny > 0 else float(np.linalg.norm(r)), r


# ------------------------------------------------------------------ solvers
#
# All solvers work on the W-symmetrised system
#     (kappa (x) C + lam * I (x) diag(wv)) alpha = Y * wv
# with C = W K_y W, wv = w for the integral operator and C = I, wv = 1 for the
# identity operator.  Multiplying (K + lam I) alpha = Y on the left by
# I (x) diag(wv) gives this system, which is symmetric positive definite.


def _symmetric_factor(rg: ResponseGram, operator: str):
    if operator == "integral":
        return rg.WKW, rg.weights.copy()
    return np.eye(rg.m), np.ones(rg.m)


def _min_eig(S):
    try:
        return float(linalg.eigvalsh(S, subset_by_index=[0, 0])[0])
    except Exception:  # pragma: no cover - diagnostic only
        return None


def _solve_cholesky(kap, rg, operator, Y, lam, jitter):
    n, m = Y.shape
    if operator == "identity":
        # (kappa (x) I + lam I) is block diagonal after reordering: one n x n solve, m right-hand sides
        S = kap + lam * np.eye(n)
        rhs = Y
    else:
        C, wv = _symmetric_factor(rg, operator)
        S = _accel.kron(kap, C)
        S[np.diag_indices_from(S)] += lam * np.tile(wv, n)
        rhs = (Y * wv).reshape(-1)
    scale = np.trace(S) / S.shape[0]
    ladder = [jitter] + [j for j in JITTER_LADDER if j > jitter]
    for jit in ladder:
        A = S if jit == 0 else S + (jit * scale) * np.eye(S.shape[0])
        try:
            cf = linalg.cho_factor(A, lower=True, check_finite=False)
        except linalg.LinAlgError:
            log.debug("cholesky failed with jitter %g", jit)
            continue
        x = linalg.cho_solve(cf, rhs, check_finite=False)
        if np.all(np.isfinite(x)):
            break
    else:
        lo = _min_eig(S)
        raise NumericalError(
            f"Cholesky factorisation failed at every jitter level {ladder}; min eigenvalue {lo!r}",
            min_eigenvalue=lo,
        )
    alpha = x.reshape(n, m)
    B = block_operator(rg, operator)
    res, r = _relative_residual(kap, B, alpha, Y, lam)
    steps = 0
    # iterative refinement on the original system
    while steps < 3 and res > 1e-14:
        rr = r if operator == "identity" else (r * rg.weights).reshape(-1)
        delta = linalg.cho_solve(cf, rr, check_finite=False).reshape(n, m)
        cand = alpha + delta
        cres, cr = _relative_residual(kap, B, cand, Y, lam)
        steps += 1
        if not cres < res:
            break
        alpha, res, r = cand, cres, cr
    return alpha, {"solver": "cholesky", "jitter": float(jit), "refinement_steps": steps, "iterations": steps}


def _solve_cg(kap, rg, operator, Y, lam, tol, max_iter):
    n, m = Y.shape
    C, wv = _symmetric_factor(rg, operator)

    def S(V):
        return kap @ V @ C + lam * V * wv

    b = Y * wv
    diag = np.outer(np.diag(kap), np.diag(C)) + lam * wv
    if np.any(diag <= 0):
        raise NumericalError("non-positive diagonal in conjugate-gradient system")
    ny = np.linalg.norm(Y)
    target = tol * (ny if ny > 0 else 1.0)
    max_iter = max_iter or max(100, 10 * n * m)
    x = np.zeros_like(Y)
    r = b.copy()
    z = r / diag
    p = z.copy()
    rz = float(np.sum(r * z))
    it = 0
    while np.linalg.norm(r / wv) > target:
        if it >= max_iter:
            raise NumericalError(
                f"conjugate gradient did not reach tolerance {tol:g} in {max_iter} iterations "
                f"(residual {np.linalg.norm(r / wv) / max(ny, 1e-300):.3e})"
            )
        Sp = S(p)
        pSp = float(np.sum(p * Sp))
        if not pSp > 0:
            lo = _min_eig(_dense_symmetric(kap, C, wv, lam)) if n * m <= DENSE_LIMIT else None
            raise NumericalError(f"conjugate gradient breakdown (p'Sp = {pSp:.3e})", min_eigenvalue=lo)
        a = rz / pSp
        x += a * p
        r -= a * Sp
        z = r / diag
        rz_new = float(np.sum(r * z))
        p = z + (rz_new / rz) * p
        rz = rz_new
        it += 1
    return x, {"solver": "conjugate_gradient", "jitter": 0.0, "iterations": it}


def _dense_symmetric(kap, C, wv, lam):
    S = np.kron(kap, C)
    S[np.diag_indices_from(S)] += lam * np.tile(wv, kap.shape[0])
    return S


def _solve_eigen(kap, rg, operator, Y, lam):
    # kappa = U diag(nu) U', W^1/2 K_y W^1/2 = V diag(mu) V'
    nu, U = linalg.eigh(kap)
    if operator == "integral":
        sw = np.sqrt(rg.weights)
        mu, V = linalg.eigh(sw[:, None] * rg.K_y * sw[None, :])
    else:
        sw = np.ones(rg.m)
        mu, V = np.ones(rg.m), np.eye(rg.m)
    denom = np.outer(nu, mu) + lam
    if np.any(denom <= 0):
        raise NumericalError(
            "eigen solve hit a non-positive denominator", min_eigenvalue=float(nu.min() * mu.min())
        )
    Yt = U.T @ (Y * sw) @ V
    alpha = (U @ (Yt / denom) @ V.T) / sw
    return alpha, {"solver": "eigen", "jitter": 0.0, "iterations": 0}


def _solve(kap, rg, operator, Y, cfg: FitConfig):
    n, m = Y.shape
    solver = cfg.solver
    if solver == "cholesky" and n * m > DENSE_LIMIT and operator == "integral":
        log.info("n*m = %d exceeds %d; switching to conjugate gradient", n * m, DENSE_LIMIT)
        solver = "conjugate_gradient"
    if solver == "cholesky":
        alpha, info = _solve_cholesky(kap, rg, operator, Y, cfg.lam, cfg.jitter)
    elif solver == "conjugate_gradient":
        alpha, info = _solve_cg(kap, rg, operator, Y, cfg.lam, cfg.tol, cfg.max_iter)
    else:
        alpha, info = _solve_eigen(kap, rg, operator, Y, cfg.lam)
    if not np.all(np.isfinite(alpha)):
        raise NumericalError("solver produced non-finite coefficients")
    res, _ = _relative_residual(kap, block_operator(rg, operator), alpha, Y, cfg.lam)
    info["residual"] = res
    return alpha, info


# ------------------------------------------------------------------ public API


def fit(ts: TrainingSet, cfg: FitConfig, centering: Centering | None = None, encoding: dict | None = None) -> FittedModel:
    """Solve ``(K + lam I) alpha = Y`` for the training set.

    ``ts`` is used as given; when ``centering`` is supplied the caller has
    already centred ``ts`` with it and predictions add the means back.
    """
    kap = kappa_matrix(ts.covariates, None, cfg.kernel)
    rg = response_gram(ts.t_grid, cfg.kernel)
    alpha, info = _solve(kap, rg, cfg.kernel.operator, np.asarray(ts.Y), cfg)
    info.update(n=ts.n, m=ts.m, p=ts.p, k=ts.k)
    return FittedModel(ts.covariates, alpha, ts.t_grid, cfg.kernel, cfg.lam, info, centering, encoding)


def _eval_matrix(model: FittedModel, rg: ResponseGram, eval_grid: Grid | None):
    """Right factor mapping ``kappa_test @ alpha`` to values on ``eval_grid``."""
    t = model.t_grid
    if eval_grid is None or eval_grid == t:
        return block_operator(rg, model.kernel.operator).T
    pts = eval_grid.points
    if model.kernel.operator == "identity":
        idx = np.searchsorted(t.points, pts)
        ok = (idx < len(t)) & (t.points[np.minimum(idx, len(t) - 1)] == pts)
        if not np.all(ok):
            bad = float(pts[np.argmin(ok)])
            raise UnsupportedEvaluationError(
                f"the identity operator only predicts on training grid points; t={bad!r} is off-grid"
            )
        return np.eye(len(t))[:, idx]
    if pts[0] < t.start or pts[-1] > t.stop:
        raise UnsupportedEvaluationError(
            f"evaluation grid [{pts[0]!r}, {pts[-1]!r}] leaves the response domain [{t.start!r}, {t.stop!r}]"
        )
    return rg.weights[:, None] * rg.cross(pts)


def predict_many(model: FittedModel, X: Covariates, eval_grid: Grid | None = None) -> np.ndarray:
    """Predicted response values, shape (len(X), len(eval_grid or t_grid))."""
    if model.centering is not None:
        X = model.centering.center_covariates(X)
    m_out = len(eval_grid) if eval_grid is not None else model.m
    if X.n == 0:
        model.covariates.check_compatible(X)
        return np.zeros((0, m_out))
    kap = kappa_matrix(X, model.covariates, model.kernel)
    rg = response_gram(model.t_grid, model.kernel)
    out = kap @ model.alpha @ _eval_matrix(model, rg, eval_grid)
    if model.centering is not None:
        pts = model.t_grid.points if eval_grid is None else eval_grid.points
        out = out + model.centering.response_mean_at(pts)
    return out


def predict(model: FittedModel, x: Sample, eval_grid: Grid | None = None) -> Curve:
    X = Covariates.from_samples([x], model.s_grids)
    vals = predict_many(model, X, eval_grid)[0]
    return Curve(eval_grid if eval_grid is not None else model.t_grid, vals)


def fitted_values(model: FittedModel) -> np.ndarray:
    """``K @ alpha`` on the training inputs, reshaped to (n, m)."""
    kap = kappa_matrix(model.covariates, None, model.kernel)
    rg = response_gram(model.t_grid, model.kernel)
    out = _apply_K(kap, block_operator(rg, model.kernel.operator), model.alpha)
    if model.centering is not None:
        out = out + model.centering.y_mean
    return out


def objective(ts: TrainingSet, kernel: KernelConfig, lam: float, alpha) -> float:
    """Discretised regularised risk of coefficient curves ``alpha``.

    ``sum_i ||y_i - sum_j K_ij a_j||_W^2 + lam * sum_ij <K_ij a_j, a_i>_W``
    with ``||.||_W`` the trapezoid-weighted L2 norm on the t-grid.
    """
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.size != ts.n * ts.m:
        raise DataError(f"alpha has {alpha.size} entries, expected {ts.n * ts.m}")
    alpha = alpha.reshape(ts.n, ts.m)
    kap = kappa_matrix(ts.covariates, None, kernel)
    rg = response_gram(ts.t_grid, kernel)
    F = _apply_K(kap, block_operator(rg, kernel.operator), alpha)
    w = rg.weights
    R = ts.Y - F
    return float(np.sum(R * R * w) + lam * np.sum(F * alpha * w))


# ------------------------------------------------------------------ cross-validation


@dataclass(frozen=True)
class CVRow:
    fold: int
    lam: float
    sigma_d: float
    sigma_c: float
    sigma_y: float
    ise: float


@dataclass(frozen=True)
class CVResult:
    best: FitConfig
    best_score: float
    rows: tuple
    scores: tuple  # ((lam, sigma_d, sigma_c, sigma_y), mean ISE) in candidate order

    def is_best(self, row: CVRow) -> bool:
        k = self.best.kernel
        return (row.lam, row.sigma_d, row.sigma_c, row.sigma_y) == (self.best.lam, k.sigma_d, k.sigma_c, k.sigma_y)


def fold_indices(n: int, folds: int, seed: int) -> list:
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(part) for part in np.array_split(perm, folds)]


def cross_validate(
    ts: TrainingSet,
    lam_grid,
    bandwidth_grids: dict | None = None,
    folds: int = 5,
    kernel: KernelConfig | None = None,
    seed: int = 0,
    solver: str = "cholesky",
    tol: float = 1e-10,
    jitter: float = 0.0,
) -> CVResult:
    """K-fold grid search minimising held-out mean integrated squared error.

    ``bandwidth_grids`` may hold ``sigma_d``, ``sigma_c`` and ``sigma_y`` lists;
    missing entries keep the value from ``kernel``.  Ties go to the smallest
    lambda, then the smallest sigma_d, sigma_c and sigma_y in that order.
    """
    kernel = kernel or KernelConfig()
    lam_grid = [float(v) for v in lam_grid]
    if not lam_grid:
        raise ConfigError("lambda grid is empty")
    grids = dict(bandwidth_grids or {})
    unknown = set(grids) - {"sigma_d", "sigma_c", "sigma_y"}
    if unknown:
        raise ConfigError(f"unknown bandwidth grids {sorted(unknown)}")
    axes = []
    for name in ("sigma_d", "sigma_c", "sigma_y"):
        vals = grids.get(name, [getattr(kernel, name)])
        if len(vals) == 0:
            raise ConfigError(f"bandwidth grid {name} is empty")
        axes.append([float(v) for v in vals])
    if not isinstance(folds, int) or folds < 2:
        raise ConfigError(f"folds must be an integer >= 2, got {folds!r}")
    if folds > ts.n:
        raise ConfigError(f"folds ({folds}) exceeds the number of samples ({ts.n})")
    for lam in lam_grid:
        FitConfig(lam, kernel, solver, tol, None, jitter)

    splits = fold_indices(ts.n, folds, seed)
    w = ts.t_grid.weights
    rows = []
    for sd, sc, sy in itertools.product(*axes):
        kcfg = kernel.replace(sigma_d=sd, sigma_c=sc, sigma_y=sy)
        full = kappa_matrix(ts.covariates, None, kcfg)
        rg = response_gram(ts.t_grid, kcfg)
        E = block_operator(rg, kcfg.operator).T
        for f, test in enumerate(splits):
            train = np.setdiff1d(np.arange(ts.n), test)
            kap_tr = full[np.ix_(train, train)]
            kap_te = full[np.ix_(test, train)]
            Ytr = np.asarray(ts.Y)[train]
            for lam in lam_grid:
                alpha, _ = _solve(kap_tr, rg, kcfg.operator, Ytr, FitConfig(lam, kcfg, solver, tol, None, jitter))
                D = kap_te @ alpha @ E - ts.Y[test]
                ise = float(np.mean(np.sum(D * D * w, axis=1)))
                rows.append(CVRow(f, lam, sd, sc, sy, ise))

    scores = {}
    for r in rows:
        scores.setdefault((r.lam, r.sigma_d, r.sigma_c, r.sigma_y), []).append(r.ise)
    ordered = tuple((key, float(np.mean(v))) for key, v in scores.items())
    (lam, sd, sc, sy), best = min(ordered, key=lambda kv: (kv[1], kv[0]))
    rows.sort(key=lambda r: (r.fold, r.lam, r.sigma_d, r.sigma_c, r.sigma_y))
    best_cfg = FitConfig(lam, kernel.replace(sigma_d=sd, sigma_c=sc, sigma_y=sy), solver, tol, None, jitter)
    return CVResult(best_cfg, best, tuple(rows), ordered)
