"""Observation containers: single samples and column-batched sample sets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, DimensionError, IncompatibleGridsError
from .grid import Curve, Grid

__all__ = ["Sample", "Covariates", "TrainingSet", "Centering"]


@dataclass(frozen=True, eq=False)
class Sample:
    """One observation: discrete vector ``xd``, ``p`` covariate curves, optional response."""

    id: str
    xd: np.ndarray
    xc: tuple
    y: Curve | None = None

    def __post_init__(self):
        xd = np.array(self.xd, dtype=np.float64).reshape(-1)
        xd.setflags(write=False)
        object.__setattr__(self, "xd", xd)
        object.__setattr__(self, "xc", tuple(self.xc))
        if not np.all(np.isfinite(xd)):
            raise DataError(f"sample {self.id!r}: discrete covariates must be finite")

    @property
    def k(self) -> int:
        return self.xd.size

    @property
    def p(self) -> int:
        return len(self.xc)


def _readonly(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Covariates:
    """Covariates of ``n`` samples stored column-wise.

    ``xd`` has shape (n, k); ``xc[q]`` has shape (n, len(s_grids[q])).
    """

    ids: tuple
    xd: np.ndarray
    xc: tuple
    s_grids: tuple

    def __post_init__(self):
        ids = tuple(str(i) for i in self.ids)
        n = len(ids)
        xd = np.asarray(self.xd, dtype=np.float64)
        if xd.ndim != 2:
            xd = np.zeros((n, 0)) if xd.size == 0 else xd.reshape(n, -1)
        xd = _readonly(xd)
        if xd.shape[0] != n:
            raise DimensionError(f"xd has {xd.shape[0]} rows for {n} samples")
        xc = tuple(_readonly(c) for c in self.xc)
        grids = tuple(self.s_grids)
        if len(xc) != len(grids):
            raise DimensionError(f"{len(xc)} functional covariates but {len(grids)} grids")
        for q, (c, g) in enumerate(zip(xc, grids)):
            if c.shape != (n, len(g)):
                raise IncompatibleGridsError(
                    f"functional covariate {q}: expected shape {(n, len(g))}, got {c.shape}"
                )
            if not np.all(np.isfinite(c)):
                raise DataError(f"functional covariate {q} contains non-finite values")
        if not np.all(np.isfinite(xd)):
            raise DataError("discrete covariates contain non-finite values")
        if len(set(ids)) != n:
            raise DataError("duplicate sample ids")
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "xd", xd)
        object.__setattr__(self, "xc", xc)
        object.__setattr__(self, "s_grids", grids)

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def k(self) -> int:
        return self.xd.shape[1]

    @property
    def p(self) -> int:
        return len(self.xc)

    @classmethod
    def from_samples(cls, samples, s_grids=None) -> "Covariates":
        samples = list(samples)
        if not samples and s_grids is None:
            raise DataError("cannot infer grids from an empty sample list")
        if s_grids is None:
            s_grids = tuple(c.grid for c in samples[0].xc)
        p = len(s_grids)
        k = samples[0].k if samples else 0
        for s in samples:
            if s.p != p:
                raise DimensionError(f"sample {s.id!r} has {s.p} functional covariates, expected {p}")
            if s.k != k:
                raise DimensionError(f"sample {s.id!r} has {s.k} discrete covariates, expected {k}")
            for q, (c, g) in enumerate(zip(s.xc, s_grids)):
                if c.grid != g:
                    raise IncompatibleGridsError(f"sample {s.id!r}: covariate {q} is on a different grid")
        xd = np.array([s.xd for s in samples], dtype=np.float64).reshape(len(samples), k)
        xc = tuple(
            np.array([s.xc[q].values for s in samples], dtype=np.float64).reshape(len(samples), len(s_grids[q]))
            for q in range(p)
        )
        return cls(tuple(s.id for s in samples), xd, xc, tuple(s_grids))

    def sample(self, i: int) -> Sample:
        return Sample(
            self.ids[i],
            self.xd[i],
            tuple(Curve(g, c[i]) for g, c in zip(self.s_grids, self.xc)),
        )

    def samples(self) -> list:
        return [self.sample(i) for i in range(self.n)]

    def subset(self, index) -> "Covariates":
        index = np.asarray(index, dtype=np.intp)
        return Covariates(
            tuple(self.ids[i] for i in index),
            self.xd[index],
            tuple(c[index] for c in self.xc),
            self.s_grids,
        )

    def check_compatible(self, other: "Covariates") -> None:
        """Raise if ``other`` cannot be compared with ``self`` by a kernel."""
        if other.k != self.k:
            raise DimensionError(f"discrete covariate count {other.k} != {self.k}")
        if other.p != self.p:
            raise DimensionError(f"functional covariate count {other.p} != {self.p}")
        for q, (a, b) in enumerate(zip(self.s_grids, other.s_grids)):
            diff = a.first_difference(b)
            if diff is not None:
                raise IncompatibleGridsError(
                    f"functional covariate {q}: s-grids differ at index {diff[0]} ({diff[1]} vs {diff[2]})"
                )


@dataclass(frozen=True, eq=False)
class TrainingSet:
    """Covariates plus responses ``Y`` (n, m) sampled on ``t_grid``."""

    covariates: Covariates
    Y: np.ndarray
    t_grid: Grid

    def __post_init__(self):
        Y = _readonly(self.Y)
        n = self.covariates.n
        if n < 1:
            raise DataError("a training set needs at least one sample")
        if Y.shape != (n, len(self.t_grid)):
            raise IncompatibleGridsError(
                f"responses have shape {Y.shape}, expected {(n, len(self.t_grid))}"
            )
        if not np.all(np.isfinite(Y)):
            raise DataError("responses contain non-finite values")
        object.__setattr__(self, "Y", Y)

    @classmethod
    def from_samples(cls, samples) -> "TrainingSet":
        samples = list(samples)
        if not samples:
            raise DataError("a training set needs at least one sample")
        t_grid = None
        for s in samples:
            if s.y is None:
                raise DataError(f"sample {s.id!r} has no response")
            if t_grid is None:
                t_grid = s.y.grid
            elif s.y.grid != t_grid:
                raise IncompatibleGridsError(f"sample {s.id!r}: response is on a different t-grid")
        cov = Covariates.from_samples(samples)
        return cls(cov, np.array([s.y.values for s in samples]), t_grid)

    @property
    def n(self) -> int:
        return self.covariates.n

    @property
    def m(self) -> int:
        return len(self.t_grid)

    @property
    def p(self) -> int:
        return self.covariates.p

    @property
    def k(self) -> int:
        return self.covariates.k

    @property
    def s_grids(self) -> tuple:
        return self.covariates.s_grids

    def samples(self) -> list:
        out = []
        for i in range(self.n):
            s = self.covariates.sample(i)
            out.append(Sample(s.id, s.xd, s.xc, Curve(self.t_grid, self.Y[i])))
        return out

    def subset(self, index) -> "TrainingSet":
        index = np.asarray(index, dtype=np.intp)
        return TrainingSet(self.covariates.subset(index), self.Y[index], self.t_grid)


@dataclass(frozen=True, eq=False)
class Centering:
    """Mean curves removed from covariates and responses before fitting."""

    xc_means: tuple
    y_mean: np.ndarray
    t_grid: Grid

    @classmethod
    def from_training(cls, ts: TrainingSet) -> "Centering":
        return cls(
            tuple(_readonly(c.mean(axis=0)) for c in ts.covariates.xc),
            _readonly(ts.Y.mean(axis=0)),
            ts.t_grid,
        )

    def center_covariates(self, X: Covariates) -> Covariates:
        return Covariates(X.ids, X.xd, tuple(c - mu for c, mu in zip(X.xc, self.xc_means)), X.s_grids)

    def center(self, ts: TrainingSet) -> TrainingSet:
        return TrainingSet(self.center_covariates(ts.covariates), ts.Y - self.y_mean, ts.t_grid)

    def response_mean_at(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        if points.shape == self.t_grid.points.shape and np.all(points == self.t_grid.points):
            return self.y_mean
        return np.interp(points, self.t_grid.points, self.y_mean)
