"""Sampling grids, sampled curves and trapezoidal L2 geometry."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import IncompatibleGridsError, InvalidGridError

__all__ = [
    "Grid",
    "Curve",
    "trapezoid_weights",
    "uniform_grid",
    "integrate",
    "l2_inner",
    "l2_distance_sq",
]


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


def trapezoid_weights(points) -> np.ndarray:
    """Trapezoidal quadrature weights for strictly increasing ``points``.

    Parameters
    ----------
    points : array_like, shape (m,)
        Sample coordinates, ``m >= 2``.

    Returns
    -------
    weights : ndarray, shape (m,)
        ``w[0] = (p[1]-p[0])/2``, ``w[l] = (p[l+1]-p[l-1])/2`` in the
        interior and ``w[-1] = (p[-1]-p[-2])/2``.
    """
    p = np.asarray(points, dtype=np.float64)
    if p.ndim != 1 or p.size < 2:
        raise InvalidGridError(f"a grid needs at least 2 points, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise InvalidGridError("grid points must be finite")
    h = np.diff(p)
    if np.any(h <= 0):
        bad = int(np.argmax(h <= 0))
        raise InvalidGridError(
            f"grid points must be strictly increasing (p[{bad}]={p[bad]!r}, p[{bad + 1}]={p[bad + 1]!r})"
        )
    w = np.empty_like(p)
    w[0] = h[0] / 2.0
    w[-1] = h[-1] / 2.0
    w[1:-1] = (h[:-1] + h[1:]) / 2.0
    return w


@dataclass(frozen=True, eq=False)
class Grid:
    """Strictly increasing sample points with trapezoidal weights."""

    points: np.ndarray
    weights: np.ndarray = field(init=False)

    def __post_init__(self):
        pts = _frozen(self.points)
        w = trapezoid_weights(pts)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", _frozen(w))

    def __len__(self) -> int:
        return self.points.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, Grid):
            return NotImplemented
        return self.points.shape == other.points.shape and bool(np.all(self.points == other.points))

    def __hash__(self) -> int:
        return hash(self.points.tobytes())

    @property
    def start(self) -> float:
        return float(self.points[0])

    @property
    def stop(self) -> float:
        return float(self.points[-1])

    @property
    def span(self) -> float:
        return self.stop - self.start

    def first_difference(self, other: "Grid"):
        """Index and coordinates of the first point where two grids differ, or None."""
        if self == other:
            return None
        n = min(len(self), len(other))
        neq = np.nonzero(self.points[:n] != other.points[:n])[0]
        if neq.size:
            i = int(neq[0])
            return i, float(self.points[i]), float(other.points[i])
        return n, (float(self.points[n]) if n < len(self) else None), (
            float(other.points[n]) if n < len(other) else None
        )


def uniform_grid(start: float, stop: float, num: int) -> Grid:
    return Grid(np.linspace(start, stop, num))


@dataclass(frozen=True, eq=False)
class Curve:
    """Real values sampled on a :class:`Grid`."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = _frozen(self.values)
        if v.shape != (len(self.grid),):
            raise IncompatibleGridsError(
                f"curve has {v.size} values but its grid has {len(self.grid)} points"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("curve values must be finite")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: Grid, f) -> "Curve":
        return cls(grid, np.broadcast_to(f(grid.points), grid.points.shape))

    def _check(self, other: "Curve"):
        if self.grid is not other.grid and self.grid != other.grid:
            raise IncompatibleGridsError("curves live on different grids")

    def __add__(self, other: "Curve") -> "Curve":
        self._check(other)
        return Curve(self.grid, self.values + other.values)

    def __sub__(self, other: "Curve") -> "Curve":
        self._check(other)
        return Curve(self.grid, self.values - other.values)

    def __mul__(self, scalar: float) -> "Curve":
        return Curve(self.grid, self.values * float(scalar))

    __rmul__ = __mul__


def integrate(c: Curve) -> float:
    return float(np.dot(c.grid.weights, c.values))


def l2_inner(a: Curve, b: Curve) -> float:
    a._check(b)
    return float(np.sum(a.grid.weights * (a.values * b.values)))


def l2_distance_sq(a: Curve, b: Curve) -> float:
    a._check(b)
    d = a.values - b.values
    return float(np.sum(a.grid.weights * d * d))
