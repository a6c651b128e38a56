"""Tensor-product box grids with Dirichlet boundaries and discrete inner products.

Only the interior nodes are stored; boundary values are implicitly zero, which
encodes the zero-trace condition exactly at the discrete level.  Values are
kept in lexicographic order (last axis fastest), so serialized functions are
portable across implementations.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np


class GridMismatchError(ValueError):
    """Raised when operands live on different grids."""


class MetricKind(enum.Enum):
    """Inner products available on a grid."""

    L2 = "l2"
    H1 = "h1"
    A0 = "a0"
    AU = "au"


@dataclass(frozen=True)
class Grid:
    """Uniform interior grid on an axis-aligned box.

    Attributes:
        dim: spatial dimension, 1, 2 or 3.
        bounds: per-axis (a, b) interval with a < b.
        n: per-axis interior node count (boundary nodes excluded).
        h: per-axis spacing, (b - a) / (n + 1).
    """

    dim: int
    bounds: tuple[tuple[float, float], ...]
    n: tuple[int, ...]
    h: tuple[float, ...]

    @property
    def dof(self) -> int:
        return math.prod(self.n)

    @property
    def cell_volume(self) -> float:
        """Quadrature weight of one interior node."""
        return math.prod(self.h)

    def axis_coords(self, axis: int) -> np.ndarray:
        """Interior node coordinates along one axis."""
        a, b = self.bounds[axis]
        return np.linspace(a, b, self.n[axis] + 2)[1:-1]

    def meshgrid(self) -> list[np.ndarray]:
        """Full interior coordinate arrays, shaped like the grid."""
        axes = [self.axis_coords(k) for k in range(self.dim)]
        return list(np.meshgrid(*axes, indexing="ij"))


def build_grid(
    dim: int,
    n: list[int] | tuple[int, ...],
    bounds: list[tuple[float, float]] | tuple[tuple[float, float], ...],
) -> Grid:
    """Build a grid, validating dimension, counts and intervals."""
    if dim not in (1, 2, 3):
        raise ValueError(f"dim must be 1, 2 or 3, got {dim}")
    if len(n) != dim or len(bounds) != dim:
        raise ValueError("n and bounds must have one entry per axis")
    n = tuple(int(k) for k in n)
    if any(k < 1 for k in n):
        raise ValueError(f"interior node counts must be >= 1, got {n}")
    bounds = tuple((float(a), float(b)) for a, b in bounds)
    if any(a >= b for a, b in bounds):
        raise ValueError(f"degenerate interval in bounds {bounds}")
    h = tuple((b - a) / (k + 1) for (a, b), k in zip(bounds, n))
    return Grid(dim=dim, bounds=bounds, n=n, h=h)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real values at the interior nodes of a grid, lexicographic order."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).ravel()
        if values.size != self.grid.dof:
            raise ValueError(
                f"expected {self.grid.dof} values for grid {self.grid.n}, got {values.size}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("grid function contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def reshaped(self) -> np.ndarray:
        """Values as a dim-dimensional array (read-only view)."""
        return self.values.reshape(self.grid.n)


@dataclass(frozen=True, eq=False)
class Metric:
    """One of the inner products L2, H1, a0 or a_u.

    The AU metric depends on a base function (the ``u`` in a_u); the other
    kinds do not.
    """

    kind: MetricKind
    base: GridFunction | None = field(default=None)

    def __post_init__(self):
        if self.kind is MetricKind.AU and self.base is None:
            raise ValueError("AU metric requires a base function")


L2 = Metric(MetricKind.L2)
H1 = Metric(MetricKind.H1)
A0 = Metric(MetricKind.A0)


def _check_same_grid(*funcs: GridFunction) -> Grid:
    grid = funcs[0].grid
    for f in funcs[1:]:
        if f.grid is not grid and f.grid != grid:
            raise GridMismatchError("grid functions live on different grids")
    return grid


def apply_neg_laplacian(grid: Grid, u: GridFunction) -> GridFunction:
    """Second-order central-difference -Laplacian with zero Dirichlet boundary."""
    if u.grid != grid:
        raise GridMismatchError("function does not live on the given grid")
    v = u.reshaped()
    out = np.zeros_like(v)
    for axis in range(grid.dim):
        h2 = grid.h[axis] ** 2
        upper = np.roll(v, -1, axis=axis)
        lower = np.roll(v, 1, axis=axis)
        # roll wraps around; the Dirichlet condition zeroes the wrapped slabs
        idx_hi = [slice(None)] * grid.dim
        idx_hi[axis] = -1
        upper[tuple(idx_hi)] = 0.0
        idx_lo = [slice(None)] * grid.dim
        idx_lo[axis] = 0
        lower[tuple(idx_lo)] = 0.0
        out += (2.0 * v - upper - lower) / h2
    return GridFunction(grid, out.ravel())


def edge_difference_sum(u: GridFunction, v: GridFunction) -> float:
    """Discrete Dirichlet form summed over edges, boundary edges included.

    Bitwise symmetric in (u, v): every term is a product of one u-difference
    and one v-difference, summed in a fixed order.  Algebraically equal to
    the L2 pairing of -Laplacian(u) with v (summation by parts).
    """
    grid = _check_same_grid(u, v)
    uu = u.reshaped()
    vv = v.reshaped()
    total = 0.0
    for axis in range(grid.dim):
        du = np.diff(uu, axis=axis, prepend=0.0, append=0.0)
        dv = np.diff(vv, axis=axis, prepend=0.0, append=0.0)
        total += float(np.sum(du * dv)) / grid.h[axis] ** 2
    return grid.cell_volume * total


def inner(metric: Metric, problem, u: GridFunction, v: GridFunction) -> float:
    """Discrete inner product in the given metric.

    L2 is the uniform-weight quadrature sum; H1 is the Dirichlet edge form;
    a0 adds the potential term and a_u additionally the interaction term with
    the metric's base function.  ``problem`` may be None for L2 and H1.
    """
    grid = _check_same_grid(u, v)
    w = grid.cell_volume
    if metric.kind is MetricKind.L2:
        return w * float(np.dot(u.values, v.values))
    if metric.kind is MetricKind.H1:
        return edge_difference_sum(u, v)
    # the pointwise product u*v comes first so the form is bitwise symmetric
    if metric.kind is MetricKind.A0:
        return edge_difference_sum(u, v) + w * float(
            np.sum(problem.V.values * (u.values * v.values))
        )
    base = metric.base
    _check_same_grid(u, base)
    weight = problem.V.values + problem.beta * base.values**2
    return edge_difference_sum(u, v) + w * float(np.sum(weight * (u.values * v.values)))


def norm(metric: Metric, problem, u: GridFunction) -> float:
    """Norm induced by ``inner``."""
    return math.sqrt(inner(metric, problem, u, u))


def inner_l2(u: GridFunction, v: GridFunction) -> float:
    """Plain discrete L2 inner product, (prod h) * sum(u v)."""
    return inner(L2, None, u, v)


def norm_l2(u: GridFunction) -> float:
    return norm(L2, None, u)
