"""Problem data: grid, non-negative potential and interaction strength."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Grid, GridFunction


@dataclass(frozen=True, eq=False)
class Problem:
    """A Gross-Pitaevskii eigenvalue problem on a box grid.

    Attributes:
        grid: the discretization.
        V: potential values at the interior nodes, V >= 0.
        beta: interaction strength, beta >= 0.
        v_max: max of V, cached for norm-equivalence bounds.
    """

    grid: Grid
    V: GridFunction
    beta: float
    v_max: float = field(init=False)

    def __post_init__(self):
        if self.V.grid != self.grid:
            raise ValueError("potential does not live on the problem grid")
        if np.any(self.V.values < 0.0):
            raise ValueError("potential must be non-negative")
        if self.beta < 0.0:
            raise ValueError("beta must be non-negative")
        object.__setattr__(self, "v_max", float(np.max(self.V.values)))


def zero_potential(grid: Grid) -> GridFunction:
    return GridFunction(grid, np.zeros(grid.dof))


def harmonic_potential(grid: Grid, omega: float) -> GridFunction:
    """V = (omega^2 / 2) * sum_i (x_i - center_i)^2, centered in the box."""
    coords = grid.meshgrid()
    V = np.zeros(grid.n)
    for axis, x in enumerate(coords):
        a, b = grid.bounds[axis]
        V += (x - 0.5 * (a + b)) ** 2
    return GridFunction(grid, (0.5 * omega**2 * V).ravel())


def well_potential(grid: Grid, depth: float, lo: float, hi: float) -> GridFunction:
    """V = depth outside [lo, hi] on every axis, 0 inside."""
    if depth < 0.0:
        raise ValueError("well depth must be non-negative")
    coords = grid.meshgrid()
    inside = np.ones(grid.n, dtype=bool)
    for x in coords:
        inside &= (x >= lo) & (x <= hi)
    V = np.where(inside, 0.0, depth)
    return GridFunction(grid, V.ravel())
