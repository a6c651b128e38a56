"""Linearized spectrum at a candidate ground state, and rate fitting.

The linearized operator at u* is -Laplacian + V + beta*u*^2, i.e. the AU
metric operator based at u*.  Its two smallest eigenvalues give the gap
factor min{1, (lambda1 - lambda0) / (4 lambda0)} that controls the local
contraction of all three schemes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .grid import Grid, GridFunction, GridMismatchError, Metric, MetricKind
from .greens import LinearOperator
from .problem import Problem

# Above this size the dense symmetric eigensolve is replaced by inverse power
# iteration with L2 deflation; kept low enough that the 2D benchmark grids
# stay inside the lemma suite's runtime budget.
DENSE_EIGEN_MAX_DOF = 2048


@dataclass(frozen=True, eq=False)
class SpectralReport:
    """Two smallest eigenpairs of the linearized operator."""

    lambda0: float
    lambda1: float
    v0: GridFunction

    @property
    def gap_factor(self) -> float:
        return min(1.0, (self.lambda1 - self.lambda0) / (4.0 * self.lambda0))


class EigengapDegenerateError(RuntimeError):
    """lambda1 - lambda0 below resolution: the eigengap assumption fails."""


@dataclass(frozen=True)
class RateFit:
    """Least-squares geometric fit of a decaying sequence."""

    rho: float
    r_squared: float
    window: tuple[int, int]


def linearized_operator(problem: Problem, ustar: GridFunction) -> LinearOperator:
    """Operator of the eigenproblem linearized at ustar."""
    if ustar.grid != problem.grid:
        raise GridMismatchError("linearization point does not live on the problem grid")
    return LinearOperator(Metric(MetricKind.AU, base=ustar), problem)


def lowest_two_eigen(op: LinearOperator, tol: float = 1e-10) -> SpectralReport:
    """Two smallest eigenvalues and the ground eigenvector (unit L2).

    Dense symmetric eigensolve for small operators; inverse power iteration
    through the operator's solver, with L2 deflation of v0 for the second
    eigenvalue, beyond that.
    """
    grid = op.grid
    if grid.dof <= DENSE_EIGEN_MAX_DOF:
        dense = op.matrix().toarray()
        vals, vecs = scipy.linalg.eigh(dense, subset_by_index=[0, 1])
        lam0, lam1 = float(vals[0]), float(vals[1])
        v0 = vecs[:, 0]
    else:
        lam0, v0 = _inverse_power(op, tol)
        lam1, _ = _inverse_power(op, tol, deflate=v0)
    if lam1 - lam0 < 1e-12:
        raise EigengapDegenerateError(
            f"gap {lam1 - lam0:.3e} below 1e-12: linearized eigengap degenerate"
        )
    w = grid.cell_volume
    v0 = v0 / (math.sqrt(w) * np.linalg.norm(v0))
    return SpectralReport(lam0, lam1, GridFunction(grid, v0))


def _inverse_power(op, tol, deflate=None, max_iter=10000):
    """Inverse power iteration; optionally L2-deflates a known eigenvector."""
    rng = np.random.default_rng(20240601)
    w = op.grid.cell_volume

    def project_out(x):
        if deflate is None:
            return x
        return x - (np.dot(deflate, x) / np.dot(deflate, deflate)) * deflate

    x = project_out(rng.standard_normal(op.grid.dof))
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(max_iter):
        x = project_out(op.solve(x))
        x /= np.linalg.norm(x)
        ax = op.apply(x)
        lam = float(np.dot(x, ax))
        resid = math.sqrt(w) * float(np.linalg.norm(ax - lam * x))
        if resid <= tol * lam:
            return lam, x
    raise RuntimeError(
        f"inverse power iteration did not converge (residual {resid:.3e})"
    )


def laplacian_min_eigenvalue(grid: Grid) -> float:
    """Smallest eigenvalue of the discrete Dirichlet -Laplacian, closed form.

    Per axis the 1D eigenvalues are (2/h^2)(1 - cos(pi k h / (b - a))); the
    box operator is the Kronecker sum, so its minimum is the sum of the
    per-axis minima.
    """
    total = 0.0
    for (a, b), h in zip(grid.bounds, grid.h):
        total += (2.0 / h**2) * (1.0 - math.cos(math.pi * h / (b - a)))
    return total


def estimate_poincare(grid: Grid) -> float:
    """Sharp discrete Poincare constant, 1/sqrt(lambda_min(-Laplacian))."""
    return 1.0 / math.sqrt(laplacian_min_eigenvalue(grid))


def fit_rate(deltas, threshold: float) -> RateFit:
    """Fit log(delta_n) linearly over the window where delta_n < threshold.

    rho = exp(slope) is the per-step contraction factor; r_squared measures
    fit quality.  Requires at least 5 positive entries below the threshold.
    """
    deltas = np.asarray(list(deltas), dtype=float)
    mask = (deltas < threshold) & (deltas > 0.0)
    idx = np.nonzero(mask)[0]
    if idx.size < 5:
        raise ValueError(
            f"need at least 5 entries below threshold, got {idx.size}"
        )
    start, end = int(idx[0]), int(idx[-1])
    x = idx.astype(float)
    y = np.log(deltas[idx])
    slope, intercept = np.polyfit(x, y, 1)
    fitted = slope * x + intercept
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r_squared = 1.0 if ss_tot == 0.0 else max(0.0, 1.0 - ss_res / ss_tot)
    return RateFit(rho=float(np.exp(slope)), r_squared=r_squared, window=(start, end + 1))
