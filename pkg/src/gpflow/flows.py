"""The three discrete projected gradient-descent schemes with line search.

The backtracking policy enforces the per-step sufficient-decrease inequality
E(u_n) - E(u_{n+1}) >= (alpha/2) * residual^2, which is exactly the condition
the energy-decay results are built on, so the theorems' hypothesis holds at
every accepted step without knowing the admissible-stepsize constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .energy import (
    SchemeKind,
    energy,
    metric_for,
    retract,
    scheme_state,
    step_decrease,
)
from .greens import LinearOperator
from .grid import GridFunction, MetricKind, norm_l2
from .problem import Problem


@dataclass(frozen=True)
class StepPolicy:
    """Stepsize policy: a fixed stepsize or backtracking from alpha0."""

    mode: str = "backtracking"  # "fixed" or "backtracking"
    alpha0: float = 0.5
    shrink: float = 0.5
    alpha_floor: float = 1e-8

    def __post_init__(self):
        if self.mode not in ("fixed", "backtracking"):
            raise ValueError("mode must be 'fixed' or 'backtracking'")
        if not 0.0 < self.shrink < 1.0:
            raise ValueError("shrink must be in (0, 1)")
        if self.alpha_floor <= 0.0 or self.alpha0 < self.alpha_floor:
            raise ValueError("need alpha0 >= alpha_floor > 0")


@dataclass(frozen=True)
class RunConfig:
    """Configuration of one gradient-flow run."""

    scheme: SchemeKind = MetricKind.H1
    policy: StepPolicy = field(default_factory=StepPolicy)
    tol: float = 1e-9
    max_iter: int = 50000
    seed: int = 0
    init: str = "default_bump"  # "default_bump", "random" or "file"
    init_path: str | None = None

    def __post_init__(self):
        if self.scheme is MetricKind.L2:
            raise ValueError("L2 is not a scheme")
        if self.tol <= 0.0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.init not in ("default_bump", "random", "file"):
            raise ValueError("init must be 'default_bump', 'random' or 'file'")
        if self.init == "file" and not self.init_path:
            raise ValueError("init 'file' requires init_path")


@dataclass(frozen=True)
class IterationRecord:
    """One row of the iteration trace."""

    n: int
    energy: float
    residual: float
    gamma: float
    alpha: float
    decrease: float
    sufficient_decrease: bool = True
    delta: float | None = None  # H1 distance to a reference, when tracked


@dataclass(frozen=True, eq=False)
class ConvergenceReport:
    """Full outcome of a run."""

    records: list[IterationRecord]
    final: GridFunction
    status: str  # "converged", "max_iter" or "stepsize_floor"
    config: RunConfig
    rate: object | None = None  # spectral.RateFit
    max_norm_drift: float = 0.0

    @property
    def final_record(self) -> IterationRecord:
        return self.records[-1]


def initial_guess(problem: Problem, init: str, seed: int = 0) -> GridFunction:
    """Unit-norm starting function.

    "default_bump" is the normalized product of half-period sines (strictly
    positive, and for beta=0, V=0 the exact continuum ground-state shape);
    "random" draws uniform(-1, 1) values from a seeded generator.
    """
    grid = problem.grid
    if init == "default_bump":
        values = np.ones(grid.n)
        for axis, x in enumerate(grid.meshgrid()):
            a, b = grid.bounds[axis]
            values = values * np.sin(math.pi * (x - a) / (b - a))
        u = GridFunction(grid, values.ravel())
    elif init == "random":
        rng = np.random.default_rng(seed)
        u = GridFunction(grid, rng.uniform(-1.0, 1.0, grid.dof))
    else:
        raise ValueError(f"unknown init mode {init!r}")
    return retract(u)


def load_function(problem: Problem, path: str) -> GridFunction:
    """Read node values (lexicographic order, one per line) and normalize."""
    values = np.loadtxt(path, delimiter=",").ravel()
    return retract(GridFunction(problem.grid, values))


def sign_normalize(u: GridFunction) -> GridFunction:
    """Fix the sign ambiguity of an eigenfunction: make the mean non-negative."""
    total = u.grid.cell_volume * float(np.sum(u.values))
    if total < 0.0:
        return GridFunction(u.grid, -u.values)
    return u


def step(
    scheme: SchemeKind, problem: Problem, u: GridFunction, alpha: float
) -> GridFunction:
    """One projected gradient step: retract(u - alpha * riemannian gradient)."""
    if alpha < 0.0:
        raise ValueError("alpha must be non-negative")
    state = scheme_state(scheme, problem, u)
    return retract(
        GridFunction(u.grid, u.values - alpha * state.riemannian_gradient.values)
    )


class StepsizeFloorReached(RuntimeError):
    """Sufficient decrease unreachable above the stepsize floor."""

    def __init__(self, alpha: float, decrease: float):
        super().__init__(
            f"sufficient decrease not met down to alpha={alpha:.3e} (decrease {decrease:.3e})"
        )
        self.alpha = alpha
        self.decrease = decrease


def backtrack(
    scheme: SchemeKind,
    problem: Problem,
    u: GridFunction,
    policy: StepPolicy,
) -> tuple[float, GridFunction]:
    """Largest alpha in {alpha0 * shrink^k} meeting sufficient decrease.

    Fixed mode returns alpha0 unconditionally.  Raises StepsizeFloorReached
    when no candidate above the floor satisfies the decrease inequality.
    """
    state = scheme_state(scheme, problem, u)
    if state.residual == 0.0:
        raise ValueError("residual is zero; caller should have stopped")
    alpha, u_next, decrease, ok = _search(problem, u, state, policy)
    if not ok and policy.mode == "backtracking":
        raise StepsizeFloorReached(alpha, decrease)
    return alpha, u_next


def _search(problem, u, state, policy):
    """Shared candidate loop; returns (alpha, u_next, decrease, accepted)."""
    g = state.riemannian_gradient
    res_sq = state.residual**2
    alpha = policy.alpha0
    while True:
        decrease, u_next = step_decrease(problem, u, g, alpha)
        accepted = decrease >= 0.5 * alpha * res_sq
        if accepted or policy.mode == "fixed":
            return alpha, u_next, decrease, accepted
        alpha *= policy.shrink
        if alpha < policy.alpha_floor:
            return alpha, u_next, decrease, False


def run(
    problem: Problem,
    cfg: RunConfig,
    reference: GridFunction | None = None,
) -> ConvergenceReport:
    """Iterate the scheme until the residual tolerance, max_iter or the floor.

    Every iteration is recorded; the logged energy trace follows the exact
    difference-form decreases, so monotonicity of the trace reflects the
    accepted line-search decreases rather than rounding of O(1) energies.
    When ``reference`` is given, each record carries the H1 distance to it.
    """
    from . import spectral  # local import to avoid a cycle

    if cfg.init == "file":
        u = load_function(problem, cfg.init_path)
    else:
        u = initial_guess(problem, cfg.init, cfg.seed)

    fixed_op = None
    if cfg.scheme in (MetricKind.H1, MetricKind.A0):
        fixed_op = LinearOperator(metric_for(cfg.scheme), problem)

    records: list[IterationRecord] = []
    status = "max_iter"
    max_drift = 0.0
    current_energy = energy(problem, u)

    for n in range(cfg.max_iter + 1):
        max_drift = max(max_drift, abs(norm_l2(u) - 1.0))
        op = fixed_op
        if cfg.scheme is MetricKind.AU:
            op = LinearOperator(metric_for(cfg.scheme, u), problem)
        state = scheme_state(cfg.scheme, problem, u, op=op)
        delta = _h1_distance(u, reference) if reference is not None else None

        if state.residual <= cfg.tol:
            records.append(
                IterationRecord(n, current_energy, state.residual, state.gamma, 0.0, 0.0, True, delta)
            )
            status = "converged"
            break
        if n == cfg.max_iter:
            records.append(
                IterationRecord(n, current_energy, state.residual, state.gamma, 0.0, 0.0, True, delta)
            )
            status = "max_iter"
            break

        alpha, u_next, decrease, accepted = _search(problem, u, state, cfg.policy)
        records.append(
            IterationRecord(
                n, current_energy, state.residual, state.gamma, alpha, decrease, accepted, delta
            )
        )
        if not accepted and cfg.policy.mode == "backtracking":
            status = "stepsize_floor"
            break
        current_energy -= decrease
        u = u_next

    u = sign_normalize(u)
    rate = _fit_tail_rate(records, spectral)
    return ConvergenceReport(
        records=records,
        final=u,
        status=status,
        config=cfg,
        rate=rate,
        max_norm_drift=max_drift,
    )


def _h1_distance(u: GridFunction, ref: GridFunction) -> float:
    from .grid import H1 as H1_METRIC, norm as grid_norm

    return grid_norm(H1_METRIC, None, GridFunction(u.grid, u.values - ref.values))


def _fit_tail_rate(records, spectral):
    """Geometric fit of the residual tail (latter half of the trace)."""
    residuals = [r.residual for r in records if r.residual > 0.0]
    if len(residuals) < 10:
        return None
    tail = residuals[len(residuals) // 2 :]
    try:
        return spectral.fit_rate(tail, threshold=math.inf)
    except ValueError:
        return None
