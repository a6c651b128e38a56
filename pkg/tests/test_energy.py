import math

import numpy as np
import pytest

from gpflow.energy import (
    energy,
    energy_decrease,
    gamma,
    metric_for,
    metric_gradient,
    project_tangent,
    retract,
    riemannian_gradient,
    scheme_state,
    step_decrease,
)
from gpflow.grid import (
    GridFunction,
    H1,
    MetricKind,
    build_grid,
    inner,
    inner_l2,
    norm_l2,
)
from gpflow.problem import Problem, harmonic_potential, zero_potential


def linear_problem(n=31):
    grid = build_grid(1, [n], [(0.0, 1.0)])
    return Problem(grid, zero_potential(grid), 0.0)


def nonlinear_problem(n=31, beta=10.0, omega=10.0):
    grid = build_grid(1, [n], [(0.0, 1.0)])
    return Problem(grid, harmonic_potential(grid, omega), beta)


def sine_mode(problem):
    """Exact discrete ground eigenfunction of the 1D Dirichlet Laplacian."""
    grid = problem.grid
    x = grid.axis_coords(0)
    a, b = grid.bounds[0]
    return retract(GridFunction(grid, np.sin(math.pi * (x - a) / (b - a))))


def test_energy_hand_oracle():
    # n=3, h=1/4, beta=4, V=0, u=(1,1,1): kinetic 4, quartic 0.75
    grid = build_grid(1, [3], [(0.0, 1.0)])
    prob = Problem(grid, zero_potential(grid), 4.0)
    u = GridFunction(grid, [1.0, 1.0, 1.0])
    assert energy(prob, u) == pytest.approx(4.75)


def test_energy_decrease_matches_difference():
    rng = np.random.default_rng(0)
    prob = nonlinear_problem(beta=50.0)
    u = GridFunction(prob.grid, rng.standard_normal(prob.grid.dof))
    v = GridFunction(prob.grid, rng.standard_normal(prob.grid.dof))
    direct = energy(prob, u) - energy(prob, v)
    assert energy_decrease(prob, u, v) == pytest.approx(direct, rel=1e-10)


def test_retract_hand_oracle():
    grid = build_grid(1, [3], [(0.0, 1.0)])
    u = retract(GridFunction(grid, [1.0, 1.0, 1.0]))
    np.testing.assert_allclose(u.values, [2.0 / math.sqrt(3)] * 3)
    assert norm_l2(u) == pytest.approx(1.0)


def test_retract_rejects_zero():
    grid = build_grid(1, [3], [(0.0, 1.0)])
    with pytest.raises(ValueError):
        retract(GridFunction(grid, [0.0, 0.0, 0.0]))


def test_gamma_at_exact_eigenfunction():
    prob = linear_problem(n=31)
    h = prob.grid.h[0]
    lam0 = (2.0 / h**2) * (1.0 - math.cos(math.pi * h))
    u = sine_mode(prob)
    for kind in (MetricKind.H1, MetricKind.A0, MetricKind.AU):
        state = scheme_state(kind, prob, u)
        assert state.gamma == pytest.approx(lam0, rel=1e-10)
        assert state.residual < 1e-9


def test_riemannian_gradient_tangent():
    rng = np.random.default_rng(1)
    prob = nonlinear_problem(beta=25.0)
    u = retract(GridFunction(prob.grid, rng.standard_normal(prob.grid.dof)))
    for kind in (MetricKind.H1, MetricKind.A0, MetricKind.AU):
        r = riemannian_gradient(kind, prob, u)
        assert abs(inner_l2(r, u)) < 1e-10


def test_project_tangent_orthogonality_and_idempotence():
    rng = np.random.default_rng(2)
    prob = nonlinear_problem()
    u = retract(GridFunction(prob.grid, rng.standard_normal(prob.grid.dof)))
    xi = GridFunction(prob.grid, rng.standard_normal(prob.grid.dof))
    for kind in (MetricKind.H1, MetricKind.A0, MetricKind.AU):
        metric = metric_for(kind, u)
        p = project_tangent(metric, prob, u, xi)
        assert abs(inner_l2(p, u)) < 1e-10
        p2 = project_tangent(metric, prob, u, p)
        np.testing.assert_allclose(p2.values, p.values, atol=1e-10)


def test_gradient_matches_finite_difference():
    rng = np.random.default_rng(3)
    prob = nonlinear_problem(beta=5.0)
    u = retract(GridFunction(prob.grid, rng.standard_normal(prob.grid.dof)))
    hdir = GridFunction(prob.grid, rng.standard_normal(prob.grid.dof))
    t = 1e-6
    up = GridFunction(prob.grid, u.values + t * hdir.values)
    dn = GridFunction(prob.grid, u.values - t * hdir.values)
    fd = energy_decrease(prob, up, dn) / (2.0 * t)
    for kind in (MetricKind.H1, MetricKind.A0, MetricKind.AU):
        grad = metric_gradient(kind, prob, u)
        ip = inner(metric_for(kind, u), prob, grad, hdir)
        assert ip == pytest.approx(fd, rel=1e-6)


def test_step_decrease_matches_energy_difference():
    rng = np.random.default_rng(4)
    prob = nonlinear_problem(beta=20.0)
    u = retract(GridFunction(prob.grid, rng.standard_normal(prob.grid.dof)))
    g = riemannian_gradient(MetricKind.H1, prob, u)
    decrease, u_next = step_decrease(prob, u, g, 0.3)
    assert norm_l2(u_next) == pytest.approx(1.0, abs=1e-14)
    direct = energy(prob, u) - energy(prob, u_next)
    assert decrease == pytest.approx(direct, rel=1e-8)


def test_scheme_state_requires_unit_norm():
    prob = nonlinear_problem()
    u = GridFunction(prob.grid, np.ones(prob.grid.dof))
    with pytest.raises(ValueError):
        scheme_state(MetricKind.H1, prob, u)


def test_metric_for_rejects_l2_and_missing_base():
    with pytest.raises(ValueError):
        metric_for(MetricKind.L2)
    with pytest.raises(ValueError):
        metric_for(MetricKind.AU)


def test_gamma_function_matches_scheme_state():
    rng = np.random.default_rng(5)
    prob = nonlinear_problem(beta=30.0)
    u = retract(GridFunction(prob.grid, rng.standard_normal(prob.grid.dof)))
    for kind in (MetricKind.H1, MetricKind.A0, MetricKind.AU):
        assert gamma(kind, prob, u) == scheme_state(kind, prob, u).gamma
