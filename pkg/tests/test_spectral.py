import math

import pytest
import scipy.linalg

from gpflow.flows import RunConfig, run
from gpflow.greens import LinearOperator, laplacian_matrix
from gpflow.grid import GridFunction, H1, MetricKind, build_grid, norm_l2
from gpflow.problem import Problem, harmonic_potential, zero_potential
from gpflow.spectral import (
    EigengapDegenerateError,
    SpectralReport,
    _inverse_power,
    estimate_poincare,
    fit_rate,
    laplacian_min_eigenvalue,
    linearized_operator,
    lowest_two_eigen,
)


def linear_problem(n, dim=1):
    grid = build_grid(dim, [n] * dim, [(0.0, 1.0)] * dim)
    return Problem(grid, zero_potential(grid), 0.0)


def test_lowest_two_eigen_closed_form_1d():
    # n=3, h=1/4: lambda_k = 32 (1 - cos(k pi/4))
    prob = linear_problem(3)
    op = LinearOperator(H1, prob)
    report = lowest_two_eigen(op)
    assert report.lambda0 == pytest.approx(32.0 * (1.0 - math.cos(math.pi / 4)))
    assert report.lambda1 == pytest.approx(32.0)
    assert norm_l2(report.v0) == pytest.approx(1.0)


def test_laplacian_min_eigenvalue_matches_dense():
    for dim, n in ((1, 9), (2, 5)):
        prob = linear_problem(n, dim)
        dense = laplacian_matrix(prob.grid).toarray()
        lam_min = scipy.linalg.eigvalsh(dense)[0]
        assert laplacian_min_eigenvalue(prob.grid) == pytest.approx(lam_min, rel=1e-12)


def test_estimate_poincare_hand_oracle():
    prob = linear_problem(3)
    lam0 = 32.0 * (1.0 - math.cos(math.pi / 4))
    assert estimate_poincare(prob.grid) == pytest.approx(1.0 / math.sqrt(lam0))


def test_inverse_power_matches_dense():
    grid = build_grid(1, [63], [(0.0, 1.0)])
    prob = Problem(grid, harmonic_potential(grid, 30.0), 0.0)
    op = LinearOperator(H1, prob)
    dense = op.matrix().toarray()
    vals = scipy.linalg.eigvalsh(dense)
    lam0, v0 = _inverse_power(op, tol=1e-10)
    assert lam0 == pytest.approx(vals[0], rel=1e-9)
    lam1, _ = _inverse_power(op, tol=1e-10, deflate=v0)
    assert lam1 == pytest.approx(vals[1], rel=1e-9)


def test_degenerate_gap_raises():
    class IdentityOp:
        def __init__(self, grid):
            self.grid = grid

        def matrix(self):
            import scipy.sparse as sp

            return sp.identity(self.grid.dof, format="csr")

    grid = build_grid(1, [4], [(0.0, 1.0)])
    with pytest.raises(EigengapDegenerateError):
        lowest_two_eigen(IdentityOp(grid))


def test_gap_factor_capped_at_one():
    grid = build_grid(1, [3], [(0.0, 1.0)])
    v0 = GridFunction(grid, [1.0, 1.0, 1.0])
    assert SpectralReport(1.0, 100.0, v0).gap_factor == 1.0
    assert SpectralReport(10.0, 14.0, v0).gap_factor == pytest.approx(0.1)


def test_linearized_operator_at_ground_state():
    grid = build_grid(1, [63], [(0.0, 1.0)])
    prob = Problem(grid, zero_potential(grid), 50.0)
    report = run(prob, RunConfig(scheme=MetricKind.H1))
    op = linearized_operator(prob, report.final)
    spec = lowest_two_eigen(op)
    # the converged multiplier is the smallest eigenvalue of the linearization
    assert spec.lambda0 == pytest.approx(report.final_record.gamma, rel=1e-8)
    assert spec.lambda1 > spec.lambda0


def test_fit_rate_exact_geometric():
    deltas = [0.5**k for k in range(12)]
    fit = fit_rate(deltas, threshold=math.inf)
    assert fit.rho == pytest.approx(0.5, rel=1e-12)
    assert fit.r_squared == pytest.approx(1.0)


def test_fit_rate_threshold_window():
    deltas = [100.0, 50.0] + [0.1 * 0.8**k for k in range(10)]
    fit = fit_rate(deltas, threshold=1.0)
    assert fit.window[0] == 2
    assert fit.rho == pytest.approx(0.8, rel=1e-10)


def test_fit_rate_needs_enough_points():
    with pytest.raises(ValueError):
        fit_rate([0.5, 0.25, 0.125], threshold=math.inf)


def test_fit_rate_constant_sequence():
    fit = fit_rate([1.0] * 8, threshold=math.inf)
    assert fit.rho == pytest.approx(1.0)
    assert fit.r_squared == 1.0
