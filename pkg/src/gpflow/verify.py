"""Named, reportable checks for every numerical invariant of the solver.

Each check packages one lemma/theorem-derived property as a pass/fail result
with the smallest observed slack as its margin.  Inequality checks carry an
additive 1e-9 tolerance on the slack to absorb inner-solver residue (inner
solves run at 1e-12).  Every check owns a generator seeded from (seed, check
name), so identical inputs yield identical results.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, replace

import numpy as np

from . import spectral as spectral_mod
from .energy import (
    energy,
    energy_decrease,
    metric_for,
    metric_gradient,
    project_tangent,
    retract,
    scheme_state,
)
from .flows import ConvergenceReport, RunConfig, run, sign_normalize
from .greens import solve_green
from .grid import (
    A0,
    H1,
    GridFunction,
    L2,
    Metric,
    MetricKind,
    apply_neg_laplacian,
    inner,
    inner_l2,
    norm,
    norm_l2,
)
from .problem import Problem
from .spectral import SpectralReport, estimate_poincare, fit_rate

SLACK_TOL = 1e-9
SCHEMES = (MetricKind.H1, MetricKind.A0, MetricKind.AU)


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one named check."""

    name: str
    passed: bool
    margin: float
    trials: int
    detail: str
    skipped: bool = False


def _skip(name: str, detail: str) -> CheckResult:
    return CheckResult(name, passed=False, margin=math.nan, trials=0, detail=detail, skipped=True)


def _result(name: str, margin: float, trials: int, detail: str) -> CheckResult:
    return CheckResult(name, passed=margin >= 0.0, margin=margin, trials=trials, detail=detail)


def _rng_for(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, zlib.crc32(name.encode())]))


def smoothed_noise(problem: Problem, rng: np.random.Generator) -> GridFunction:
    """Unit-L2 probe: one Jacobi sweep of the Laplacian applied to noise.

    The sweep damps the highest frequencies so H1 norms stay moderate.
    """
    grid = problem.grid
    x = rng.uniform(-1.0, 1.0, grid.dof)
    diag = sum(2.0 / h**2 for h in grid.h)
    lx = apply_neg_laplacian(grid, GridFunction(grid, x)).values
    x = x - lx / diag
    return retract(GridFunction(grid, x))


def _tangent_probe(problem: Problem, u: GridFunction, rng) -> GridFunction:
    """Unit-H1 probe L2-orthogonal to u."""
    z = smoothed_noise(problem, rng)
    t = z.values - inner_l2(z, u) * u.values / inner_l2(u, u)
    tf = GridFunction(problem.grid, t)
    return GridFunction(problem.grid, t / norm(H1, None, tf))


class CheckContext:
    """Shared inputs for the suite; report and spectral may be absent."""

    def __init__(self, problem, report, spectral, trials, seed, sweep=None):
        self.problem = problem
        self.report: ConvergenceReport | None = report
        self.spectral: SpectralReport | None = spectral
        self.trials = trials
        self.seed = seed
        self.sweep = sweep  # list of (alpha, rho) from a fixed-step sweep

    def ustar(self) -> GridFunction | None:
        if self.report is None or self.report.status != "converged":
            return None
        return self.report.final

    def au_base(self, rng) -> GridFunction:
        ustar = self.ustar()
        return ustar if ustar is not None else smoothed_noise(self.problem, rng)


# --- grid invariants ---------------------------------------------------------


def check_inner_symmetry(ctx: CheckContext) -> CheckResult:
    name = "grid:inner_symmetry"
    if ctx.trials == 0:
        return _skip(name, "no trials requested")
    rng = _rng_for(ctx.seed, name)
    worst = 0.0
    for _ in range(ctx.trials):
        u = smoothed_noise(ctx.problem, rng)
        v = smoothed_noise(ctx.problem, rng)
        for metric in (L2, H1, A0, Metric(MetricKind.AU, base=ctx.au_base(rng))):
            worst = max(worst, abs(inner(metric, ctx.problem, u, v) - inner(metric, ctx.problem, v, u)))
    return _result(name, -worst, ctx.trials, f"max symmetry defect {worst:.3e} (must be exactly 0)")


def check_positive_definite(ctx: CheckContext) -> CheckResult:
    name = "grid:positive_definite"
    if ctx.trials == 0:
        return _skip(name, "no trials requested")
    rng = _rng_for(ctx.seed, name)
    worst = math.inf
    for _ in range(ctx.trials):
        u = smoothed_noise(ctx.problem, rng)
        for metric in (L2, H1, A0, Metric(MetricKind.AU, base=ctx.au_base(rng))):
            worst = min(worst, inner(metric, ctx.problem, u, u))
    return _result(name, worst, ctx.trials, f"min quadratic form value {worst:.3e}")


def check_summation_by_parts(ctx: CheckContext) -> CheckResult:
    name = "grid:summation_by_parts"
    if ctx.trials == 0:
        return _skip(name, "no trials requested")
    rng = _rng_for(ctx.seed, name)
    margin = math.inf
    for _ in range(ctx.trials):
        u = smoothed_noise(ctx.problem, rng)
        v = smoothed_noise(ctx.problem, rng)
        edge = inner(H1, ctx.problem, u, v)
        lap = inner_l2(apply_neg_laplacian(ctx.problem.grid, u), v)
        margin = min(margin, 1e-12 * (1.0 + abs(edge)) - abs(edge - lap))
    return _result(name, margin, ctx.trials, "edge form vs Laplacian pairing")


def check_equiv_a0_h1(ctx: CheckContext) -> CheckResult:
    name = "lemma:equiv_a0_H1"
    if ctx.trials == 0:
        return _skip(name, "no trials requested")
    rng = _rng_for(ctx.seed, name)
    c3 = estimate_poincare(ctx.problem.grid)
    upper = math.sqrt(1.0 + c3**2 * ctx.problem.v_max)
    margin = math.inf
    for _ in range(ctx.trials):
        u = smoothed_noise(ctx.problem, rng)
        nh1 = norm(H1, ctx.problem, u)
        na0 = norm(A0, ctx.problem, u)
        margin = min(margin, na0 - nh1 + SLACK_TOL, upper * nh1 - na0 + SLACK_TOL)
    return _result(name, margin, ctx.trials, f"equivalence constant {upper:.6f}")


def check_equiv_au_h1(ctx: CheckContext) -> CheckResult:
    name = "lemma:equiv_au_H1"
    ustar = ctx.ustar()
    if ustar is None:
        return _skip(name, "no converged ground state available")
    if ctx.trials == 0:
        return _skip(name, "no trials requested")
    rng = _rng_for(ctx.seed, name)
    metric = Metric(MetricKind.AU, base=ustar)
    margin = math.inf
    for _ in range(ctx.trials):
        u = smoothed_noise(ctx.problem, rng)
        margin = min(margin, norm(metric, ctx.problem, u) - norm(H1, ctx.problem, u) + SLACK_TOL)
    return _result(name, margin, ctx.trials, "a_u norm at the ground state dominates H1")


def check_stab_au(ctx: CheckContext) -> CheckResult:
    name = "lemma:stab_au"
    ustar = ctx.ustar()
    if ustar is None:
        return _skip(name, "no converged ground state available")
    if ctx.trials == 0:
        return _skip(name, "no trials requested")
    rng = _rng_for(ctx.seed, name)
    probes = [smoothed_noise(ctx.problem, rng) for _ in range(max(3, ctx.trials // 2))]
    ref = Metric(MetricKind.AU, base=ustar)
    direction = smoothed_noise(ctx.problem, rng)
    devs = []
    for eps in (1e-2, 1e-3, 1e-4, 1e-5):
        u = retract(GridFunction(ctx.problem.grid, ustar.values + eps * direction.values))
        metric = Metric(MetricKind.AU, base=u)
        dev = max(
            abs(norm(metric, ctx.problem, z) / norm(ref, ctx.problem, z) - 1.0) for z in probes
        )
        devs.append(dev)
    margin = min(devs[k] - devs[k + 1] + SLACK_TOL for k in range(len(devs) - 1))
    detail = "deviations along shrinking perturbations: " + ", ".join(f"{d:.3e}" for d in devs)
    return _result(name, margin, len(probes), detail)


# --- Green's operator invariants --------------------------------------------


def check_adjoint_identity(ctx: CheckContext) -> CheckResult:
    name = "greens:adjoint_identity"
    if ctx.trials == 0:
        return _skip(name, "no trials requested")
    rng = _rng_for(ctx.seed, name)
    margin = math.inf
    for _ in range(ctx.trials):
        z = smoothed_noise(ctx.problem, rng)
        w = smoothed_noise(ctx.problem, rng)
        for metric in (H1, A0, Metric(MetricKind.AU, base=ctx.au_base(rng))):
            g = solve_green(metric, ctx.problem, w)
            lhs = inner(metric, ctx.problem, z, g)
            rhs = inner_l2(z, w)
            margin = min(margin, SLACK_TOL * (1.0 + abs(rhs)) - abs(lhs - rhs))
    return _result(name, margin, ctx.trials, "(z, G w)_X vs (z, w)_L2")


def check_gu_bound(ctx: CheckContext) -> CheckResult:
    name = "lemma:Gu"
    if ctx.trials == 0:
        return _skip(name, "no trials requested")
    rng = _rng_for(ctx.seed, name)
    c3 = estimate_poincare(ctx.problem.grid)
    margin = math.inf
    for _ in range(ctx.trials):
        u = smoothed_noise(ctx.problem, rng)
        g = solve_green(H1, ctx.problem, u)
        margin = min(margin, c3 * norm_l2(u) - norm(H1, ctx.problem, g) + SLACK_TOL)
    return _result(name, margin, ctx.trials, f"Poincare constant {c3:.6f}")


def check_green_self_adjoint(ctx: CheckContext) -> CheckResult:
    name = "greens:self_adjoint"
    if ctx.trials == 0:
        return _skip(name, "no trials requested")
    rng = _rng_for(ctx.seed, name)
    margin = math.inf
    for _ in range(ctx.trials):
        z = smoothed_noise(ctx.problem, rng)
        w = smoothed_noise(ctx.problem, rng)
        for metric in (H1, A0, Metric(MetricKind.AU, base=ctx.au_base(rng))):
            a = inner_l2(z, solve_green(metric, ctx.problem, w))
            b = inner_l2(w, solve_green(metric, ctx.problem, z))
            margin = min(margin, SLACK_TOL * (1.0 + abs(a)) - abs(a - b))
    return _result(name, margin, ctx.trials, "(z, G w)_L2 vs (w, G z)_L2")


def check_gau_lipschitz(ctx: CheckContext) -> CheckResult:
    name = "lemma:Gau"
    ustar = ctx.ustar()
    if ustar is None:
        return _skip(name, "no converged ground state available")
    if ctx.trials == 0:
        return _skip(name, "no trials requested")
    rng = _rng_for(ctx.seed, name)
    ref = Metric(MetricKind.AU, base=ustar)
    gstar = solve_green(ref, ctx.problem, ustar)
    direction = smoothed_noise(ctx.problem, rng)
    ratios = []
    for eps in (1e-2, 1e-3, 1e-4, 1e-5):
        u = retract(GridFunction(ctx.problem.grid, ustar.values + eps * direction.values))
        g = solve_green(Metric(MetricKind.AU, base=u), ctx.problem, u)
        diff_g = GridFunction(ctx.problem.grid, g.values - gstar.values)
        diff_u = GridFunction(ctx.problem.grid, u.values - ustar.values)
        ratios.append(norm(ref, ctx.problem, diff_g) / norm(ref, ctx.problem, diff_u))
    # bounded ratio: no blow-up as the perturbation shrinks
    bound = 4.0 * ratios[0] + 1.0
    margin = bound - max(ratios)
    detail = "Lipschitz ratios: " + ", ".join(f"{r:.4f}" for r in ratios)
    return _result(name, margin, len(ratios), detail)


# --- energy invariants -------------------------------------------------------


def check_gradient_consistency(ctx: CheckContext) -> CheckResult:
    name = "energy:gradient_consistency"
    if ctx.trials == 0:
        return _skip(name, "no trials requested")
    rng = _rng_for(ctx.seed, name)
    t = 1e-5
    margin = math.inf
    worst = 0.0
    for _ in range(ctx.trials):
        u = retract(smoothed_noise(ctx.problem, rng))
        h = _tangent_probe(ctx.problem, u, rng)
        for kind in SCHEMES:
            grad = metric_gradient(kind, ctx.problem, u)
            ip = inner(metric_for(kind, u), ctx.problem, grad, h)
            up = GridFunction(ctx.problem.grid, u.values + t * h.values)
            dn = GridFunction(ctx.problem.grid, u.values - t * h.values)
            # the difference form avoids the rounding floor of the two O(1)
            # energies, which would drown the derivative at this t
            fd = energy_decrease(ctx.problem, up, dn) / (2.0 * t)
            rel = abs(ip - fd) / max(abs(fd), abs(ip), 1e-30)
            worst = max(worst, rel)
            margin = min(margin, 1e-6 - rel)
    return _result(name, margin, ctx.trials, f"max relative FD mismatch {worst:.3e}")


def check_pythagorean_split(ctx: CheckContext) -> CheckResult:
    name = "energy:pythagorean_split"
    if ctx.trials == 0:
        return _skip(name, "no trials requested")
    rng = _rng_for(ctx.seed, name)
    margin = math.inf
    for _ in range(ctx.trials):
        u = retract(smoothed_noise(ctx.problem, rng))
        for kind in SCHEMES:
            metric = metric_for(kind, u)
            state = scheme_state(kind, ctx.problem, u)
            grad = metric_gradient(kind, ctx.problem, u)
            full = inner(metric, ctx.problem, grad, grad)
            proj = inner(metric, ctx.problem, state.riemannian_gradient, state.riemannian_gradient)
            tail = state.gamma**2 * inner(metric, ctx.problem, state.green_u, state.green_u)
            rel = abs(full - (proj + tail)) / max(abs(full), 1e-30)
            margin = min(margin, 1e-8 - rel)
    return _result(name, margin, ctx.trials, "||grad||^2 = ||proj||^2 + gamma^2 ||G u||^2")


def check_projected_norm_inequality(ctx: CheckContext) -> CheckResult:
    name = "lemma:esti_gradEu"
    if ctx.trials == 0:
        return _skip(name, "no trials requested")
    rng = _rng_for(ctx.seed, name)
    margin = math.inf
    for _ in range(ctx.trials):
        u = retract(smoothed_noise(ctx.problem, rng))
        for kind in SCHEMES:
            metric = metric_for(kind, u)
            state = scheme_state(kind, ctx.problem, u)
            grad = metric_gradient(kind, ctx.problem, u)
            margin = min(
                margin,
                norm(metric, ctx.problem, grad)
                - norm(metric, ctx.problem, state.riemannian_gradient)
                + SLACK_TOL,
            )
    return _result(name, margin, ctx.trials, "projected gradient never exceeds the full gradient")


def check_projection_tangency(ctx: CheckContext) -> CheckResult:
    name = "energy:projection_tangency"
    if ctx.trials == 0:
        return _skip(name, "no trials requested")
    rng = _rng_for(ctx.seed, name)
    margin = math.inf
    for _ in range(ctx.trials):
        u = retract(smoothed_noise(ctx.problem, rng))
        xi = smoothed_noise(ctx.problem, rng)
        for metric in (H1, A0, Metric(MetricKind.AU, base=u)):
            r = project_tangent(metric, ctx.problem, u, xi)
            margin = min(margin, 1e-10 - abs(inner_l2(r, u)))
    return _result(name, margin, ctx.trials, "projected vector is L2-orthogonal to the base")


def check_retraction_bound(ctx: CheckContext) -> CheckResult:
    name = "lemma:esti_retraction"
    if ctx.trials == 0:
        return _skip(name, "no trials requested")
    rng = _rng_for(ctx.seed, name)
    margin = math.inf
    for _ in range(ctx.trials):
        u = retract(smoothed_noise(ctx.problem, rng))
        t = _tangent_probe(ctx.problem, u, rng)
        for scale in (1e-3, 1e-2, 1e-1, 0.5):
            xi = GridFunction(ctx.problem.grid, scale * t.values)
            upxi = GridFunction(ctx.problem.grid, u.values + xi.values)
            drift = GridFunction(ctx.problem.grid, retract(upxi).values - upxi.values)
            bound = 0.5 * norm_l2(xi) ** 2 * norm(H1, ctx.problem, upxi)
            margin = min(margin, bound - norm(H1, ctx.problem, drift) + SLACK_TOL)
    return _result(name, margin, ctx.trials, "retraction drift within the quadratic bound")


def check_linear_error_expansion(ctx: CheckContext) -> CheckResult:
    name = "lemma:linear_error"
    if ctx.trials == 0:
        return _skip(name, "no trials requested")
    rng = _rng_for(ctx.seed, name)
    problem = ctx.problem
    w = problem.grid.cell_volume
    beta = problem.beta
    margin = math.inf
    for _ in range(ctx.trials):
        u = retract(smoothed_noise(problem, rng))
        v0 = smoothed_noise(problem, rng)
        v = GridFunction(problem.grid, 0.5 * v0.values)
        grad = metric_gradient(MetricKind.H1, problem, u)
        upv = GridFunction(problem.grid, u.values + v.values)
        lhs = energy(problem, upv) - energy(problem, u) - inner(H1, problem, grad, v)
        rhs = (
            0.5 * inner(H1, problem, v, v)
            + 0.5 * w * float(np.sum(problem.V.values * v.values**2))
            + w
            * float(
                np.sum(
                    1.5 * beta * u.values**2 * v.values**2
                    + beta * u.values * v.values**3
                    + 0.25 * beta * v.values**4
                )
            )
        )
        rel = abs(lhs - rhs) / max(abs(lhs), 1e-30)
        margin = min(margin, 1e-9 - rel)
    return _result(name, margin, ctx.trials, "second-order remainder matches the exact expansion")


# --- flow (run trace) invariants --------------------------------------------


def check_energy_decay(ctx: CheckContext) -> CheckResult:
    name = "thm:energy_decay"
    if ctx.report is None:
        return _skip(name, "no run report available")
    energies = [r.energy for r in ctx.report.records]
    if len(energies) < 2:
        return _result(name, 0.0, len(energies), "trace too short to decrease")
    margin = min(energies[k] - energies[k + 1] for k in range(len(energies) - 1))
    return _result(name, margin, len(energies), f"min per-step energy decrease {margin:.3e}")


def check_sufficient_decrease(ctx: CheckContext) -> CheckResult:
    name = "flows:sufficient_decrease"
    if ctx.report is None:
        return _skip(name, "no run report available")
    accepted = [r for r in ctx.report.records if r.alpha > 0.0 and r.sufficient_decrease]
    if not accepted:
        return _result(name, 0.0, 0, "no accepted steps in the trace")
    margin = min(r.decrease - 0.5 * r.alpha * r.residual**2 for r in accepted)
    return _result(name, margin, len(accepted), "logged decreases re-verified against the predicate")


def check_iterate_boundedness(ctx: CheckContext) -> CheckResult:
    name = "thm:iterate_boundedness"
    if ctx.report is None:
        return _skip(name, "no run report available")
    e0 = ctx.report.records[0].energy
    bound = math.sqrt(max(2.0 * e0, 0.0))
    margin = min(bound - math.sqrt(max(2.0 * r.energy, 0.0)) for r in ctx.report.records)
    final_norm = norm(H1, ctx.problem, ctx.report.final)
    margin = min(margin, bound - final_norm + SLACK_TOL)
    return _result(
        name,
        margin,
        len(ctx.report.records),
        f"sqrt(2 E0) = {bound:.4f}, final H1 norm {final_norm:.4f}",
    )


def check_manifold_residence(ctx: CheckContext) -> CheckResult:
    name = "flows:manifold_residence"
    if ctx.report is None:
        return _skip(name, "no run report available")
    drift = ctx.report.max_norm_drift
    return _result(name, 1e-12 - drift, len(ctx.report.records), f"max |norm - 1| = {drift:.3e}")


def check_residual_summability(ctx: CheckContext) -> CheckResult:
    name = "thm:residual_summability"
    if ctx.report is None:
        return _skip(name, "no run report available")
    accepted = [r for r in ctx.report.records if r.alpha > 0.0 and r.sufficient_decrease]
    if not accepted:
        return _result(name, 0.0, 0, "no accepted steps in the trace")
    alpha_min = min(r.alpha for r in accepted)
    total = sum(r.residual**2 for r in accepted)
    bound = 2.0 * ctx.report.records[0].energy / alpha_min
    return _result(
        name,
        bound - total,
        len(accepted),
        f"sum residual^2 = {total:.4e} vs 2 E0 / alpha_min = {bound:.4e}",
    )


def check_local_exponential(ctx: CheckContext) -> CheckResult:
    name = "thm:local_exponential"
    ustar = ctx.ustar()
    if ustar is None:
        return _skip(name, "no converged ground state available")
    rng = _rng_for(ctx.seed, name)
    problem = ctx.problem
    scale = norm(H1, problem, ustar)
    direction = _tangent_probe(problem, ustar, rng)
    u0 = retract(GridFunction(problem.grid, ustar.values + 0.05 * scale * direction.values))
    path = _save_start(problem, u0)
    cfg = replace(
        ctx.report.config, init="file", init_path=path, tol=1e-14, max_iter=60
    )
    try:
        rep = run(problem, cfg, reference=ustar)
    finally:
        _cleanup(path)
    deltas = [r.delta for r in rep.records if r.delta is not None and r.delta > 1e-7]
    if len(deltas) < 5:
        return _skip(name, "local trace too short above the accuracy floor")
    fit = fit_rate(deltas, threshold=0.1 * scale)
    margin = 1.0 - fit.rho
    return _result(
        name,
        margin,
        len(deltas),
        f"fitted contraction rho = {fit.rho:.4f} (r^2 = {fit.r_squared:.4f})",
    )


def _save_start(problem, u) -> str:
    import tempfile

    fd = tempfile.NamedTemporaryFile("w", suffix=".csv", delete=False)
    np.savetxt(fd, u.values)
    fd.close()
    return fd.name


def _cleanup(path):
    import os

    try:
        os.unlink(path)
    except OSError:
        pass


# --- spectral invariants -----------------------------------------------------


def check_eigen_residual(ctx: CheckContext) -> CheckResult:
    name = "spectral:eigen_residual"
    if ctx.spectral is None:
        return _skip(name, "no spectral report available")
    ustar = ctx.ustar()
    if ustar is None:
        return _skip(name, "no converged ground state available")
    op = spectral_mod.linearized_operator(ctx.problem, ustar)
    v0 = ctx.spectral.v0
    resid = GridFunction(
        ctx.problem.grid, op.apply(v0.values) - ctx.spectral.lambda0 * v0.values
    )
    margin = 1e-8 * ctx.spectral.lambda0 - norm_l2(resid)
    return _result(name, margin, 1, f"eigen-residual {norm_l2(resid):.3e}")


def check_ground_state_consistency(ctx: CheckContext) -> CheckResult:
    name = "spectral:ground_state_consistency"
    if ctx.spectral is None:
        return _skip(name, "no spectral report available")
    ustar = ctx.ustar()
    if ustar is None:
        return _skip(name, "no converged ground state available")
    v0 = sign_normalize(ctx.spectral.v0)
    us = sign_normalize(ustar)
    dist = norm_l2(GridFunction(ctx.problem.grid, v0.values - us.values))
    return _result(name, 1e-6 - dist, 1, f"L2 distance ground state vs linearized eigvec {dist:.3e}")


def check_gamma_equals_lambda0(ctx: CheckContext) -> CheckResult:
    name = "spectral:gamma_equals_lambda0"
    if ctx.spectral is None:
        return _skip(name, "no spectral report available")
    if ctx.report is None or ctx.report.status != "converged":
        return _skip(name, "no converged run available")
    gamma_final = ctx.report.final_record.gamma
    rel = abs(gamma_final - ctx.spectral.lambda0) / abs(ctx.spectral.lambda0)
    return _result(
        name, 1e-6 - rel, 1, f"gamma {gamma_final:.10f} vs lambda0 {ctx.spectral.lambda0:.10f}"
    )


def check_local_convexity(ctx: CheckContext) -> CheckResult:
    name = "lemma:Elocalconvex"
    if ctx.spectral is None:
        return _skip(name, "no spectral report available")
    ustar = ctx.ustar()
    if ustar is None:
        return _skip(name, "no converged ground state available")
    if ctx.trials == 0:
        return _skip(name, "no trials requested")
    rng = _rng_for(ctx.seed, name)
    gap4 = 0.25 * (ctx.spectral.lambda1 - ctx.spectral.lambda0)
    e_star = energy(ctx.problem, ustar)
    margin = math.inf
    for _ in range(ctx.trials):
        eps = 10.0 ** rng.uniform(-3, -1)
        z = smoothed_noise(ctx.problem, rng)
        u = retract(GridFunction(ctx.problem.grid, ustar.values + eps * z.values))
        dist_sq = norm_l2(GridFunction(ctx.problem.grid, u.values - ustar.values)) ** 2
        if dist_sq > 2.0:
            continue
        slack = energy(ctx.problem, u) - e_star - gap4 * dist_sq
        margin = min(margin, slack + SLACK_TOL)
    return _result(name, margin, ctx.trials, f"quarter-gap {gap4:.4e}")


def check_rate_vs_gap(ctx: CheckContext) -> CheckResult:
    name = "spectral:rate_vs_gap"
    if ctx.spectral is None:
        return _skip(name, "no spectral report available")
    if not ctx.sweep or len(ctx.sweep) < 2:
        return _skip(name, "no stepsize sweep provided")
    sweep = sorted(ctx.sweep)
    gap = ctx.spectral.gap_factor
    ks = []
    for alpha, rho in sweep:
        ks.append((rho - (1.0 - alpha * gap)) / alpha**2)
    k_fit = max(ks)
    margin = min(sweep[0][1] - sweep[1][1], min(1.0 - rho for _, rho in sweep))
    detail = (
        "rho per alpha: "
        + ", ".join(f"{a:g}->{r:.4f}" for a, r in sweep)
        + f"; fitted quadratic coefficient {k_fit:.3f}"
    )
    return _result(name, margin, len(sweep), detail)


ALL_CHECKS = {
    "grid:inner_symmetry": check_inner_symmetry,
    "grid:positive_definite": check_positive_definite,
    "grid:summation_by_parts": check_summation_by_parts,
    "lemma:equiv_a0_H1": check_equiv_a0_h1,
    "lemma:equiv_au_H1": check_equiv_au_h1,
    "lemma:stab_au": check_stab_au,
    "greens:adjoint_identity": check_adjoint_identity,
    "lemma:Gu": check_gu_bound,
    "greens:self_adjoint": check_green_self_adjoint,
    "lemma:Gau": check_gau_lipschitz,
    "energy:gradient_consistency": check_gradient_consistency,
    "energy:pythagorean_split": check_pythagorean_split,
    "lemma:esti_gradEu": check_projected_norm_inequality,
    "energy:projection_tangency": check_projection_tangency,
    "lemma:esti_retraction": check_retraction_bound,
    "lemma:linear_error": check_linear_error_expansion,
    "thm:energy_decay": check_energy_decay,
    "flows:sufficient_decrease": check_sufficient_decrease,
    "thm:iterate_boundedness": check_iterate_boundedness,
    "flows:manifold_residence": check_manifold_residence,
    "thm:residual_summability": check_residual_summability,
    "thm:local_exponential": check_local_exponential,
    "spectral:eigen_residual": check_eigen_residual,
    "spectral:ground_state_consistency": check_ground_state_consistency,
    "spectral:gamma_equals_lambda0": check_gamma_equals_lambda0,
    "lemma:Elocalconvex": check_local_convexity,
    "spectral:rate_vs_gap": check_rate_vs_gap,
}


def check_suite(
    problem: Problem,
    report: ConvergenceReport | None = None,
    spectral: SpectralReport | None = None,
    trials: int = 20,
    seed: int = 0,
    sweep=None,
) -> list[CheckResult]:
    """Run every registered check; unavailable prerequisites yield skips."""
    ctx = CheckContext(problem, report, spectral, trials, seed, sweep)
    return [check(ctx) for check in ALL_CHECKS.values()]


def failures(results: list[CheckResult]) -> list[CheckResult]:
    return [r for r in results if not r.passed and not r.skipped]


def cross_scheme_agreement(problem: Problem, cfg_base: RunConfig) -> CheckResult:
    """Run all three schemes from one config; they must meet at the same state."""
    name = "verify:cross_scheme_agreement"
    finals = {}
    gammas = {}
    for scheme in SCHEMES:
        rep = run(problem, replace(cfg_base, scheme=scheme))
        if rep.status != "converged":
            return _skip(name, f"{scheme.value} run ended with status {rep.status}")
        finals[scheme] = sign_normalize(rep.final)
        gammas[scheme] = rep.final_record.gamma
    margin = math.inf
    details = []
    pairs = [(SCHEMES[i], SCHEMES[j]) for i in range(3) for j in range(i + 1, 3)]
    for a, b in pairs:
        dist = norm_l2(GridFunction(problem.grid, finals[a].values - finals[b].values))
        dg = abs(gammas[a] - gammas[b])
        margin = min(margin, 1e-6 - dist, 1e-6 - dg)
        details.append(f"{a.value}/{b.value}: dist {dist:.2e}, dgamma {dg:.2e}")
    return _result(name, margin, 3, "; ".join(details))
