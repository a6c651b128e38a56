"""Command-line front end: config parsing, presets, runs, and serialization.

Subcommands: ``run`` (one gradient-flow run), ``verify`` (run plus the full
invariant suite), ``spectrum`` (linearized eigenpair at the computed state),
``sweep`` (fixed-stepsize runs over an alpha list).  Output is JSON or CSV,
rendered deterministically so identical seeds give byte-identical files.

Exit codes: 0 success, 1 usage error, 2 non-convergence, 3 check failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .flows import ConvergenceReport, RunConfig, StepPolicy, run
from .greens import GreenSolveError
from .grid import GridFunction, MetricKind, build_grid
from .problem import Problem, harmonic_potential, well_potential, zero_potential
from .spectral import SpectralReport, linearized_operator, lowest_two_eigen
from .verify import CheckResult, check_suite, failures


class UsageError(ValueError):
    """Bad flags or inconsistent configuration; maps to exit code 1."""


_SCHEMES = {"h1": MetricKind.H1, "a0": MetricKind.A0, "au": MetricKind.AU}

_DEFAULTS = {
    "dim": 1,
    "n": "127",
    "bounds": "0,1",
    "potential": "zero",
    "beta": 0.0,
    "scheme": "h1",
    "tol": 1e-9,
    "max_iter": 50000,
    "seed": 0,
    "init": "default_bump",
    "init_path": None,
    "mode": "backtracking",
    "alpha0": 0.5,
    "shrink": 0.5,
    "alpha_floor": 1e-8,
    "output": None,
    "format": "json",
    "trials": 20,
    "alphas": None,
    "cross_scheme": False,
}


@dataclass(frozen=True)
class CliConfig:
    """Fully resolved invocation: command plus every knob with its default."""

    command: str
    dim: int
    n: tuple[int, ...]
    bounds: tuple[tuple[float, float], ...]
    potential: str
    beta: float
    scheme: str
    tol: float
    max_iter: int
    seed: int
    init: str
    init_path: str | None
    mode: str
    alpha0: float
    shrink: float
    alpha_floor: float
    output: str | None
    format: str
    trials: int
    alphas: tuple[float, ...] | None
    cross_scheme: bool


class _Parser(argparse.ArgumentParser):
    """argparse would sys.exit(2) on bad flags; map them to exit code 1."""

    def error(self, message):
        raise UsageError(message)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="gpflow",
        description="Ground states of the Gross-Pitaevskii equation by projected Sobolev gradient flows.",
    )
    parser.add_argument("--version", action="version", version=f"gpflow {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def add_common(p):
        p.add_argument("--config", help="JSON file with default option values")
        p.add_argument("--dim", type=int, help="spatial dimension (1-3)")
        p.add_argument("--n", help="interior nodes per axis, e.g. 127 or 63,63")
        p.add_argument("--bounds", help="box interval per axis, e.g. 0,1")
        p.add_argument(
            "--potential",
            help="zero | harmonic:<omega> | well:<depth>:<lo>:<hi> | file:<path>",
        )
        p.add_argument("--beta", type=float, help="interaction strength (>= 0)")
        p.add_argument("--scheme", help="h1 | a0 | au")
        p.add_argument("--tol", type=float, help="residual stopping tolerance")
        p.add_argument("--max-iter", dest="max_iter", type=int)
        p.add_argument("--seed", type=int, help="single seed for all randomness")
        p.add_argument("--init", help="default_bump | random | file")
        p.add_argument("--init-path", dest="init_path")
        p.add_argument("--mode", help="backtracking | fixed stepsize policy")
        p.add_argument("--alpha0", type=float, help="initial / fixed stepsize")
        p.add_argument("--shrink", type=float, help="backtracking shrink factor")
        p.add_argument("--alpha-floor", dest="alpha_floor", type=float)
        p.add_argument("--output", "-o", help="output path (default: stdout)")
        p.add_argument("--format", help="json | csv")

    p_run = sub.add_parser("run", help="one gradient-flow run")
    add_common(p_run)
    p_verify = sub.add_parser("verify", help="run a scheme, then the invariant suite")
    add_common(p_verify)
    p_verify.add_argument("--trials", type=int, help="random trials per sampled check")
    p_verify.add_argument(
        "--cross-scheme",
        dest="cross_scheme",
        action="store_const",
        const=True,
        help="also run all three schemes and check they agree",
    )
    p_spectrum = sub.add_parser("spectrum", help="linearized eigenpair at the computed state")
    add_common(p_spectrum)
    p_sweep = sub.add_parser("sweep", help="fixed-stepsize runs over an alpha list")
    add_common(p_sweep)
    p_sweep.add_argument("--alphas", help="comma-separated stepsizes, e.g. 0.05,0.1,0.2")
    return parser


def parse_config(argv: list[str]) -> CliConfig:
    """Resolve flags over optional config-file values over built-in defaults."""
    parser = _build_parser()
    ns = parser.parse_args(argv)
    if ns.command is None:
        raise UsageError("a command is required: run, verify, spectrum or sweep")

    file_values = {}
    if getattr(ns, "config", None):
        try:
            with open(ns.config) as fh:
                file_values = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config file {ns.config}: {exc}")
        unknown = set(file_values) - set(_DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")

    def pick(key):
        value = getattr(ns, key, None)
        if value is not None:
            return value
        if key in file_values:
            return file_values[key]
        return _DEFAULTS[key]

    dim = int(pick("dim"))
    if dim not in (1, 2, 3):
        raise UsageError(f"--dim must be 1, 2 or 3, got {dim}")
    n = _parse_int_list(str(pick("n")), "--n")
    if len(n) == 1:
        n = n * dim
    if len(n) != dim:
        raise UsageError(f"--n gives {len(n)} axes but --dim is {dim}")
    bounds = _parse_bounds(str(pick("bounds")), dim)
    scheme = str(pick("scheme")).lower()
    if scheme not in _SCHEMES:
        raise UsageError(f"--scheme must be one of h1, a0, au, got {scheme!r}")
    fmt = str(pick("format")).lower()
    if fmt not in ("json", "csv"):
        raise UsageError(f"--format must be json or csv, got {fmt!r}")
    mode = str(pick("mode"))
    if mode not in ("backtracking", "fixed"):
        raise UsageError(f"--mode must be backtracking or fixed, got {mode!r}")
    alphas = pick("alphas")
    if isinstance(alphas, str):
        alphas = tuple(_parse_float_list(alphas, "--alphas"))
    elif alphas is not None:
        alphas = tuple(float(a) for a in alphas)
    if ns.command == "sweep" and not alphas:
        raise UsageError("sweep requires --alphas, e.g. --alphas 0.05,0.1,0.2")

    return CliConfig(
        command=ns.command,
        dim=dim,
        n=tuple(n),
        bounds=bounds,
        potential=str(pick("potential")),
        beta=float(pick("beta")),
        scheme=scheme,
        tol=float(pick("tol")),
        max_iter=int(pick("max_iter")),
        seed=int(pick("seed")),
        init=str(pick("init")),
        init_path=pick("init_path"),
        mode=mode,
        alpha0=float(pick("alpha0")),
        shrink=float(pick("shrink")),
        alpha_floor=float(pick("alpha_floor")),
        output=pick("output"),
        format=fmt,
        trials=int(pick("trials")),
        alphas=alphas,
        cross_scheme=bool(pick("cross_scheme")),
    )


def _parse_int_list(text, flag):
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise UsageError(f"{flag} expects comma-separated integers, got {text!r}")


def _parse_float_list(text, flag):
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise UsageError(f"{flag} expects comma-separated numbers, got {text!r}")
    if not values:
        raise UsageError(f"{flag} expects at least one value")
    return values


def _parse_bounds(text, dim):
    parts = _parse_float_list(text, "--bounds")
    if len(parts) == 2:
        interval = (parts[0], parts[1])
        return tuple(interval for _ in range(dim))
    if len(parts) == 2 * dim:
        return tuple((parts[2 * k], parts[2 * k + 1]) for k in range(dim))
    raise UsageError(
        f"--bounds expects 'a,b' (shared) or one pair per axis, got {text!r}"
    )


def build_potential(cfg: CliConfig, grid) -> GridFunction:
    """Resolve a potential preset string into node values."""
    spec = cfg.potential
    if spec == "zero":
        return zero_potential(grid)
    if spec.startswith("harmonic:"):
        try:
            omega = float(spec.split(":", 1)[1])
        except ValueError:
            raise UsageError(f"malformed harmonic preset {spec!r}; expected harmonic:<omega>")
        return harmonic_potential(grid, omega)
    if spec.startswith("well:"):
        parts = spec.split(":")
        if len(parts) != 4:
            raise UsageError(f"malformed well preset {spec!r}; expected well:<depth>:<lo>:<hi>")
        try:
            depth, lo, hi = (float(p) for p in parts[1:])
        except ValueError:
            raise UsageError(f"malformed well preset {spec!r}; numbers expected")
        return well_potential(grid, depth, lo, hi)
    if spec.startswith("file:"):
        path = spec.split(":", 1)[1]
        try:
            values = np.loadtxt(path, delimiter=",").ravel()
        except OSError as exc:
            raise UsageError(f"cannot read potential file {path}: {exc}")
        return GridFunction(grid, values)
    raise UsageError(
        f"unknown potential {spec!r}; use zero, harmonic:<omega>, well:<depth>:<lo>:<hi> or file:<path>"
    )


def build_problem(cfg: CliConfig) -> Problem:
    grid = build_grid(cfg.dim, cfg.n, cfg.bounds)
    try:
        return Problem(grid, build_potential(cfg, grid), cfg.beta)
    except ValueError as exc:
        raise UsageError(str(exc))


def run_config(cfg: CliConfig, alpha0: float | None = None, mode: str | None = None) -> RunConfig:
    policy = StepPolicy(
        mode=mode or cfg.mode,
        alpha0=alpha0 if alpha0 is not None else cfg.alpha0,
        shrink=cfg.shrink,
        alpha_floor=cfg.alpha_floor,
    )
    try:
        return RunConfig(
            scheme=_SCHEMES[cfg.scheme],
            policy=policy,
            tol=cfg.tol,
            max_iter=cfg.max_iter,
            seed=cfg.seed,
            init=cfg.init,
            init_path=cfg.init_path,
        )
    except ValueError as exc:
        raise UsageError(str(exc))


# --- serialization -----------------------------------------------------------


def _meta(cfg: CliConfig) -> dict:
    return {
        "scheme": cfg.scheme,
        "dim": cfg.dim,
        "n": list(cfg.n),
        "beta": cfg.beta,
        "potential": cfg.potential,
        "seed": cfg.seed,
        "version": __version__,
    }


def report_payload(cfg: CliConfig, report: ConvergenceReport) -> dict:
    rate = None
    if report.rate is not None:
        rate = {"rho": report.rate.rho, "r_squared": report.rate.r_squared}
    return {
        "meta": _meta(cfg),
        "iterations": [
            {
                "n": r.n,
                "energy": r.energy,
                "residual": r.residual,
                "gamma": r.gamma,
                "alpha": r.alpha,
                "decrease": r.decrease,
            }
            for r in report.records
        ],
        "final": {
            "status": report.status,
            "lambda": report.final_record.gamma,
            "rate": rate,
        },
    }


def checks_payload(cfg: CliConfig, results: list[CheckResult]) -> dict:
    def jsonable(x):
        return None if isinstance(x, float) and math.isnan(x) else x

    return {
        "meta": _meta(cfg),
        "checks": [
            {
                "name": r.name,
                "passed": r.passed,
                "skipped": r.skipped,
                "margin": jsonable(r.margin),
                "trials": r.trials,
                "detail": r.detail,
            }
            for r in results
        ],
    }


def spectral_payload(cfg: CliConfig, report: ConvergenceReport, spectral: SpectralReport) -> dict:
    return {
        "meta": _meta(cfg),
        "spectrum": {
            "lambda0": spectral.lambda0,
            "lambda1": spectral.lambda1,
            "gap_factor": spectral.gap_factor,
        },
        "final": {"status": report.status, "lambda": report.final_record.gamma},
    }


def render_json(payload: dict) -> str:
    return json.dumps(payload, indent=2) + "\n"


def render_csv(report: ConvergenceReport) -> str:
    lines = ["n,energy,residual,gamma,alpha,decrease"]
    for r in report.records:
        lines.append(
            "%d,%.17g,%.17g,%.17g,%.17g,%.17g"
            % (r.n, r.energy, r.residual, r.gamma, r.alpha, r.decrease)
        )
    return "\n".join(lines) + "\n"


def emit_report(payload, fmt: str, path: str | None) -> None:
    """Write a report in the requested format; None path means stdout."""
    if fmt == "csv":
        if not isinstance(payload, ConvergenceReport):
            raise UsageError("csv output is only available for run traces")
        text = render_csv(payload)
    elif isinstance(payload, ConvergenceReport):
        raise ValueError("serialize run reports through report_payload")
    else:
        text = render_json(payload)
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


# --- commands ----------------------------------------------------------------


def _emit_run(cfg: CliConfig, report: ConvergenceReport) -> None:
    if cfg.format == "csv":
        emit_report(report, "csv", cfg.output)
    else:
        emit_report(report_payload(cfg, report), "json", cfg.output)


def cmd_run(cfg: CliConfig) -> int:
    report = run(build_problem(cfg), run_config(cfg))
    _emit_run(cfg, report)
    return 0 if report.status == "converged" else 2


def _spectral_at_final(problem, report):
    op = linearized_operator(problem, report.final)
    return lowest_two_eigen(op)


def cmd_verify(cfg: CliConfig) -> int:
    problem = build_problem(cfg)
    report = run(problem, run_config(cfg))
    if report.status != "converged":
        emit_report(report_payload(cfg, report), "json", cfg.output)
        return 2
    spectral = _spectral_at_final(problem, report)
    results = check_suite(problem, report, spectral, trials=cfg.trials, seed=cfg.seed)
    if cfg.cross_scheme:
        from .verify import cross_scheme_agreement

        results = results + [cross_scheme_agreement(problem, run_config(cfg))]
    emit_report(checks_payload(cfg, results), "json", cfg.output)
    return 3 if failures(results) else 0


def cmd_spectrum(cfg: CliConfig) -> int:
    problem = build_problem(cfg)
    report = run(problem, run_config(cfg))
    if report.status != "converged":
        emit_report(report_payload(cfg, report), "json", cfg.output)
        return 2
    spectral = _spectral_at_final(problem, report)
    emit_report(spectral_payload(cfg, report, spectral), "json", cfg.output)
    return 0


def _thread_cap() -> int:
    value = os.environ.get("GPFLOW_THREADS", "")
    if value.strip():
        try:
            cap = int(value)
        except ValueError:
            raise UsageError(f"GPFLOW_THREADS must be an integer, got {value!r}")
        if cap < 1:
            raise UsageError("GPFLOW_THREADS must be >= 1")
        return cap
    return os.cpu_count() or 1


def cmd_sweep(cfg: CliConfig) -> int:
    problem = build_problem(cfg)

    def one(alpha):
        return run(problem, run_config(cfg, alpha0=alpha, mode="fixed"))

    with ThreadPoolExecutor(max_workers=min(_thread_cap(), len(cfg.alphas))) as pool:
        reports = list(pool.map(one, cfg.alphas))

    entries = []
    for alpha, report in zip(cfg.alphas, reports):
        entry = {
            "alpha": alpha,
            "status": report.status,
            "lambda": report.final_record.gamma,
            "iterations": len(report.records),
            "rho": None,
            "r_squared": None,
        }
        if report.rate is not None:
            entry["rho"] = report.rate.rho
            entry["r_squared"] = report.rate.r_squared
        entries.append(entry)
    emit_report({"meta": _meta(cfg), "sweep": entries}, "json", cfg.output)
    return 0 if all(r.status == "converged" for r in reports) else 2


_COMMANDS = {"run": cmd_run, "verify": cmd_verify, "spectrum": cmd_spectrum, "sweep": cmd_sweep}


def main(argv: list[str] | None = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    try:
        cfg = parse_config(argv)
        return _COMMANDS[cfg.command](cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except GreenSolveError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
