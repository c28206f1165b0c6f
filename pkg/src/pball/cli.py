"""Command line entry point: dispatch, deterministic outputs, exit codes.

Exit codes: 0 success, 2 configuration error, 3 solver divergence (including
an unbounded extremal-parameter search), 4 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import reporting
from .branch import (Divergence, continue_branch, estimate_lambda_star,
                     monotone_minimal_solution)
from .config import RunConfig, parse_config
from .errors import (ConfigError, EigenConvergenceError, MinimalityError,
                     NewtonDivergenceError, PballError,
                     UnboundedLambdaStarError)
from .operators import build_weights, torsion_function
from .stability import (norm_audit, regularity_exponents,
                        stability_along_branch, weighted_gradient_estimate)

COMMANDS = ("solve", "branch", "lambda-star", "stability", "estimates",
            "exponents", "torsion")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3
EXIT_NUMERICAL = 4


def _cmd_torsion(rc: RunConfig, out: Path) -> int:
    prof = torsion_function(rc.model, rc.operator, rc.grid)
    reporting.write_profile_csv(out / "torsion.csv", prof)
    reporting.figure_profile(out / "torsion.png", prof, label="w")
    print(f"torsion: max w = {reporting.format_float(prof.u_max)}")
    return EXIT_OK


def _cmd_solve(rc: RunConfig, out: Path) -> int:
    if rc.lam is None:
        raise ConfigError("solve requires a positive top-level \"lambda\"")
    res = monotone_minimal_solution(rc.model, rc.operator, rc.nonlinearity,
                                    rc.lam, rc.grid, rc.settings)
    if isinstance(res, Divergence):
        print(f"divergence at lambda = {rc.lam:g}: {res.reason} after "
              f"{res.iterations} iterations", file=sys.stderr)
        return EXIT_DIVERGENCE
    name = f"profile_{rc.lam:g}"
    reporting.write_profile_csv(out / f"{name}.csv", res)
    reporting.figure_profile(out / f"{name}.png", res)
    print(f"solve: lambda = {rc.lam:g}, u(0) = "
          f"{reporting.format_float(res.u[0])}, iters = {res.meta['iters']}")
    return EXIT_OK


def _cmd_lambda_star(rc: RunConfig, out: Path) -> int:
    bracket = estimate_lambda_star(rc.model, rc.operator, rc.nonlinearity,
                                   rc.grid, rc.settings)
    reporting.write_bracket_json(out / "bracket.json", bracket)
    print(f"lambda-star: [{reporting.format_float(bracket.lambda_lo)}, "
          f"{reporting.format_float(bracket.lambda_hi)}]")
    return EXIT_OK


def _build_branch(rc: RunConfig):
    w = build_weights(rc.model, rc.grid)
    bracket = estimate_lambda_star(rc.model, rc.operator, rc.nonlinearity,
                                   rc.grid, rc.settings, weights=w)
    samples = rc.lambdas if rc.lambdas is not None else None
    branch = continue_branch(rc.model, rc.operator, rc.nonlinearity, rc.grid,
                             rc.settings, samples, bracket=bracket, weights=w)
    branch, rows = stability_along_branch(rc.model, rc.operator,
                                          rc.nonlinearity, branch, weights=w)
    return branch, rows


def _cmd_branch(rc: RunConfig, out: Path) -> int:
    branch, _ = _build_branch(rc)
    reporting.write_branch_csv(out / "branch.csv", branch)
    reporting.write_bracket_json(out / "bracket.json", branch.bracket)
    reporting.figure_branch(out / "branch.png", branch)
    print(f"branch: {len(branch.points)} points, lambda* in "
          f"[{reporting.format_float(branch.bracket.lambda_lo)}, "
          f"{reporting.format_float(branch.bracket.lambda_hi)}]")
    return EXIT_OK


def _cmd_stability(rc: RunConfig, out: Path) -> int:
    branch, rows = _build_branch(rc)
    reporting.write_stability_csv(out / "stability.csv", rows)
    reporting.figure_stability(out / "stability.png", rows)
    worst = min(r["mu1"] for r in rows)
    print(f"stability: {len(rows)} points, min mu1 = "
          f"{reporting.format_float(worst)}")
    return EXIT_OK


def _cmd_estimates(rc: RunConfig, out: Path) -> int:
    branch, _ = _build_branch(rc)
    alphas = rc.alphas if rc.alphas is not None else (1.0, 1.3, 1.5)
    rows = []
    for pt in branch.points:
        for alpha in alphas:
            rep = weighted_gradient_estimate(rc.model, rc.operator,
                                             pt.profile, alpha)
            rows.append({"lambda": pt.lam, "alpha": rep.alpha,
                         "delta": rep.delta, "lhs": rep.lhs,
                         "ratio": rep.ratio})
    reporting.write_estimate_csv(out / "estimate.csv", rows)
    audit_rows, summary = norm_audit(rc.model, rc.operator, branch)
    reporting.write_norm_audit_csv(out / "norm_audit.csv", audit_rows)
    reporting.figure_estimate(out / "estimate.png", rows)
    print(f"estimates: {len(rows)} weighted rows, regime = "
          f"{summary['regime']}, max norm ratio = "
          f"{reporting.format_float(summary['max_ratio'])}")
    return EXIT_OK


def _cmd_exponents(rc: RunConfig, out: Path) -> int:
    rep = regularity_exponents(rc.model.N, rc.operator.p)
    reporting.write_exponents_json(out / "exponents.json", rep)
    print(f"exponents: N = {rep.N}, p = {rep.p:g}, regime = {rep.regime}, "
          f"threshold = {rep.threshold:g}")
    return EXIT_OK


_DISPATCH = {
    "torsion": _cmd_torsion,
    "solve": _cmd_solve,
    "lambda-star": _cmd_lambda_star,
    "branch": _cmd_branch,
    "stability": _cmd_stability,
    "estimates": _cmd_estimates,
    "exponents": _cmd_exponents,
}


def run_command(command: str, config, out_dir) -> int:
    """Run one command against a parsed or raw configuration."""
    if command not in _DISPATCH:
        raise ConfigError(f"unknown command {command!r}")
    rc = config if isinstance(config, RunConfig) else parse_config(config)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return _DISPATCH[command](rc, out)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pball",
        description="Radial p-Laplace branches and stability audits on model "
                    "geometries")
    parser.add_argument("--command", required=True, choices=COMMANDS)
    parser.add_argument("--config", required=True,
                        help="path to a JSON configuration file")
    parser.add_argument("--out", default="out",
                        help="output directory (default: ./out)")
    args = parser.parse_args(argv)
    try:
        return run_command(args.command, Path(args.config), Path(args.out))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UnboundedLambdaStarError as exc:
        print(f"divergence not found: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (NewtonDivergenceError, EigenConvergenceError,
            MinimalityError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except PballError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
