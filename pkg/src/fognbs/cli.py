"""
Command-line front end.

Usage:
    fog-nbs pareto --eta-grid 20 --runs 50 --lambda 1e-27,1e-25 --out pareto.csv
    fog-nbs equilibrium --eta 0.01,0.9 --trace trace.csv
    fog-nbs sweep-fmax --fmax-list 0.4e9,0.8e9,1.2e9 --eta 0.01,0.9
    fog-nbs baseline --runs 10
    fog-nbs verify --scenario scenarios/tiny.conf

Settings precedence: flags > FOGNBS_* environment (.env.local) > scenario
file > built-in defaults. The effective scenario is echoed to stderr.
Exit codes: 0 ok, 1 I/O failure, 2 invalid input, 3 solver failure,
4 verification failure.
"""

import argparse
import logging
import sys
from collections.abc import Sequence
from dataclasses import replace

import numpy as np

from .config import PowerModel, ScenarioSpec, get_default_scenario, settings_from_env
from .device_opt import eta_grid
from .errors import (
    DomainError,
    PartialResultsError,
    ResultsWriteError,
    ScenarioParseError,
    ScenarioValidationError,
    SolverError,
    VerificationFailure,
)
from .experiments import baseline_rows, equilibrium_rows, pareto_rows, sweep_fmax_rows, verify_rows
from .oracle import GridSpec
from .overrides import echo_scenario, merge_overrides
from .scenario import format_results, load_scenario, rows_to_frame, write_results

logger = logging.getLogger("fognbs.cli")

EXIT_OK = 0
EXIT_IO = 1
EXIT_INVALID = 2
EXIT_SOLVER = 3
EXIT_VERIFY = 4

DEFAULT_FMAX_LIST = tuple(float(f) for f in np.linspace(0.2e9, 2.4e9, 12))


def _float_list(text: str) -> list[float]:
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="Scenario file (key = value); defaults to the built-in scenario")
    common.add_argument("--seed", type=int, default=None, help="Base RNG seed")
    common.add_argument("--runs", type=int, default=None, help="Number of random device placements")
    common.add_argument("--devices", type=int, default=None, help="Devices per run (K)")
    common.add_argument("--model", choices=[m.value for m in PowerModel], default=None, help="Circuit-power model")
    common.add_argument("--lambda", dest="lambdas", type=_float_list, default=None,
                        help="CPU energy coefficient(s), comma-separated (pareto only accepts several)")
    common.add_argument("--bandwidth-hz", type=float, default=None, help="Per-device bandwidth B")
    common.add_argument("--fmax-hz", type=float, default=None, help="Fog CPU capacity f0")
    common.add_argument("--out", default=None, help="Output CSV (stdout when omitted)")
    common.add_argument("--trace", default=None, help="Per-iteration trace CSV (equilibrium only)")
    common.add_argument("--workers", type=int, default=None, help="Worker threads across runs")
    common.add_argument("--log-level", default=None, help="Logging level (DEBUG, INFO, ...)")
    common.add_argument("--solver-tol", type=float, default=None, help="Barrier duality-gap tolerance")

    parser = argparse.ArgumentParser(prog="fog-nbs", description="Fog-assisted IoT latency/energy bargaining simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    pareto = sub.add_parser("pareto", parents=[common], help="Average Pareto boundary at the bargaining point")
    pareto.add_argument("--eta-grid", type=int, default=20, help="Number of log-symmetric weights in (0, 1)")
    pareto.add_argument("--eta", type=_float_list, default=None, help="Explicit weights in [0, 1] (overrides --eta-grid)")

    equilibrium = sub.add_parser("equilibrium", parents=[common], help="Per-run equilibria")
    equilibrium.add_argument("--eta", type=_float_list, default=[0.5], help="Weights in (0, 1)")

    sweep = sub.add_parser("sweep-fmax", parents=[common], help="Equilibrium vs equal share across CPU capacities")
    sweep.add_argument("--fmax-list", type=_float_list, default=list(DEFAULT_FMAX_LIST), help="CPU capacities in Hz")
    sweep.add_argument("--eta", type=_float_list, default=[0.01, 0.9], help="Weights in (0, 1)")

    sub.add_parser("baseline", parents=[common], help="Equal-share baseline metrics")

    verify = sub.add_parser("verify", parents=[common], help="Check solvers against the grid oracle")
    verify.add_argument("--tolerance", type=float, default=0.02, help="Relative tolerance of oracle comparisons")
    verify.add_argument("--grid-points", type=int, default=None, help="Grid points per axis")
    return parser


def _configure_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def resolve_scenario(args: argparse.Namespace) -> ScenarioSpec:
    """Scenario file (or defaults) with flag overrides applied."""
    spec = load_scenario(args.scenario) if args.scenario else get_default_scenario()
    return merge_overrides(spec, {
        "seed": args.seed,
        "runs": args.runs,
        "device_count": args.devices,
        "power_model": args.model,
        "bandwidth_hz": args.bandwidth_hz,
        "cpu_cap_hz": args.fmax_hz,
    })


def _check_etas(etas: Sequence[float], allow_endpoints: bool) -> None:
    for eta in etas:
        lo_ok = eta >= 0.0 if allow_endpoints else eta > 0.0
        hi_ok = eta <= 1.0 if allow_endpoints else eta < 1.0
        if not (lo_ok and hi_ok):
            raise DomainError(f"eta {eta!r} outside the allowed range")


def _emit(rows, path: str | None) -> None:
    if path:
        write_results(rows, path)
    else:
        sys.stdout.write(format_results(rows))


def _run(args: argparse.Namespace) -> int:
    solver_settings, run_settings = settings_from_env()
    if args.solver_tol is not None:
        solver_settings = replace(solver_settings, tol=args.solver_tol)
    workers = args.workers if args.workers is not None else run_settings.workers
    trace_path = args.trace or run_settings.trace_path

    spec = resolve_scenario(args)
    lambdas = args.lambdas or [spec.network.cpu_energy_lambda]
    if len(lambdas) > 1 and args.command != "pareto":
        raise DomainError("several --lambda values are only supported by pareto")
    if args.trace and args.command != "equilibrium":
        raise DomainError("--trace is only supported by equilibrium")
    specs = [merge_overrides(spec, {"cpu_energy_lambda": lam}) for lam in lambdas]
    for effective in specs:
        sys.stderr.write(echo_scenario(effective))

    if args.command == "pareto":
        etas = args.eta if args.eta is not None else eta_grid(args.eta_grid).tolist()
        _check_etas(etas, allow_endpoints=True)
        rows = []
        try:
            for effective in specs:
                rows.extend(pareto_rows(effective, etas, solver_settings, workers))
        except PartialResultsError as exc:
            rows.extend(exc.rows)
            if rows:
                logger.warning("Writing %d partial rows before failing", len(rows),
                               extra={"extra": {"completed_runs": exc.completed_runs}})
                _emit(rows, args.out)
            raise
        _emit(rows, args.out)
    elif args.command == "equilibrium":
        _check_etas(args.eta, allow_endpoints=False)
        rows, traces = equilibrium_rows(specs[0], args.eta, solver_settings, workers)
        _emit(rows, args.out)
        if trace_path and traces:
            write_results(traces, trace_path)
    elif args.command == "sweep-fmax":
        _check_etas(args.eta, allow_endpoints=False)
        _emit(sweep_fmax_rows(specs[0], args.fmax_list, args.eta, solver_settings, workers), args.out)
    elif args.command == "baseline":
        _emit(baseline_rows(specs[0], workers), args.out)
    elif args.command == "verify":
        grid = GridSpec(points_per_axis=args.grid_points) if args.grid_points else None
        rows = verify_rows(specs[0], solver_settings, args.tolerance, grid)
        sys.stderr.write(rows_to_frame(rows).to_string(index=False) + "\n")
        if args.out:
            write_results(rows, args.out)
        failed = [row.check for row in rows if not row.passed]
        if failed:
            raise VerificationFailure(f"{len(failed)} oracle checks failed: {', '.join(failed)}")
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _, run_settings = settings_from_env()
    _configure_logging(args.log_level or run_settings.log_level)
    try:
        return _run(args)
    except (ScenarioParseError, ScenarioValidationError, DomainError) as exc:
        logger.error("Invalid input: %s", exc)
        return EXIT_INVALID
    except SolverError as exc:
        logger.error("Solver failed: %s", exc)
        return EXIT_SOLVER
    except VerificationFailure as exc:
        logger.error("Verification failed: %s", exc)
        return EXIT_VERIFY
    except ResultsWriteError as exc:
        logger.error("%s", exc)
        return EXIT_IO
    except OSError as exc:
        logger.error("I/O error: %s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
