"""
Experiment drivers behind the CLI commands.

Runs are independent: each worker samples its own devices from the run's
Philox stream, so results are keyed by run index and sorted before any
aggregation. Within a run, equilibria are computed along ascending eta with
warm starts.
"""

import logging
import time
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import TypeVar

import numpy as np

from .config import NetworkConfig, ScenarioSpec, SolverSettings
from .device_opt import IdealPoint, ideal_energy, ideal_latency, solve_tchebyshev_single
from .errors import DeviceSolveError, NonConvergenceError, PartialResultsError, SolverError
from .game import EquilibriumReport, equal_share_baseline, solve_nbs
from .metrics import Allocation, LatencyEnergy
from .oracle import (
    ENERGY,
    LATENCY,
    GridSpec,
    grid_min_product,
    grid_min_single,
    oracle_ideal,
    product_objective,
    tchebyshev_y,
)
from .overrides import merge_overrides
from .records import BaselineRow, EquilibriumRow, ParetoRow, SweepRow, TraceRow, VerifyRow
from .scenario import Device, sample_devices
from .timing import log_timing, stopwatch

logger = logging.getLogger("fognbs.experiments")

T = TypeVar("T")


@dataclass
class DeviceOutcome:
    k: int
    f_hz: float
    p_w: float
    y: float
    metrics: LatencyEnergy


@dataclass
class RunEquilibrium:
    """Outcome of one (run, eta) pair."""
    run: int
    eta: float
    devices: list[DeviceOutcome]
    product_utility: float
    iterations: int
    converged: bool
    report: EquilibriumReport | None = None
    traces: list[TraceRow] = field(default_factory=list)


def map_runs(fn: Callable[[int], T], runs: Iterable[int], workers: int = 1) -> list[T]:
    """Apply `fn` to every run index; results come back in run order."""
    runs = list(runs)
    if workers <= 1 or len(runs) <= 1:
        return [fn(run) for run in runs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        keyed = dict(zip(runs, pool.map(fn, runs)))
    return [keyed[run] for run in sorted(keyed)]


def _trace_rows(run: int, eta: float, report: EquilibriumReport) -> list[TraceRow]:
    rows = []
    for bcd_iteration, state in report.fractional_traces:
        for q, (objective, t) in enumerate(zip(state.objective_trace, state.t_trace)):
            rows.append(TraceRow(run, eta, bcd_iteration, q, objective, t))
    return rows


# ============================================================================
# Per-run equilibria
# ============================================================================

def endpoint_outcomes(
    devices: Sequence[Device], cfg: NetworkConfig, eta: float, ideals: Sequence[IdealPoint]
) -> list[DeviceOutcome]:
    """
    eta = 0 and eta = 1 are the single-objective problems of each device on
    its own: the energy minimizer and the (f0, pbar) latency corner. They
    ignore the shared CPU constraint.
    """
    outcomes = []
    for k, (device, ideal) in enumerate(zip(devices, ideals)):
        f, p = ideal.argmin_e if eta == 0.0 else (cfg.cpu_cap_hz, device.max_power_w)
        outcomes.append(DeviceOutcome(k, f, p, 0.0, LatencyEnergy.evaluate(device, f, p, cfg)))
    return outcomes


def _solve_or_best(
    devices: Sequence[Device],
    cfg: NetworkConfig,
    eta: float,
    seed: int,
    run: int,
    settings: SolverSettings,
    ideals: Sequence[IdealPoint],
    warm_start: Allocation | None,
) -> EquilibriumReport:
    try:
        return solve_nbs(
            devices, cfg, eta, seed, run_index=run, settings=settings, ideals=ideals, warm_start=warm_start
        )
    except NonConvergenceError as exc:
        if not isinstance(exc.best, EquilibriumReport):
            raise
        logger.warning(
            "Bargaining loop hit the iteration cap; using best iterate",
            extra={"extra": {"run": run, "eta": eta}},
        )
        return exc.best


def run_equilibria(
    spec: ScenarioSpec,
    run: int,
    etas: Sequence[float],
    settings: SolverSettings | None = None,
) -> list[RunEquilibrium]:
    """Equilibria of one run at every eta (endpoints handled separately)."""
    settings = settings or SolverSettings()
    cfg = spec.network
    started = time.perf_counter()
    devices = sample_devices(spec, run)
    ideals = []
    for k, device in enumerate(devices):
        try:
            ideals.append(ideal_energy(device, cfg, settings))
        except SolverError as exc:
            raise DeviceSolveError(k, exc) from exc

    results: dict[float, RunEquilibrium] = {}
    warm: Allocation | None = None
    for eta in sorted(set(etas)):
        if eta in (0.0, 1.0):
            outcomes = endpoint_outcomes(devices, cfg, eta, ideals)
            results[eta] = RunEquilibrium(run, eta, outcomes, 0.0, 0, True)
            continue
        report = _solve_or_best(devices, cfg, eta, spec.seed, run, settings, ideals, warm)
        warm = report.state.allocation
        outcomes = [
            DeviceOutcome(k, float(warm.freqs_hz[k]), float(warm.powers_w[k]), float(report.state.y[k]), metrics)
            for k, metrics in enumerate(report.per_device)
        ]
        results[eta] = RunEquilibrium(
            run, eta, outcomes, report.product_utility, report.iterations, report.converged,
            report=report, traces=_trace_rows(run, eta, report),
        )
    log_timing("run_equilibria", (time.perf_counter() - started) * 1000, run=run, level=logging.INFO,
               extra={"etas": len(results)})
    return [results[eta] for eta in etas]


# ============================================================================
# Command drivers
# ============================================================================

def _mean(values: Iterable[float]) -> float:
    return float(np.mean(list(values)))


def _pareto_row(spec: ScenarioSpec, eta: float, outcomes: Sequence[DeviceOutcome]) -> ParetoRow:
    return ParetoRow(
        eta=eta,
        T_s=_mean(d.metrics.t_total_s for d in outcomes),
        E_J=_mean(d.metrics.e_total_j for d in outcomes),
        f_hz=_mean(d.f_hz for d in outcomes),
        p_w=_mean(d.p_w for d in outcomes),
        y=_mean(d.y for d in outcomes),
        E_tx_J=_mean(d.metrics.e_tx_j for d in outcomes),
        E_ex_J=_mean(d.metrics.e_ex_j for d in outcomes),
        E_on_J=_mean(d.metrics.e_on_j for d in outcomes),
        lambda_=spec.network.cpu_energy_lambda,
        model=spec.network.power_model.value,
    )


def pareto_rows(
    spec: ScenarioSpec,
    etas: Sequence[float],
    settings: SolverSettings | None = None,
    workers: int = 1,
) -> list[ParetoRow]:
    """
    One row per eta, averaged over runs and devices.

    A solver failure in any run raises PartialResultsError whose `rows` are
    averaged over the runs that did finish (empty when none did).
    """

    def one_run(run: int) -> list[RunEquilibrium] | SolverError:
        try:
            return run_equilibria(spec, run, etas, settings)
        except SolverError as exc:
            logger.error("Run failed: %s", exc, extra={"extra": {"run": run}})
            return exc

    per_run = map_runs(one_run, range(spec.runs), workers)
    finished = [r for r in per_run if not isinstance(r, SolverError)]
    rows = []
    if finished:
        for i, eta in enumerate(etas):
            rows.append(_pareto_row(spec, eta, [d for run in finished for d in run[i].devices]))
    failures = [r for r in per_run if isinstance(r, SolverError)]
    if failures:
        raise PartialResultsError(failures[0], rows, len(finished)) from failures[0]
    return rows


def equilibrium_rows(
    spec: ScenarioSpec,
    etas: Sequence[float],
    settings: SolverSettings | None = None,
    workers: int = 1,
) -> tuple[list[EquilibriumRow], list[TraceRow]]:
    """Per-device rows plus a k = -1 summary row (y = prod(y_k)) per (run, eta)."""
    per_run = map_runs(lambda run: run_equilibria(spec, run, etas, settings), range(spec.runs), workers)
    rows: list[EquilibriumRow] = []
    traces: list[TraceRow] = []
    for run_results in per_run:
        for result in run_results:
            for d in result.devices:
                m = d.metrics
                rows.append(EquilibriumRow(
                    result.run, result.eta, d.k, d.f_hz, d.p_w, d.y, m.t_total_s, m.e_total_j,
                    m.e_tx_j, m.e_ex_j, m.e_on_j, result.iterations, result.converged,
                ))
            rows.append(EquilibriumRow(
                result.run, result.eta, -1,
                sum(d.f_hz for d in result.devices), float("nan"), result.product_utility,
                sum(d.metrics.t_total_s for d in result.devices), sum(d.metrics.e_total_j for d in result.devices),
                float("nan"), float("nan"), float("nan"), result.iterations, result.converged,
            ))
            traces.extend(result.traces)
    return rows, traces


def baseline_rows(spec: ScenarioSpec, workers: int = 1) -> list[BaselineRow]:
    def one_run(run: int) -> list[BaselineRow]:
        report = equal_share_baseline(sample_devices(spec, run), spec.network)
        return [
            BaselineRow(
                run, k, float(report.allocation.freqs_hz[k]), float(report.allocation.powers_w[k]),
                m.t_total_s, m.e_total_j, m.e_tx_j, m.e_ex_j, m.e_on_j,
            )
            for k, m in enumerate(report.per_device)
        ]

    return [row for rows in map_runs(one_run, range(spec.runs), workers) for row in rows]


def sweep_fmax_rows(
    spec: ScenarioSpec,
    fmax_list: Sequence[float],
    etas: Sequence[float],
    settings: SolverSettings | None = None,
    workers: int = 1,
) -> list[SweepRow]:
    """Equilibrium and equal-share averages for every (f0, eta)."""
    rows = []
    for fmax in fmax_list:
        scaled = merge_overrides(spec, {"cpu_cap_hz": fmax})
        cfg = scaled.network

        def one_run(run: int, scaled=scaled, cfg=cfg):
            base = equal_share_baseline(sample_devices(scaled, run), cfg)
            return base, run_equilibria(scaled, run, etas, settings)

        with stopwatch("sweep_fmax", logging.INFO, fmax_hz=fmax):
            per_run = map_runs(one_run, range(scaled.runs), workers)
        base_t = _mean(m.t_total_s for base, _ in per_run for m in base.per_device)
        base_e = _mean(m.e_total_j for base, _ in per_run for m in base.per_device)
        for i, eta in enumerate(etas):
            results = [equilibria[i] for _, equilibria in per_run]
            outcomes = [d for r in results for d in r.devices]
            rows.append(SweepRow(
                fmax_hz=fmax,
                eta=eta,
                T_eq_s=_mean(d.metrics.t_total_s for d in outcomes),
                E_eq_J=_mean(d.metrics.e_total_j for d in outcomes),
                T_base_s=base_t,
                E_base_J=base_e,
                f_used_fraction=_mean(sum(d.f_hz for d in r.devices) / fmax for r in results),
            ))
        logger.info("Swept f0=%.3g Hz", fmax, extra={"extra": {"etas": len(etas), "runs": scaled.runs}})
    return rows


# ============================================================================
# Verification against the grid oracle
# ============================================================================

VERIFY_ETAS = (0.1, 0.5, 0.9)


def _row(check: str, device: int, solver: float, oracle: float, slack: float, passed: bool) -> VerifyRow:
    return VerifyRow(check, device, float(solver), float(oracle), float(slack), bool(passed))


def verify_rows(
    spec: ScenarioSpec,
    settings: SolverSettings | None = None,
    tolerance: float = 0.02,
    grid: GridSpec | None = None,
    run: int = 0,
) -> list[VerifyRow]:
    """
    Cross-check the solvers on the devices of one run against brute force.

    Solver allocations are scored with the oracle's own ideal points, so both
    sides are compared under the same true objective.
    """
    settings = settings or SolverSettings()
    cfg = spec.network
    devices = sample_devices(spec, run)
    if len(devices) > 3:
        logger.warning("Verifying the first 3 of %d devices", len(devices))
        devices = devices[:3]
    grid = grid or GridSpec(points_per_axis=30 if len(devices) <= 2 else 20)
    rows: list[VerifyRow] = []
    oracle_ideals = [oracle_ideal(d, cfg) for d in devices]

    ideals = []
    for k, (device, reference) in enumerate(zip(devices, oracle_ideals)):
        t_solver = ideal_latency(device, cfg)
        t_grid = grid_min_single(device, cfg, LATENCY, grid)
        rows.append(_row("ideal_latency", k, t_solver, t_grid.value, 0.0,
                         abs(t_solver - t_grid.value) <= 1e-9 * t_grid.value))

        ideal = ideal_energy(device, cfg, settings)
        ideals.append(ideal)
        e_grid = grid_min_single(device, cfg, ENERGY, grid)
        rows.append(_row("ideal_energy_grid", k, ideal.e_min_j, e_grid.value, e_grid.cell_slack,
                         ideal.e_min_j <= e_grid.value + e_grid.cell_slack))
        rows.append(_row("ideal_energy_dense", k, ideal.e_min_j, reference.e_min_j, tolerance * reference.e_min_j,
                         abs(ideal.e_min_j - reference.e_min_j) <= tolerance * reference.e_min_j))

        for eta in VERIFY_ETAS:
            state = solve_tchebyshev_single(device, eta, cfg.cpu_cap_hz, cfg, settings, ideal)
            y_solver = product_objective([device], cfg, eta, Allocation([state.f_hz], [state.p_w]), [reference])
            y_grid = grid_min_single(device, cfg, tchebyshev_y(eta), grid, reference)
            slack = y_grid.cell_slack + tolerance * abs(y_grid.value)
            rows.append(_row(f"tchebyshev_eta={eta:g}", k, y_solver, y_grid.value, slack,
                             y_solver <= y_grid.value + slack))

    eta = 0.5
    report = _solve_or_best(devices, cfg, eta, spec.seed, run, settings, ideals, None)
    solver_value = product_objective(devices, cfg, eta, report.state.allocation, oracle_ideals)
    product = grid_min_product(devices, cfg, eta, grid, oracle_ideals)
    slack = product.cell_slack + tolerance * abs(product.value)
    rows.append(_row("nbs_product", -1, solver_value, product.value, slack, solver_value <= product.value + slack))
    rows.append(_row("nbs_cpu_capacity", -1, float(report.state.allocation.freqs_hz.sum()), cfg.cpu_cap_hz,
                     1e-9 * cfg.cpu_cap_hz,
                     report.state.allocation.freqs_hz.sum() <= cfg.cpu_cap_hz * (1.0 + 1e-9)))
    return rows
