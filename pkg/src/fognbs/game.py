"""
Cooperative bargaining over the fog CPU and device transmit powers.

Each device's utility is its Tchebyshev slack y_k; the bargaining point
minimizes prod(y_k) over the joint feasible set. Relaxing the product with
multipliers mu (prod(mu) >= 1) gives sum(mu_k y_k), which is minimized by
block coordinate descent: a closed-form mu step (geometric mean) alternates
with the coupled convex psi step over (f, p, y).
"""

import logging
import time
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .config import NetworkConfig, SolverSettings
from .convex import FractionalState
from .device_opt import IdealPoint, TchebyshevEpigraph, TchebyshevSetting, ideal_energy
from .errors import DegenerateUtilityError, DeviceSolveError, NonConvergenceError, SolverError
from .metrics import Allocation, LatencyEnergy
from .scenario import Device, run_generator
from .timing import log_timing, timed

logger = logging.getLogger("fognbs.game")


@dataclass
class GameState:
    """Allocation, slacks and multipliers of one bargaining iterate."""
    allocation: Allocation
    y: np.ndarray
    mu: np.ndarray
    fractional: FractionalState | None = None  # loop state of the psi step that produced it


@dataclass
class EquilibriumReport:
    state: GameState
    product_utility: float
    per_device: list[LatencyEnergy]
    iterations: int
    objective_trace: list[float]
    ideals: list[IdealPoint] = field(default_factory=list)
    converged: bool = True
    # (bargaining iteration, fractional loop state) per psi step
    fractional_traces: list[tuple[int, FractionalState]] = field(default_factory=list)


@dataclass
class BaselineReport:
    """Metrics of the non-optimized equal-share allocation."""
    allocation: Allocation
    per_device: list[LatencyEnergy]


def product_utility(y: np.ndarray) -> float:
    return float(np.prod(y))


# ============================================================================
# Block steps
# ============================================================================

def mu_step(y: Sequence[float], y_floor: float = 1e-12) -> np.ndarray:
    """
    argmin of sum(mu_k y_k) over prod(mu_k) >= 1: mu_k = G / y_k with G the
    geometric mean of y, so prod(mu) = 1 and the minimum is K G.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.size == 0:
        raise DegenerateUtilityError("y must be a non-empty vector")
    if not np.all(np.isfinite(y)) or np.any(y < -y_floor):
        raise DegenerateUtilityError(f"utilities must be finite and nonnegative, got {y}")
    if np.any(y < y_floor):
        logger.warning(
            "Utility slack below floor, flooring to %.1e", y_floor,
            extra={"extra": {"y": y.tolist()}},
        )
        y = np.maximum(y, y_floor)
    log_y = np.log(y)
    return np.exp(np.mean(log_y) - log_y)


def _attribute_failure(epigraph: TchebyshevEpigraph, exc: SolverError) -> int:
    """Device whose constraints are tightest at the failed iterate."""
    best = exc.best
    if not isinstance(best, np.ndarray) or best.shape != (3 * epigraph.k,):
        return 0
    f, p, y = epigraph.split(best)
    try:
        dt, de = epigraph.deviations(f, p)
    except Exception:
        return 0
    return int(np.argmax(np.maximum(dt, de) - y))


@timed("psi_step")
def psi_step(
    mu: Sequence[float],
    prev: GameState,
    devices: Sequence[Device],
    cfg: NetworkConfig,
    eta: float,
    ideals: Sequence[IdealPoint],
    settings: SolverSettings | None = None,
) -> GameState:
    """
    Minimize sum(mu_k y_k) over (f, p, y) with sum(f_k) <= f0, warm-started
    from `prev`. Returned y are the true (tight) slacks of the new allocation.
    """
    mu = np.asarray(mu, dtype=float)
    epigraph = TchebyshevEpigraph(devices, cfg, eta, ideals, mu=mu, settings=settings)
    try:
        x, solver = epigraph.solve(prev.allocation.freqs_hz, prev.allocation.powers_w)
    except SolverError as exc:
        raise DeviceSolveError(_attribute_failure(epigraph, exc), exc) from exc
    f, p, _ = epigraph.split(x)
    return GameState(
        allocation=Allocation(f.copy(), p.copy()),
        y=epigraph.true_y(x),
        mu=mu,
        fractional=solver.state,
    )


# ============================================================================
# Bargaining loop
# ============================================================================

def _true_slacks(
    devices: Sequence[Device], cfg: NetworkConfig, eta: float, ideals: Sequence[IdealPoint], allocation: Allocation
) -> np.ndarray:
    epigraph = TchebyshevEpigraph(devices, cfg, eta, ideals)
    return np.maximum(*epigraph.deviations(allocation.freqs_hz, allocation.powers_w))


def initial_allocation(
    devices: Sequence[Device],
    cfg: NetworkConfig,
    seed: int,
    run_index: int = 0,
    settings: SolverSettings | None = None,
) -> Allocation:
    """Equal CPU shares and powers drawn uniformly from [0, pbar_k] (floored at p_min)."""
    settings = settings or SolverSettings()
    rng = run_generator(seed, run_index, 1)
    k = len(devices)
    powers = np.array([
        max(rng.uniform(0.0, d.max_power_w), d.max_power_w * settings.p_min_fraction) for d in devices
    ])
    return Allocation(np.full(k, cfg.cpu_cap_hz / k), powers)


def _report(
    state: GameState,
    devices: Sequence[Device],
    cfg: NetworkConfig,
    ideals: list[IdealPoint],
    iterations: int,
    trace: list[float],
    fractional_traces: list[tuple[int, FractionalState]],
    converged: bool,
) -> EquilibriumReport:
    per_device = [
        LatencyEnergy.evaluate(d, state.allocation.freqs_hz[i], state.allocation.powers_w[i], cfg)
        for i, d in enumerate(devices)
    ]
    return EquilibriumReport(
        state=state,
        product_utility=product_utility(state.y),
        per_device=per_device,
        iterations=iterations,
        objective_trace=trace,
        ideals=ideals,
        converged=converged,
        fractional_traces=fractional_traces,
    )


def solve_nbs(
    devices: Sequence[Device],
    cfg: NetworkConfig,
    eta: float,
    seed: int,
    *,
    run_index: int = 0,
    settings: SolverSettings | None = None,
    ideals: Sequence[IdealPoint] | None = None,
    warm_start: Allocation | None = None,
) -> EquilibriumReport:
    """
    Bargaining equilibrium of `devices` at weight `eta`.

    Stops when the fractional change of sum(mu_k y_k) drops below the
    threshold. A psi step that would raise the objective is rejected and ends
    the loop. Raises NonConvergenceError carrying the best report when the
    iteration cap is hit.
    """
    TchebyshevSetting(eta)
    settings = settings or SolverSettings()
    started = time.perf_counter()
    devices = list(devices)

    if ideals is None:
        ideals = []
        for i, device in enumerate(devices):
            try:
                ideals.append(ideal_energy(device, cfg, settings))
            except SolverError as exc:
                raise DeviceSolveError(i, exc) from exc
    ideals = list(ideals)

    allocation = warm_start if warm_start is not None else initial_allocation(devices, cfg, seed, run_index, settings)
    y = _true_slacks(devices, cfg, eta, ideals, allocation)
    state = GameState(allocation=allocation, y=y, mu=mu_step(y, settings.y_floor))
    trace = [float(state.mu @ state.y)]
    fractional_traces: list[tuple[int, FractionalState]] = []

    converged = False
    n = 0
    while n < settings.max_bcd_iterations:
        n += 1
        mu = mu_step(state.y, settings.y_floor)
        # min over mu at fixed y: K * G(y) <= previous sum(mu y)
        bound = float(mu @ np.maximum(state.y, settings.y_floor))
        candidate = psi_step(mu, state, devices, cfg, eta, ideals, settings)
        if candidate.fractional is not None:
            fractional_traces.append((n, candidate.fractional))
        value = float(mu @ candidate.y)
        if value > bound + 1e-9 * max(1.0, abs(bound)):
            logger.debug("psi step rejected on non-descent at n=%d", n, extra={"extra": {"run": run_index}})
            converged = True
            break
        state = candidate
        previous = trace[-1]
        trace.append(value)
        if abs(previous - value) <= settings.bcd_threshold * max(abs(previous), settings.y_floor):
            converged = True
            break

    elapsed_ms = (time.perf_counter() - started) * 1000
    log_timing(
        "solve_nbs", elapsed_ms, run=run_index, eta=eta,
        extra={"iterations": n, "objective": trace[-1], "devices": len(devices)},
    )
    report = _report(state, devices, cfg, ideals, n, trace, fractional_traces, converged)
    if not converged:
        raise NonConvergenceError(
            f"bargaining loop did not converge within {settings.max_bcd_iterations} iterations",
            best=report,
        )
    return report


def equal_share_baseline(devices: Sequence[Device], cfg: NetworkConfig) -> BaselineReport:
    """f_k = f0 / K and p_k = pbar_k for every device; no optimization."""
    k = len(devices)
    allocation = Allocation(np.full(k, cfg.cpu_cap_hz / k), np.array([d.max_power_w for d in devices]))
    per_device = [
        LatencyEnergy.evaluate(d, allocation.freqs_hz[i], allocation.powers_w[i], cfg)
        for i, d in enumerate(devices)
    ]
    return BaselineReport(allocation=allocation, per_device=per_device)
