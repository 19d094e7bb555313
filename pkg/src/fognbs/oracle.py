"""
Brute-force grid search over allocations of tiny instances.

Everything here evaluates the true (non-surrogate) latency and energy and
computes its own ideal points, so it shares no solver code with the
optimizers it checks. Grid minima are upper bounds on the continuous optima.
"""

import logging
from collections.abc import Sequence
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, NamedTuple

import numpy as np

from .config import NetworkConfig
from .errors import DomainError, GridSizeError
from .metrics import Allocation, effective_idle_power, energy, latency
from .scenario import Device
from .timing import timed

logger = logging.getLogger("fognbs.oracle")

MAX_GRID_POINTS = 10**8
MAX_ORACLE_DEVICES = 3


class Spacing(str, Enum):
    LINEAR = "linear"
    LOG = "log"


class ObjectiveKind(str, Enum):
    ENERGY = "energy"
    LATENCY = "latency"
    TCHEBYSHEV = "tchebyshev"


@dataclass(frozen=True)
class GridObjective:
    """Objective of a single-device grid search; TCHEBYSHEV needs eta."""
    kind: ObjectiveKind
    eta: float | None = None

    def __post_init__(self) -> None:
        if self.kind is ObjectiveKind.TCHEBYSHEV and not (self.eta is not None and 0.0 < self.eta < 1.0):
            raise DomainError(f"Tchebyshev objective needs 0 < eta < 1, got {self.eta!r}")


ENERGY = GridObjective(ObjectiveKind.ENERGY)
LATENCY = GridObjective(ObjectiveKind.LATENCY)


def tchebyshev_y(eta: float) -> GridObjective:
    return GridObjective(ObjectiveKind.TCHEBYSHEV, eta)


@dataclass(frozen=True)
class GridSpec:
    """
    Axes of the search grid.

    Ranges default to [f_low_fraction f0, f0] and [p_low_fraction pbar, pbar].
    `refined()` roughly doubles the resolution while keeping every old point.
    """
    points_per_axis: int = 30
    f_range: tuple[float, float] | None = None
    p_range: tuple[float, float] | None = None
    f_spacing: Spacing = Spacing.LINEAR
    p_spacing: Spacing = Spacing.LOG
    f_low_fraction: float = 0.01
    p_low_fraction: float = 1e-3

    def __post_init__(self) -> None:
        if self.points_per_axis < 10:
            raise DomainError(f"points_per_axis must be >= 10, got {self.points_per_axis}")
        for name in ("f_range", "p_range"):
            bounds = getattr(self, name)
            if bounds is not None and not 0.0 < bounds[0] < bounds[1]:
                raise DomainError(f"{name} must satisfy 0 < lo < hi, got {bounds}")

    def refined(self) -> "GridSpec":
        return replace(self, points_per_axis=2 * self.points_per_axis - 1)

    def check_size(self, devices: int) -> None:
        total = self.points_per_axis ** (2 * devices)
        if total > MAX_GRID_POINTS:
            raise GridSizeError(
                f"{self.points_per_axis} points/axis over {devices} devices is {total:.3g} points "
                f"(limit {MAX_GRID_POINTS:.0e})"
            )


def _axis(lo: float, hi: float, n: int, spacing: Spacing) -> np.ndarray:
    return np.geomspace(lo, hi, n) if spacing is Spacing.LOG else np.linspace(lo, hi, n)


def grid_axes(device: Device, cfg: NetworkConfig, grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    f_lo, f_hi = grid.f_range or (grid.f_low_fraction * cfg.cpu_cap_hz, cfg.cpu_cap_hz)
    p_lo, p_hi = grid.p_range or (grid.p_low_fraction * device.max_power_w, device.max_power_w)
    if f_hi > cfg.cpu_cap_hz * (1.0 + 1e-12) or p_hi > device.max_power_w * (1.0 + 1e-12):
        raise DomainError("grid ranges exceed the device box")
    return (
        _axis(f_lo, f_hi, grid.points_per_axis, grid.f_spacing),
        _axis(p_lo, p_hi, grid.points_per_axis, grid.p_spacing),
    )


class OracleResult(NamedTuple):
    value: float
    argmin: Any  # (f, p) for single searches, Allocation for products
    cell_slack: float  # largest change of the objective to a neighbouring grid point


# ============================================================================
# Independent ideal points
# ============================================================================

@dataclass(frozen=True)
class OracleIdeal:
    t_min_s: float
    e_min_j: float
    argmin_e: tuple[float, float]


def oracle_ideal(device: Device, cfg: NetworkConfig, points: int = 20_001) -> OracleIdeal:
    """
    Ideal point by dense 1-D searches.

    Energy separates as a(f) + b(p), so the f and p minimizations are done
    one after the other; the stationary point (P_on / (2 lambda))^(1/3) of
    a(f) is added to the f axis.
    """
    f0, pbar = cfg.cpu_cap_hz, device.max_power_w
    f_axis = np.linspace(1e-6 * f0, f0, points)
    p_on = effective_idle_power(device, cfg)
    if p_on > 0:
        f_star = np.clip((p_on / (2.0 * cfg.cpu_energy_lambda)) ** (1.0 / 3.0), f_axis[0], f0)
        f_axis = np.sort(np.append(f_axis, f_star))
    p_axis = np.geomspace(1e-9 * pbar, pbar, points)

    f_best = float(f_axis[np.argmin(energy(device, f_axis, pbar, cfg)[3])])
    e_p = energy(device, f_best, p_axis, cfg)[3]
    p_best = float(p_axis[np.argmin(e_p)])
    return OracleIdeal(
        t_min_s=float(latency(device, f0, pbar, cfg)[2]),
        e_min_j=float(np.min(e_p)),
        argmin_e=(f_best, p_best),
    )


# ============================================================================
# Grid searches
# ============================================================================

def _neighbor_variation(values: np.ndarray, index: tuple[int, ...]) -> float:
    center = values[index]
    worst = 0.0
    for axis in range(values.ndim):
        for step in (-1, 1):
            j = index[axis] + step
            if 0 <= j < values.shape[axis]:
                neighbor = values[index[:axis] + (j,) + index[axis + 1:]]
                if np.isfinite(neighbor):
                    worst = max(worst, abs(float(neighbor) - float(center)))
    return worst


def _tchebyshev_surface(
    device: Device, cfg: NetworkConfig, eta: float, f_axis: np.ndarray, p_axis: np.ndarray, ideal: OracleIdeal
) -> np.ndarray:
    f, p = f_axis[:, None], p_axis[None, :]
    t_total = latency(device, f, p, cfg)[2]
    e_total = energy(device, f, p, cfg)[3]
    return np.maximum(eta * (t_total - ideal.t_min_s), (1.0 - eta) * (e_total - ideal.e_min_j))


def grid_min_single(
    device: Device,
    cfg: NetworkConfig,
    objective: GridObjective,
    grid: GridSpec | None = None,
    ideal: OracleIdeal | None = None,
) -> OracleResult:
    """Exact minimum of the true objective over the (f, p) grid of one device."""
    grid = grid or GridSpec()
    grid.check_size(1)
    f_axis, p_axis = grid_axes(device, cfg, grid)
    f, p = f_axis[:, None], p_axis[None, :]
    if objective.kind is ObjectiveKind.LATENCY:
        values = latency(device, f, p, cfg)[2]
    elif objective.kind is ObjectiveKind.ENERGY:
        values = energy(device, f, p, cfg)[3]
    else:
        values = _tchebyshev_surface(device, cfg, objective.eta, f_axis, p_axis, ideal or oracle_ideal(device, cfg))
    i, j = np.unravel_index(int(np.argmin(values)), values.shape)
    return OracleResult(
        value=float(values[i, j]),
        argmin=(float(f_axis[i]), float(p_axis[j])),
        cell_slack=_neighbor_variation(values, (i, j)),
    )


@timed("grid_min_product")
def grid_min_product(
    devices: Sequence[Device],
    cfg: NetworkConfig,
    eta: float,
    grid: GridSpec | None = None,
    ideals: Sequence[OracleIdeal] | None = None,
) -> OracleResult:
    """
    Minimum of prod(y_k) over the joint grid, keeping only points with
    sum(f_k) <= f0.

    y_k depends on (f_k, p_k) alone, so each device's p is minimized per f
    first; the product is then searched over the K-dimensional f lattice.
    """
    k = len(devices)
    if not 1 <= k <= MAX_ORACLE_DEVICES:
        raise GridSizeError(f"product oracle supports 1..{MAX_ORACLE_DEVICES} devices, got {k}")
    if not 0.0 < eta < 1.0:
        raise DomainError(f"eta must lie in (0, 1), got {eta!r}")
    grid = grid or GridSpec()
    grid.check_size(k)
    ideals = list(ideals) if ideals is not None else [oracle_ideal(d, cfg) for d in devices]

    f_axes, p_axes, best_y, best_p_idx, surfaces = [], [], [], [], []
    for device, ideal in zip(devices, ideals):
        f_axis, p_axis = grid_axes(device, cfg, grid)
        surface = _tchebyshev_surface(device, cfg, eta, f_axis, p_axis, ideal)
        f_axes.append(f_axis)
        p_axes.append(p_axis)
        surfaces.append(surface)
        best_p_idx.append(np.argmin(surface, axis=1))
        best_y.append(np.min(surface, axis=1))

    product = np.ones((grid.points_per_axis,) * k)
    total_f = np.zeros_like(product)
    for i in range(k):
        shape = [1] * k
        shape[i] = grid.points_per_axis
        product = product * best_y[i].reshape(shape)
        total_f = total_f + f_axes[i].reshape(shape)
    feasible = total_f <= cfg.cpu_cap_hz * (1.0 + 1e-12)
    if not np.any(feasible):
        raise DomainError("no grid point satisfies the CPU capacity")
    masked = np.where(feasible, product, np.inf)
    index = np.unravel_index(int(np.argmin(masked)), masked.shape)

    freqs = np.array([f_axes[i][index[i]] for i in range(k)])
    powers = np.array([p_axes[i][best_p_idx[i][index[i]]] for i in range(k)])
    total = float(freqs.sum())
    if total > cfg.cpu_cap_hz:
        freqs = freqs * (cfg.cpu_cap_hz / total)

    ys = np.array([best_y[i][index[i]] for i in range(k)])
    p_slack = 0.0
    for i in range(k):
        others = float(np.prod(np.delete(ys, i)))
        p_slack += _neighbor_variation(surfaces[i], (int(index[i]), int(best_p_idx[i][index[i]]))) * others
    slack = max(_neighbor_variation(masked, tuple(int(j) for j in index)), p_slack)

    logger.debug(
        "Product grid search done",
        extra={"extra": {"devices": k, "points": grid.points_per_axis, "eta": eta, "feasible": int(feasible.sum())}},
    )
    return OracleResult(value=float(masked[index]), argmin=Allocation(freqs, powers), cell_slack=slack)


def product_objective(
    devices: Sequence[Device],
    cfg: NetworkConfig,
    eta: float,
    allocation: Allocation,
    ideals: Sequence[OracleIdeal],
) -> float:
    """prod(y_k) of an allocation under the given ideal points (true objectives)."""
    value = 1.0
    for i, (device, ideal) in enumerate(zip(devices, ideals)):
        f, p = allocation.freqs_hz[i], allocation.powers_w[i]
        y = max(
            eta * (latency(device, f, p, cfg)[2] - ideal.t_min_s),
            (1.0 - eta) * (energy(device, f, p, cfg)[3] - ideal.e_min_j),
        )
        value *= y
    return float(value)
