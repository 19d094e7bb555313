"""
Per-device ideal points and the Tchebyshev epigraph problem.

For weight eta the device solves

    min y  s.t.  eta (T(f, p) - T_min) <= y,
                 (1 - eta) (E(f, p; t) - E_min) <= y,
                 f_min <= f <= f_budget, p_min <= p <= pbar,

with the transmit-energy ratio p/R convexified by the quadratic transform.
`TchebyshevEpigraph` builds that problem for any number of devices with a
weighted objective sum(mu_k y_k) and, for K > 1, the shared CPU constraint
sum(f_k) <= f0; the bargaining game reuses it for its coupled step.
"""

import logging
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .config import NetworkConfig, SolverSettings
from .convex import (
    ConvexProblem,
    FractionalProblem,
    FractionalSolver,
    SmoothFunction,
    matched_multiplier,
)
from .errors import DomainError
from .metrics import DeviceTerms, effective_idle_power, latency
from .radio import data_rate
from .records import ParetoPoint
from .scenario import Device
from .timing import timed

logger = logging.getLogger("fognbs.device_opt")


@dataclass(frozen=True)
class IdealPoint:
    """Per-objective minima of one device."""
    t_min_s: float
    e_min_j: float
    argmin_e: tuple[float, float]  # (f, p) achieving e_min
    f_clamped: bool = False  # f pinned to f_min (no f-decreasing energy term)
    objective_trace: tuple[float, ...] = field(default=(), compare=False, repr=False)


@dataclass(frozen=True)
class TchebyshevSetting:
    eta: float

    def __post_init__(self) -> None:
        if not 0.0 < self.eta < 1.0:
            raise DomainError(f"eta must lie in the open interval (0, 1), got {self.eta!r}")


@dataclass(frozen=True)
class DeviceState:
    """Allocation and epigraph slack of one device."""
    f_hz: float
    p_w: float
    y: float


def power_floor(device: Device, settings: SolverSettings) -> float:
    return device.max_power_w * settings.p_min_fraction


def freq_floor(cfg: NetworkConfig, settings: SolverSettings) -> float:
    return cfg.cpu_cap_hz * settings.f_min_fraction


# ============================================================================
# Ideal Points
# ============================================================================

def ideal_latency(device: Device, cfg: NetworkConfig, f_budget_hz: float | None = None) -> float:
    """Minimum latency, reached at full CPU budget and full transmit power."""
    f = cfg.cpu_cap_hz if f_budget_hz is None else f_budget_hz
    return latency(device, f, device.max_power_w, cfg)[2]


def _clip_interior(values: np.ndarray, lower: np.ndarray, upper: np.ndarray, margin: float) -> np.ndarray:
    span = upper - lower
    return np.clip(values, lower + margin * span, upper - margin * span)


@timed("ideal_energy")
def ideal_energy(
    device: Device,
    cfg: NetworkConfig,
    settings: SolverSettings | None = None,
    f_budget_hz: float | None = None,
) -> IdealPoint:
    """
    Minimum energy over the (f, p) box via the fractional loop.

    With no idle power the energy has no term decreasing in f, so the
    infimum sits at f -> 0; f is then pinned to f_min and flagged.
    """
    settings = settings or SolverSettings()
    terms = DeviceTerms(device, cfg)
    f_cap = cfg.cpu_cap_hz if f_budget_hz is None else f_budget_hz
    lower = np.array([freq_floor(cfg, settings), power_floor(device, settings)])
    upper = np.array([f_cap, device.max_power_w])

    def build(t: np.ndarray) -> ConvexProblem:
        tk = float(t[0])

        def value(x):
            return terms.energy_f(x[0])[0] + terms.energy_p(x[1], tk)[0]

        def gradient(x):
            return np.array([terms.energy_f(x[0])[1], terms.energy_p(x[1], tk)[1]])

        def hessian(x):
            return np.diag([terms.energy_f(x[0])[2], terms.energy_p(x[1], tk)[2]])

        return ConvexProblem(SmoothFunction(value, gradient, hessian), (), lower, upper)

    problem = FractionalProblem(
        build=build,
        ratio_terms=lambda x: (np.array([x[1]]), np.array([terms.rate(x[1])[0]])),
        true_objective=lambda x: terms.total_energy(x[0], x[1]),
    )
    x0 = _clip_interior(0.5 * (lower + upper), lower, upper, 1e-6)
    solver = FractionalSolver(problem, settings)
    x, _ = solver.run(x0)

    f_opt, p_opt = float(x[0]), float(x[1])
    clamped = effective_idle_power(device, cfg) == 0.0
    if clamped:
        f_opt = float(lower[0])
        logger.warning(
            "No idle power: energy-optimal CPU frequency pinned to f_min=%.3g Hz",
            f_opt,
            extra={"extra": {"distance_km": device.distance_km}},
        )
    return IdealPoint(
        t_min_s=ideal_latency(device, cfg, f_cap),
        e_min_j=terms.total_energy(f_opt, p_opt),
        argmin_e=(f_opt, p_opt),
        f_clamped=clamped,
        objective_trace=tuple(solver.state.objective_trace),
    )


# ============================================================================
# Epigraph Problem
# ============================================================================

class TchebyshevEpigraph:
    """
    The convexified epigraph problem over x = [f_1..f_K, p_1..p_K, y_1..y_K].

    Minimizes sum(mu_k y_k); every device carries its own latency and
    energy constraint and its own quadratic-transform multiplier t_k.
    """

    START_MARGIN = 1e-6
    WARM_MARGIN = 1e-12

    def __init__(
        self,
        devices: Sequence[Device],
        cfg: NetworkConfig,
        eta: float,
        ideals: Sequence[IdealPoint],
        mu: Sequence[float] | None = None,
        f_cap_hz: float | None = None,
        settings: SolverSettings | None = None,
    ) -> None:
        TchebyshevSetting(eta)
        self.devices = list(devices)
        self.cfg = cfg
        self.eta = eta
        self.ideals = list(ideals)
        self.k = len(self.devices)
        self.mu = np.ones(self.k) if mu is None else np.asarray(mu, dtype=float)
        self.f_cap = cfg.cpu_cap_hz if f_cap_hz is None else f_cap_hz
        self.settings = settings or SolverSettings()
        self.terms = [DeviceTerms(d, cfg) for d in self.devices]
        self.t_min = np.array([ip.t_min_s for ip in self.ideals])
        self.e_min = np.array([ip.e_min_j for ip in self.ideals])
        self.coupled = self.k > 1
        self.y_cap = np.full(self.k, np.inf)

        k = self.k
        self._f = slice(0, k)
        self._p = slice(k, 2 * k)
        self._y = slice(2 * k, 3 * k)
        self.lower = np.concatenate([
            np.full(k, freq_floor(cfg, self.settings)),
            [power_floor(d, self.settings) for d in self.devices],
            np.zeros(k),
        ])

    # -- evaluation --------------------------------------------------------

    def split(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return x[self._f], x[self._p], x[self._y]

    def deviations(self, f: np.ndarray, p: np.ndarray, t: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Weighted latency and energy excesses over the ideal point."""
        dt = np.empty(self.k)
        de = np.empty(self.k)
        for i, terms in enumerate(self.terms):
            tk = None if t is None else float(t[i])
            dt[i] = self.eta * (terms.total_latency(f[i], p[i]) - self.t_min[i])
            de[i] = (1.0 - self.eta) * (terms.total_energy(f[i], p[i], tk) - self.e_min[i])
        return dt, de

    def true_y(self, x: np.ndarray) -> np.ndarray:
        f, p, _ = self.split(x)
        return np.maximum(*self.deviations(f, p))

    def true_objective(self, x: np.ndarray) -> float:
        return float(self.mu @ self.true_y(x))

    def rates(self, p: np.ndarray) -> np.ndarray:
        return np.array([data_rate(p[i], d.gain, self.cfg) for i, d in enumerate(self.devices)])

    def ratio_terms(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        p = x[self._p]
        return p, self.rates(p)

    # -- problem construction -----------------------------------------------

    def upper(self) -> np.ndarray:
        return np.concatenate([
            np.full(self.k, self.f_cap),
            [d.max_power_w for d in self.devices],
            self.y_cap,
        ])

    def _latency_constraint(self, i: int) -> SmoothFunction:
        n = 3 * self.k
        fi, pi, yi = i, self.k + i, 2 * self.k + i
        terms, eta, t_min = self.terms[i], self.eta, self.t_min[i]

        def value(x):
            return eta * (terms.exec_time(x[fi])[0] + terms.tx_time(x[pi])[0] - t_min) - x[yi]

        def gradient(x):
            g = np.zeros(n)
            g[fi] = eta * terms.exec_time(x[fi])[1]
            g[pi] = eta * terms.tx_time(x[pi])[1]
            g[yi] = -1.0
            return g

        def hessian(x):
            h = np.zeros((n, n))
            h[fi, fi] = eta * terms.exec_time(x[fi])[2]
            h[pi, pi] = eta * terms.tx_time(x[pi])[2]
            return h

        return SmoothFunction(value, gradient, hessian)

    def _energy_constraint(self, i: int, t: float) -> SmoothFunction:
        n = 3 * self.k
        fi, pi, yi = i, self.k + i, 2 * self.k + i
        terms, w, e_min = self.terms[i], 1.0 - self.eta, self.e_min[i]

        def value(x):
            return w * (terms.energy_f(x[fi])[0] + terms.energy_p(x[pi], t)[0] - e_min) - x[yi]

        def gradient(x):
            g = np.zeros(n)
            g[fi] = w * terms.energy_f(x[fi])[1]
            g[pi] = w * terms.energy_p(x[pi], t)[1]
            g[yi] = -1.0
            return g

        def hessian(x):
            h = np.zeros((n, n))
            h[fi, fi] = w * terms.energy_f(x[fi])[2]
            h[pi, pi] = w * terms.energy_p(x[pi], t)[2]
            return h

        return SmoothFunction(value, gradient, hessian)

    def _cpu_constraint(self) -> SmoothFunction:
        n = 3 * self.k
        grad = np.zeros(n)
        grad[self._f] = 1.0 / self.cfg.cpu_cap_hz
        return SmoothFunction(
            value=lambda x: float(np.sum(x[self._f])) / self.cfg.cpu_cap_hz - 1.0,
            gradient=lambda x: grad,
            hessian=lambda x: np.zeros((n, n)),
        )

    def build(self, t: np.ndarray) -> ConvexProblem:
        n = 3 * self.k
        weights = np.zeros(n)
        weights[self._y] = self.mu
        objective = SmoothFunction(
            value=lambda x: float(weights @ x),
            gradient=lambda x: weights,
            hessian=lambda x: np.zeros((n, n)),
        )
        constraints = []
        for i in range(self.k):
            constraints.append(self._latency_constraint(i))
            constraints.append(self._energy_constraint(i, float(t[i])))
        if self.coupled:
            constraints.append(self._cpu_constraint())
        return ConvexProblem(objective, constraints, self.lower, self.upper())

    # -- starting points ----------------------------------------------------

    def _interior_allocation(self, f: np.ndarray, p: np.ndarray, margin: float) -> tuple[np.ndarray, np.ndarray]:
        upper = self.upper()
        f = _clip_interior(np.asarray(f, dtype=float), self.lower[self._f], upper[self._f], margin)
        p = _clip_interior(np.asarray(p, dtype=float), self.lower[self._p], upper[self._p], margin)
        if self.coupled:
            limit = self.cfg.cpu_cap_hz * (1.0 - margin)
            total = float(np.sum(f))
            if total >= limit:
                f = np.maximum(f * (limit / total), self.lower[self._f] * (1.0 + margin))
        return f, p

    def _lift_y(self, f: np.ndarray, p: np.ndarray, t: np.ndarray, y: np.ndarray | None) -> np.ndarray:
        needed = np.maximum(np.maximum(*self.deviations(f, p, t)), 0.0)
        lifted = needed * (1.0 + self.START_MARGIN) + 1e-12
        return lifted if y is None else np.maximum(y, lifted)

    def start(self, f: np.ndarray, p: np.ndarray) -> np.ndarray:
        """Strictly feasible start from an allocation; fixes the y caps."""
        f, p = self._interior_allocation(f, p, self.START_MARGIN)
        t = matched_multiplier(p, self.rates(p))
        y = self._lift_y(f, p, t, None)
        # sum(mu y) never rises above its start, so mu_k y_k <= sum(mu y0)
        self.y_cap = 2.0 * float(self.mu @ y) / self.mu + 1e-9
        return np.concatenate([f, p, y])

    def prepare_start(self, x: np.ndarray, t: np.ndarray) -> np.ndarray:
        f, p, y = self.split(x)
        f, p = self._interior_allocation(f, p, self.WARM_MARGIN)
        return np.concatenate([f, p, self._lift_y(f, p, t, y)])

    def solve(self, f0: np.ndarray, p0: np.ndarray) -> tuple[np.ndarray, FractionalSolver]:
        """Run the fractional loop from an allocation; returns (x*, solver)."""
        x0 = self.start(f0, p0)
        solver = FractionalSolver(
            FractionalProblem(
                build=self.build,
                ratio_terms=self.ratio_terms,
                true_objective=self.true_objective,
                prepare_start=self.prepare_start,
            ),
            self.settings,
        )
        x, _ = solver.run(x0)
        return x, solver


# ============================================================================
# Single-device Tchebyshev problem and Pareto sweep
# ============================================================================

def solve_tchebyshev_single(
    device: Device,
    eta: float,
    f_budget_hz: float,
    cfg: NetworkConfig,
    settings: SolverSettings | None = None,
    ideal: IdealPoint | None = None,
    start: tuple[float, float] | None = None,
) -> DeviceState:
    """Tchebyshev point of one device with a CPU budget (use f0 when alone)."""
    if f_budget_hz > cfg.cpu_cap_hz * (1.0 + 1e-12):
        raise DomainError(f"f_budget {f_budget_hz:.6g} Hz exceeds the CPU cap {cfg.cpu_cap_hz:.6g} Hz")
    settings = settings or SolverSettings()
    ideal = ideal or ideal_energy(device, cfg, settings, f_budget_hz)
    epigraph = TchebyshevEpigraph([device], cfg, eta, [ideal], f_cap_hz=f_budget_hz, settings=settings)
    f0, p0 = start or (0.5 * f_budget_hz, 0.5 * device.max_power_w)
    x, _ = epigraph.solve(np.array([f0]), np.array([p0]))
    return DeviceState(f_hz=float(x[0]), p_w=float(x[1]), y=float(epigraph.true_y(x)[0]))


def pareto_boundary(
    device: Device,
    cfg: NetworkConfig,
    etas: Iterable[float],
    settings: SolverSettings | None = None,
) -> list[ParetoPoint]:
    """Tchebyshev points of one device (f budget f0), warm-started along eta."""
    settings = settings or SolverSettings()
    ideal = ideal_energy(device, cfg, settings)
    points = []
    start = None
    for eta in etas:
        state = solve_tchebyshev_single(device, eta, cfg.cpu_cap_hz, cfg, settings, ideal, start)
        t_total = latency(device, state.f_hz, state.p_w, cfg)[2]
        e_total = DeviceTerms(device, cfg).total_energy(state.f_hz, state.p_w)
        points.append(ParetoPoint(eta, t_total, e_total, state.f_hz, state.p_w, state.y))
        start = (state.f_hz, state.p_w)
    return points


def eta_grid(size: int, low: float = 0.001) -> np.ndarray:
    """
    `size` weights in [low, 1 - low], log-spaced toward both ends and
    symmetric about 1/2 (eta and 1 - eta both present).
    """
    if size < 2:
        raise DomainError("eta grid needs at least 2 points")
    u = np.linspace(-1.0, 1.0, size)
    base = 2.0 * low
    return np.where(u < 0, 0.5 * base ** np.abs(u), 1.0 - 0.5 * base ** np.abs(u))

