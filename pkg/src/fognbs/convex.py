"""
Small dense convex solver and the fractional-programming convexification loop.

`solve_convex` is a primal log-barrier interior-point method. Each barrier
stage is centred with damped Newton steps in box-normalised coordinates
z = (x - lower) / (upper - lower), so variables of very different magnitude
(Hz next to W) are handled uniformly. Stages stop once the duality-gap bound
m / t drops below `tol`.

`minimize_fractional` wraps it with the quadratic transform: a ratio A/B in a
problem is replaced by t A^2 + 1/(4 t B^2) (a majorizer, tight at
t = 1/(2AB)), the convex surrogate problem is solved, t is refreshed in closed
form and the loop repeats until both t and the true objective settle.
"""

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .config import SolverSettings
from .errors import (
    DomainError,
    InfeasibleStartError,
    MaxIterationsError,
    NonConvergenceError,
    NonConvexProblemError,
)

logger = logging.getLogger("fognbs.convex")

Vector = np.ndarray


def surrogate_ratio(a, b, t):
    """Quadratic-transform majorizer t a^2 + 1 / (4 t b^2) of a / b."""
    if np.any(np.asarray(a) <= 0) or np.any(np.asarray(b) <= 0) or np.any(np.asarray(t) <= 0):
        raise DomainError("surrogate_ratio needs a, b, t > 0")
    return t * a * a + 1.0 / (4.0 * t * b * b)


def matched_multiplier(a, b):
    """The t at which the surrogate equals a / b."""
    return 1.0 / (2.0 * a * b)


# ============================================================================
# Problem description
# ============================================================================

@dataclass(frozen=True)
class SmoothFunction:
    """A twice-differentiable function; missing derivatives are estimated."""
    value: Callable[[Vector], float]
    gradient: Callable[[Vector], Vector] | None = None
    hessian: Callable[[Vector], np.ndarray] | None = None


def _as_smooth(fn: SmoothFunction | Callable[[Vector], float]) -> SmoothFunction:
    return fn if isinstance(fn, SmoothFunction) else SmoothFunction(fn)


@dataclass(frozen=True)
class ConvexProblem:
    """
    minimize objective(x) s.t. g_i(x) <= 0, lower <= x <= upper.

    Bounds must be finite. Objective and constraints must be convex on the
    box and defined everywhere inside it.
    """
    objective: SmoothFunction
    constraints: Sequence[SmoothFunction]
    lower: Vector
    upper: Vector

    def __post_init__(self) -> None:
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        if lower.shape != upper.shape or lower.ndim != 1:
            raise DomainError("lower and upper must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper)) and np.all(lower < upper)):
            raise DomainError("box bounds must be finite with lower < upper")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "objective", _as_smooth(self.objective))
        object.__setattr__(self, "constraints", tuple(_as_smooth(g) for g in self.constraints))

    @property
    def dimension(self) -> int:
        return self.lower.size

    def is_strictly_feasible(self, x: Vector) -> bool:
        x = np.asarray(x, dtype=float)
        if not (np.all(x > self.lower) and np.all(x < self.upper)):
            return False
        return all(g.value(x) < 0 for g in self.constraints)

    def max_violation(self, x: Vector) -> float:
        x = np.asarray(x, dtype=float)
        box = max(float(np.max(self.lower - x)), float(np.max(x - self.upper)), 0.0)
        cons = max((g.value(x) for g in self.constraints), default=0.0)
        return max(box, cons)

    def check_convexity(self, rng: np.random.Generator, samples: int = 32, rel_tol: float = 1e-9) -> None:
        """Midpoint convexity spot check of every function inside the box."""
        span = self.upper - self.lower
        for index, fn in enumerate((self.objective, *self.constraints)):
            for _ in range(samples):
                a = self.lower + span * rng.uniform(0.01, 0.99, self.dimension)
                b = self.lower + span * rng.uniform(0.01, 0.99, self.dimension)
                fa, fb, fm = fn.value(a), fn.value(b), fn.value(0.5 * (a + b))
                if fm > 0.5 * (fa + fb) + rel_tol * (1.0 + abs(fa) + abs(fb)):
                    name = "objective" if index == 0 else f"constraint {index - 1}"
                    raise NonConvexProblemError(f"{name} fails the midpoint test at {a} / {b}")


# ============================================================================
# Barrier solver
# ============================================================================

class _ScaledFunction:
    """Value, gradient and Hessian of a SmoothFunction in z coordinates."""

    GRAD_STEP = 1e-6
    HESS_STEP = 1e-4

    def __init__(self, fn: SmoothFunction, lower: Vector, span: Vector) -> None:
        self.fn = fn
        self.lower = lower
        self.span = span

    def x(self, z: Vector) -> Vector:
        return self.lower + self.span * z

    def value(self, z: Vector) -> float:
        return float(self.fn.value(self.x(z)))

    def _steps(self, z: Vector, base: float) -> Vector:
        return np.minimum(base, 0.5 * np.minimum(z, 1.0 - z))

    def gradient(self, z: Vector) -> Vector:
        if self.fn.gradient is not None:
            return np.asarray(self.fn.gradient(self.x(z)), dtype=float) * self.span
        h = self._steps(z, self.GRAD_STEP)
        grad = np.empty_like(z)
        for i in range(z.size):
            e = np.zeros_like(z)
            e[i] = h[i]
            grad[i] = (self.value(z + e) - self.value(z - e)) / (2.0 * h[i])
        return grad

    def hessian(self, z: Vector) -> np.ndarray:
        if self.fn.hessian is not None:
            hess = np.asarray(self.fn.hessian(self.x(z)), dtype=float)
            return hess * np.outer(self.span, self.span)
        h = self._steps(z, self.HESS_STEP)
        n = z.size
        hess = np.empty((n, n))
        if self.fn.gradient is not None:
            for j in range(n):
                e = np.zeros_like(z)
                e[j] = h[j]
                hess[:, j] = (self.gradient(z + e) - self.gradient(z - e)) / (2.0 * h[j])
            return 0.5 * (hess + hess.T)
        f0 = self.value(z)
        for i in range(n):
            ei = np.zeros_like(z)
            ei[i] = h[i]
            hess[i, i] = (self.value(z + ei) - 2.0 * f0 + self.value(z - ei)) / h[i] ** 2
            for j in range(i):
                ej = np.zeros_like(z)
                ej[j] = h[j]
                hess[i, j] = hess[j, i] = (
                    self.value(z + ei + ej) - self.value(z + ei - ej)
                    - self.value(z - ei + ej) + self.value(z - ei - ej)
                ) / (4.0 * h[i] * h[j])
        return hess


class BarrierSolver:
    """
    Log-barrier interior-point solver with damped Newton centering.

    One instance holds the iteration state of one solve; do not share an
    instance between threads. Problems themselves are shareable.
    """

    ARMIJO = 0.25
    BACKTRACK = 0.5
    CENTERING_TOL = 1e-12  # half squared Newton decrement
    MIN_STEP = 1e-16

    def __init__(self, problem: ConvexProblem, settings: SolverSettings | None = None) -> None:
        self.problem = problem
        self.settings = settings or SolverSettings()
        span = problem.upper - problem.lower
        self._objective = _ScaledFunction(problem.objective, problem.lower, span)
        self._constraints = [_ScaledFunction(g, problem.lower, span) for g in problem.constraints]
        self._span = span
        self.iterations = 0
        self.t = 0.0
        self.z = np.zeros(problem.dimension)

    @property
    def x(self) -> Vector:
        return self.problem.lower + self._span * self.z

    @property
    def barrier_count(self) -> int:
        return len(self._constraints) + 2 * self.problem.dimension

    def _barrier_value(self, z: Vector, t: float) -> float:
        if np.any(z <= 0.0) or np.any(z >= 1.0):
            return math.inf
        total = t * self._objective.value(z) - float(np.sum(np.log(z)) + np.sum(np.log1p(-z)))
        for g in self._constraints:
            gz = g.value(z)
            if not gz < 0.0:
                return math.inf
            total -= math.log(-gz)
        return total

    def _barrier_derivatives(self, z: Vector, t: float) -> tuple[Vector, np.ndarray]:
        grad = t * self._objective.gradient(z) - 1.0 / z + 1.0 / (1.0 - z)
        hess = t * self._objective.hessian(z) + np.diag(1.0 / z**2 + 1.0 / (1.0 - z) ** 2)
        for g in self._constraints:
            gz = g.value(z)
            dg = g.gradient(z)
            grad += dg / -gz
            hess += np.outer(dg, dg) / gz**2 + g.hessian(z) / -gz
        return grad, hess

    @staticmethod
    def _newton_direction(grad: Vector, hess: np.ndarray) -> Vector:
        hess = 0.5 * (hess + hess.T)
        shift = 0.0
        scale = max(float(np.max(np.abs(np.diag(hess)))), 1e-300)
        for _ in range(60):
            try:
                chol = np.linalg.cholesky(hess + shift * np.eye(grad.size))
                break
            except np.linalg.LinAlgError:
                shift = max(2.0 * shift, 1e-12 * scale)
        else:
            return -grad
        return -np.linalg.solve(chol.T, np.linalg.solve(chol, grad))

    def _max_box_step(self, z: Vector, dz: Vector) -> float:
        step = 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            to_lower = np.where(dz < 0, -z / dz, np.inf)
            to_upper = np.where(dz > 0, (1.0 - z) / dz, np.inf)
        limit = float(min(np.min(to_lower), np.min(to_upper)))
        if limit <= step:
            step = 0.99 * limit
        return step

    def _center(self, t: float) -> None:
        while True:
            if self.iterations >= self.settings.max_inner_iterations:
                raise MaxIterationsError(
                    f"barrier solver exceeded {self.settings.max_inner_iterations} Newton steps",
                    best=self.x,
                )
            self.iterations += 1
            grad, hess = self._barrier_derivatives(self.z, t)
            dz = self._newton_direction(grad, hess)
            slope = float(grad @ dz)
            if slope >= 0.0:
                dz, slope = -grad, -float(grad @ grad)
            current = self._barrier_value(self.z, t)
            # decrement is compared against the barrier scale, which grows with t
            if -slope / 2.0 <= self.CENTERING_TOL * max(1.0, abs(current)):
                return
            step = self._max_box_step(self.z, dz)
            while step > self.MIN_STEP:
                candidate = self.z + step * dz
                if self._barrier_value(candidate, t) <= current + self.ARMIJO * step * slope:
                    break
                step *= self.BACKTRACK
            else:
                return  # no further decrease representable at this precision
            self.z = self.z + step * dz

    def solve(self, x0: Vector, tol: float | None = None) -> Vector:
        tol = self.settings.tol if tol is None else tol
        x0 = np.asarray(x0, dtype=float)
        if x0.shape != self.problem.lower.shape:
            raise InfeasibleStartError(f"start has shape {x0.shape}, expected {self.problem.lower.shape}")
        if not self.problem.is_strictly_feasible(x0):
            raise InfeasibleStartError(
                f"start is not strictly feasible (violation {self.problem.max_violation(x0):.3g})",
                best=x0,
            )
        if self.settings.check_convexity:
            self.problem.check_convexity(np.random.default_rng(0))

        self.z = (x0 - self.problem.lower) / self._span
        m = self.barrier_count
        f0 = abs(self._objective.value(self.z))
        t = min(max(m / max(f0, 1e-12), 1e-3), 1e6)
        while True:
            self._center(t)
            self.t = t
            if m / t <= tol:
                break
            t *= self.settings.barrier_growth
        logger.debug(
            "Barrier solve done: n=%d m=%d newton_steps=%d objective=%.12g",
            self.problem.dimension, m, self.iterations, self._objective.value(self.z),
        )
        return self.x


def solve_convex(
    problem: ConvexProblem,
    x0: Vector,
    tol: float | None = None,
    settings: SolverSettings | None = None,
) -> Vector:
    """
    Minimize a convex problem from a strictly feasible start.

    Raises InfeasibleStartError or MaxIterationsError (carrying the last
    feasible iterate in `best`).
    """
    return BarrierSolver(problem, settings).solve(x0, tol)


# ============================================================================
# Fractional programming (quadratic transform)
# ============================================================================

@dataclass(frozen=True)
class FractionalProblem:
    """
    A problem with ratio terms A_k(x)/B_k(x) convexified by the quadratic transform.

    `build(t)` returns the convex surrogate problem for multipliers `t`
    (one per ratio), `ratio_terms(x)` returns (A(x), B(x)) as arrays, and
    `true_objective(x)` evaluates the objective without any surrogate.
    `prepare_start(x, t)` may nudge a previous iterate into the strict
    interior of the new surrogate problem.
    """
    build: Callable[[Vector], ConvexProblem]
    ratio_terms: Callable[[Vector], tuple[Vector, Vector]]
    true_objective: Callable[[Vector], float]
    prepare_start: Callable[[Vector, Vector], Vector] | None = None


@dataclass
class FractionalState:
    """Iteration state of the fractional loop."""
    t: Vector
    q: int = 0
    objective_trace: list[float] = field(default_factory=list)
    t_trace: list[float] = field(default_factory=list)  # mean multiplier per iteration
    converged: bool = False


class FractionalSolver:
    """
    Alternates surrogate solves with the closed-form multiplier update.

    After each surrogate solve the step is pushed further along its own
    direction (doubling the length) while the true objective keeps falling
    and the point stays strictly feasible.
    """

    DESCENT_SLACK = 1e-9
    EXTRAPOLATION_DOUBLINGS = 40

    def __init__(self, problem: FractionalProblem, settings: SolverSettings | None = None) -> None:
        self.problem = problem
        self.settings = settings or SolverSettings()
        self.state: FractionalState | None = None

    def _multipliers(self, x: Vector) -> Vector:
        a, b = self.problem.ratio_terms(x)
        return matched_multiplier(np.atleast_1d(np.asarray(a, dtype=float)), np.atleast_1d(np.asarray(b, dtype=float)))

    def _start(self, x: Vector, t: Vector) -> Vector:
        return x if self.problem.prepare_start is None else self.problem.prepare_start(x, t)

    def _usable(self, x: Vector, box: ConvexProblem) -> tuple[float, Vector] | None:
        """True objective and multipliers at x, or None if x cannot seed the next solve."""
        if not (np.all(x > box.lower) and np.all(x < box.upper)):
            return None
        with np.errstate(all="ignore"):
            value = float(self.problem.true_objective(x))
            t = self._multipliers(x)
        if not (math.isfinite(value) and np.all(np.isfinite(t)) and np.all(t > 0)):
            return None
        if not self.problem.build(t).is_strictly_feasible(self._start(x, t)):
            return None
        return value, t

    def _extrapolate(self, origin: Vector, x: Vector, value: float, t: Vector, box: ConvexProblem):
        direction = x - origin
        omega = 2.0
        for _ in range(self.EXTRAPOLATION_DOUBLINGS):
            trial = origin + omega * direction
            if self.problem.prepare_start is not None:
                trial = self.problem.prepare_start(trial, t)
            usable = self._usable(trial, box)
            if usable is None or usable[0] >= value:
                break
            x, (value, t) = trial, usable
            omega *= 2.0
        return x, value, t

    def run(self, x0: Vector, tol_t: float | None = None) -> tuple[Vector, Vector]:
        tol_t = self.settings.tol_t if tol_t is None else tol_t
        x = np.asarray(x0, dtype=float)
        state = FractionalState(t=self._multipliers(x))
        state.objective_trace.append(float(self.problem.true_objective(x)))
        state.t_trace.append(float(np.mean(state.t)))
        self.state = state

        while state.q < self.settings.max_outer_iterations:
            state.q += 1
            surrogate = self.problem.build(state.t)
            candidate = solve_convex(surrogate, self._start(x, state.t), settings=self.settings)
            value = float(self.problem.true_objective(candidate))
            previous = state.objective_trace[-1]
            slack = self.DESCENT_SLACK * max(1.0, abs(previous))
            if value > previous + slack:
                # The surrogate is tight at x, so a rise is inner-solver noise.
                logger.debug("Fractional loop stopped on non-descent at q=%d", state.q)
                state.converged = True
                return x, state.t
            t_new = self._multipliers(candidate)
            candidate, value, t_new = self._extrapolate(x, candidate, value, t_new, surrogate)
            x = candidate
            state.objective_trace.append(value)
            change = float(np.max(np.abs(t_new - state.t) / state.t))
            state.t = t_new
            state.t_trace.append(float(np.mean(t_new)))
            if change <= tol_t and previous - value <= tol_t * abs(previous):
                state.converged = True
                return x, state.t
        raise NonConvergenceError(
            f"multipliers did not settle within {self.settings.max_outer_iterations} outer iterations",
            best=(x, state.t),
        )


def minimize_fractional(
    problem: FractionalProblem,
    x0: Vector,
    tol_t: float | None = None,
    settings: SolverSettings | None = None,
) -> tuple[Vector, Vector]:
    """Run the convexification loop from a feasible x0; returns (x*, t*)."""
    return FractionalSolver(problem, settings).run(x0, tol_t)
