import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fognbs.config import SolverSettings
from fognbs.convex import (
    BarrierSolver,
    ConvexProblem,
    FractionalProblem,
    FractionalSolver,
    SmoothFunction,
    matched_multiplier,
    minimize_fractional,
    solve_convex,
    surrogate_ratio,
)
from fognbs.errors import DomainError, InfeasibleStartError, MaxIterationsError, NonConvexProblemError
from fognbs.metrics import DeviceTerms

positive = st.floats(min_value=1e-6, max_value=1e6, allow_nan=False, allow_infinity=False)


# ============================================================================
# Quadratic transform
# ============================================================================

def test_surrogate_examples():
    assert surrogate_ratio(1.0, 1.0, 1.0) == pytest.approx(1.25)
    assert surrogate_ratio(3.0, 7.0, matched_multiplier(3.0, 7.0)) == pytest.approx(3.0 / 7.0, rel=1e-15)


@given(a=positive, b=positive, t=positive)
@settings(max_examples=500)
def test_surrogate_majorizes_ratio(a, b, t):
    assert surrogate_ratio(a, b, t) >= (a / b) * (1.0 - 1e-12)


@given(a=positive, b=positive)
@settings(max_examples=500)
def test_surrogate_tight_at_matched_multiplier(a, b):
    assert surrogate_ratio(a, b, matched_multiplier(a, b)) == pytest.approx(a / b, rel=1e-12)


def test_surrogate_vectorised_bulk():
    rng = np.random.default_rng(1)
    a, b, t = (10.0 ** rng.uniform(-6, 6, 100_000) for _ in range(3))
    assert np.all(surrogate_ratio(a, b, t) >= (a / b) * (1.0 - 1e-12))
    np.testing.assert_allclose(surrogate_ratio(a, b, matched_multiplier(a, b)), a / b, rtol=1e-12)


@pytest.mark.parametrize(("a", "b", "t"), [(0.0, 1.0, 1.0), (1.0, -1.0, 1.0), (1.0, 1.0, 0.0)])
def test_surrogate_domain(a, b, t):
    with pytest.raises(DomainError):
        surrogate_ratio(a, b, t)


# ============================================================================
# Barrier solver
# ============================================================================

def test_box_quadratic():
    problem = ConvexProblem(lambda x: (x[0] - 3.0) ** 2, [], np.array([0.0]), np.array([10.0]))
    x = solve_convex(problem, np.array([7.0]))
    assert x[0] == pytest.approx(3.0, abs=1e-4)


def test_disk_constrained_linear():
    problem = ConvexProblem(
        SmoothFunction(lambda x: x[0] + x[1], lambda x: np.ones(2), lambda x: np.zeros((2, 2))),
        [SmoothFunction(lambda x: x @ x - 1.0, lambda x: 2.0 * x, lambda x: 2.0 * np.eye(2))],
        np.array([-2.0, -2.0]),
        np.array([2.0, 2.0]),
    )
    x = solve_convex(problem, np.array([0.1, -0.2]))
    np.testing.assert_allclose(x, [-np.sqrt(0.5), -np.sqrt(0.5)], atol=1e-6)


def test_finite_difference_path_agrees_with_analytic():
    def value(x):
        return np.cosh(x[0] - 0.2) + (x[1] - 0.4) ** 2 + 0.3 * x[0] * x[1]

    lower, upper = np.array([-1.0, -1.0]), np.array([1.0, 2.0])
    numeric = solve_convex(ConvexProblem(value, [], lower, upper), np.array([0.0, 0.0]))
    analytic = solve_convex(
        ConvexProblem(
            SmoothFunction(
                value,
                lambda x: np.array([np.sinh(x[0] - 0.2) + 0.3 * x[1], 2.0 * (x[1] - 0.4) + 0.3 * x[0]]),
                lambda x: np.array([[np.cosh(x[0] - 0.2), 0.3], [0.3, 2.0]]),
            ),
            [],
            lower,
            upper,
        ),
        np.array([0.0, 0.0]),
    )
    np.testing.assert_allclose(numeric, analytic, atol=1e-5)


def test_infeasible_start():
    problem = ConvexProblem(lambda x: x[0], [lambda x: x[0] - 0.5], np.array([0.0]), np.array([1.0]))
    with pytest.raises(InfeasibleStartError):
        solve_convex(problem, np.array([0.7]))
    with pytest.raises(InfeasibleStartError):
        solve_convex(problem, np.array([0.0]))


def test_iteration_cap_reports_best():
    problem = ConvexProblem(lambda x: (x[0] - 3.0) ** 2, [], np.array([0.0]), np.array([10.0]))
    with pytest.raises(MaxIterationsError) as info:
        solve_convex(problem, np.array([9.0]), settings=SolverSettings(max_inner_iterations=2))
    assert info.value.best is not None


def test_convexity_check_flags_concave_objective():
    problem = ConvexProblem(lambda x: -(x[0] ** 2), [], np.array([-1.0]), np.array([1.0]))
    with pytest.raises(NonConvexProblemError):
        solve_convex(problem, np.array([0.3]), settings=SolverSettings(check_convexity=True))


def test_barrier_solution_strictly_interior():
    problem = ConvexProblem(lambda x: x[0], [], np.array([1.0]), np.array([2.0]))
    solver = BarrierSolver(problem)
    x = solver.solve(np.array([1.5]))
    assert 1.0 < x[0] < 1.0 + 1e-6
    assert problem.is_strictly_feasible(x)


def test_device_energy_surrogate_matches_grid(near_device, network):
    """Fixed-multiplier surrogate energy over (f, p) against a 200x200 grid."""
    terms = DeviceTerms(near_device, network)
    t = matched_multiplier(0.1, terms.rate(0.1)[0])
    lower, upper = np.array([1.2e7, 1e-3]), np.array([1.2e9, 2.0])
    problem = ConvexProblem(
        SmoothFunction(
            lambda x: terms.energy_f(x[0])[0] + terms.energy_p(x[1], t)[0],
            lambda x: np.array([terms.energy_f(x[0])[1], terms.energy_p(x[1], t)[1]]),
            lambda x: np.diag([terms.energy_f(x[0])[2], terms.energy_p(x[1], t)[2]]),
        ),
        [],
        lower,
        upper,
    )
    x = solve_convex(problem, 0.5 * (lower + upper))
    f_axis = np.linspace(lower[0], upper[0], 200)
    p_axis = np.linspace(lower[1], upper[1], 200)
    grid = np.array([[problem.objective.value(np.array([f, p])) for p in p_axis] for f in f_axis])
    i, j = np.unravel_index(np.argmin(grid), grid.shape)
    assert abs(x[0] - f_axis[i]) <= f_axis[1] - f_axis[0]
    assert abs(x[1] - p_axis[j]) <= p_axis[1] - p_axis[0]
    assert problem.objective.value(x) <= grid[i, j] + 1e-9


# ============================================================================
# Fractional loop
# ============================================================================

def _ratio_problem(terms, coefficient=1.0):
    """min (coefficient * p + 0.05) / R(p) over p, ratio convexified."""

    def build(t):
        tk = float(t[0])

        def value(x):
            r = terms.rate(x[0])[0]
            return coefficient * surrogate_ratio(x[0], r, tk) + 0.05 / r

        return ConvexProblem(value, [], np.array([1e-6]), np.array([2.0]))

    def true_objective(x):
        r = terms.rate(x[0])[0]
        return coefficient * x[0] / r + 0.05 / r

    return FractionalProblem(
        build=build,
        ratio_terms=lambda x: (np.array([x[0]]), np.array([terms.rate(x[0])[0]])),
        true_objective=true_objective,
    ), true_objective


def test_fractional_ratio_matches_line_search(near_device, network):
    terms = DeviceTerms(near_device, network)
    problem, objective = _ratio_problem(terms)
    x, t = minimize_fractional(problem, np.array([1.0]))
    axis = np.linspace(1e-6, 2.0, 10_000)
    values = np.array([objective(np.array([p])) for p in axis])
    best = int(np.argmin(values))
    assert abs(x[0] - axis[best]) <= axis[1] - axis[0]
    assert objective(x) <= values[best] + 1e-12
    # surrogate objective at (x*, t*) equals the true objective
    assert problem.build(t).objective.value(x) == pytest.approx(objective(x), rel=1e-10)


def test_fractional_ratio_free_objective_converges_immediately(near_device, network):
    terms = DeviceTerms(near_device, network)
    problem, _ = _ratio_problem(terms, coefficient=0.0)
    solver = FractionalSolver(problem)
    solver.run(np.array([1.0]))
    assert solver.state.converged
    assert solver.state.q <= 2


def test_fractional_trace_non_increasing(near_device, network):
    terms = DeviceTerms(near_device, network)
    problem, _ = _ratio_problem(terms, coefficient=5.0)
    solver = FractionalSolver(problem)
    solver.run(np.array([1.9]))
    trace = solver.state.objective_trace
    assert all(b <= a + 1e-9 * max(1.0, abs(a)) for a, b in zip(trace, trace[1:]))
    assert len(solver.state.t_trace) == len(trace)


@pytest.mark.parametrize("coefficient", [1.0, 20.0])
def test_fractional_does_not_stop_while_objective_falls(far_device, network, coefficient):
    terms = DeviceTerms(far_device, network)
    problem, objective = _ratio_problem(terms, coefficient)
    solver = FractionalSolver(problem)
    x, _ = solver.run(np.array([1.0]))
    trace = solver.state.objective_trace
    assert trace[-2] - trace[-1] <= 1e-6 * abs(trace[-2])
    axis = np.linspace(1e-6, 2.0, 10_000)
    values = np.array([objective(np.array([p])) for p in axis])
    assert objective(x) <= values.min() * (1 + 1e-6)
