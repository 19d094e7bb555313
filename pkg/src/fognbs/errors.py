"""
Exception hierarchy for the simulator.

Library code raises these; only the CLI maps them onto process exit codes.
"""

from typing import Any


class FogNbsError(Exception):
    """Base class for every error raised by the package."""


# ============================================================================
# Scenario ingestion
# ============================================================================

class ScenarioParseError(FogNbsError):
    """A scenario file line could not be parsed."""

    def __init__(self, path: str, line_no: int, message: str) -> None:
        self.path = path
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


class ScenarioValidationError(FogNbsError):
    """A scenario value violates a documented invariant."""

    def __init__(self, field: str, message: str) -> None:
        self.field = field
        super().__init__(f"{field}: {message}")


# ============================================================================
# Model evaluation
# ============================================================================

class DomainError(FogNbsError, ValueError):
    """An input lies outside the domain of a model function."""


class DegenerateRateError(FogNbsError):
    """Latency or energy requested at zero data rate."""


# ============================================================================
# Solvers
# ============================================================================

class SolverError(FogNbsError):
    """Base for solver failures; carries the best iterate when one exists."""

    def __init__(self, message: str, best: Any = None) -> None:
        self.best = best
        super().__init__(message)


class InfeasibleStartError(SolverError):
    """The starting point is not strictly feasible."""


class MaxIterationsError(SolverError):
    """Inner iteration budget exhausted before the tolerance was met."""


class NonConvergenceError(SolverError):
    """An outer loop (fractional or bargaining) did not converge."""


class NonConvexProblemError(SolverError):
    """Midpoint convexity spot check failed (debug mode only)."""


class DeviceSolveError(SolverError):
    """A solver failure attributed to one device of a coupled solve."""

    def __init__(self, device_index: int, cause: SolverError) -> None:
        self.device_index = device_index
        self.cause = cause
        super().__init__(f"device {device_index}: {cause}", best=cause.best)


class PartialResultsError(SolverError):
    """A batch stopped on a solver failure; `rows` holds what was finished."""

    def __init__(self, cause: SolverError, rows: list[Any], completed_runs: int) -> None:
        self.cause = cause
        self.rows = rows
        self.completed_runs = completed_runs
        super().__init__(f"{cause} (rows from {completed_runs} completed runs kept)", best=cause.best)


class DegenerateUtilityError(FogNbsError):
    """The bargaining product cannot be formed from the given slacks."""


# ============================================================================
# Oracle / verification
# ============================================================================

class GridSizeError(FogNbsError):
    """Requested oracle grid exceeds the size guard."""


class VerificationFailure(FogNbsError):
    """Solver results disagree with the brute-force oracle."""


class ResultsWriteError(FogNbsError):
    """Writing a results file failed."""

    def __init__(self, path: str, cause: OSError) -> None:
        self.path = path
        super().__init__(f"could not write {path}: {cause}")
