"""
Result rows written by the experiment commands.

Field order is the CSV column order; a trailing underscore is dropped from
the column name (`lambda_` is written as `lambda`).
"""

from dataclasses import dataclass


@dataclass(frozen=True)
class ParetoPoint:
    """One Tchebyshev point of a single device."""
    eta: float
    T_s: float
    E_J: float
    f_hz: float
    p_w: float
    y: float


@dataclass(frozen=True)
class ParetoRow:
    """Run- and device-averaged bargaining outcome at one weight."""
    eta: float
    T_s: float
    E_J: float
    f_hz: float
    p_w: float
    y: float
    E_tx_J: float
    E_ex_J: float
    E_on_J: float
    lambda_: float
    model: str


@dataclass(frozen=True)
class EquilibriumRow:
    """Per-device equilibrium; k = -1 marks the run summary row."""
    run: int
    eta: float
    k: int
    f_hz: float
    p_w: float
    y: float
    T_s: float
    E_J: float
    E_tx_J: float
    E_ex_J: float
    E_on_J: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class SweepRow:
    """Equilibrium and equal-share baseline averages at one CPU capacity."""
    fmax_hz: float
    eta: float
    T_eq_s: float
    E_eq_J: float
    T_base_s: float
    E_base_J: float
    f_used_fraction: float


@dataclass(frozen=True)
class BaselineRow:
    run: int
    k: int
    f_hz: float
    p_w: float
    T_s: float
    E_J: float
    E_tx_J: float
    E_ex_J: float
    E_on_J: float


@dataclass(frozen=True)
class TraceRow:
    """One fractional-loop iteration inside one bargaining iteration."""
    run: int
    eta: float
    bcd_iteration: int
    iteration: int
    objective: float
    t: float


@dataclass(frozen=True)
class VerifyRow:
    check: str
    device: int
    solver_value: float
    oracle_value: float
    slack: float
    passed: bool
