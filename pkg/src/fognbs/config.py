"""
Configuration models for the fog-assisted network simulator with full defaults.

Network and scenario values are validated pydantic models (immutable, safe to
share across worker threads). Solver and run behaviour use plain dataclasses
whose defaults can be overridden from the environment or the CLI.
"""

import os
from dataclasses import dataclass
from enum import Enum

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, model_validator


# ============================================================================
# Network Configuration
# ============================================================================

class PowerModel(str, Enum):
    """Device circuit-power model switch."""
    PRACTICAL = "practical"
    UNREALISTIC = "unrealistic"  # P_c = P_RF = P_BB = P_on = 0


class NetworkConfig(BaseModel):
    """Global constants of the single-cell network (SI units, linear scale)."""

    model_config = ConfigDict(frozen=True)

    bandwidth_hz: PositiveFloat  # per-device uplink bandwidth B
    noise_density_w_per_hz: PositiveFloat  # N0
    pathloss_beta: PositiveFloat  # linear, at the 1 km reference distance
    pathloss_alpha: PositiveFloat
    cpu_cap_hz: PositiveFloat  # fog CPU capacity shared by all VMs
    cpu_energy_lambda: PositiveFloat  # J*s^2/cycle^3
    power_model: PowerModel = PowerModel.PRACTICAL
    device_count: PositiveInt = 3


# ============================================================================
# Scenario Configuration
# ============================================================================

class ScenarioSpec(BaseModel):
    """Network plus the random-draw ranges of one experiment."""

    model_config = ConfigDict(frozen=True)

    network: NetworkConfig
    cell_radius_km: PositiveFloat
    task_bits_range: tuple[PositiveFloat, PositiveFloat]
    cycles_range: tuple[PositiveFloat, PositiveFloat]
    idle_power_range: tuple[float, float]
    max_power_w: PositiveFloat = 2.0  # shared by all devices
    seed: int = Field(default=2024, ge=0)
    runs: PositiveInt = 200

    @model_validator(mode="after")
    def _check_ranges(self) -> "ScenarioSpec":
        for name in ("task_bits_range", "cycles_range", "idle_power_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name}: lower bound {lo} exceeds upper bound {hi}")
        if self.idle_power_range[0] < 0:
            raise ValueError("idle_power_range: idle power must be nonnegative")
        return self


# ============================================================================
# Solver Settings
# ============================================================================

@dataclass(frozen=True)
class SolverSettings:
    """Tolerances and iteration caps shared by every solver layer."""

    # Inner convex solver
    tol: float = 1e-8  # barrier duality-gap bound
    max_inner_iterations: int = 10_000  # Newton steps per solve
    barrier_growth: float = 20.0
    check_convexity: bool = False  # midpoint spot checks before each solve

    # Fractional loop
    tol_t: float = 1e-6
    max_outer_iterations: int = 100

    # Bargaining loop
    bcd_threshold: float = 1e-6  # fractional change of sum(mu * y)
    max_bcd_iterations: int = 500
    y_floor: float = 1e-12

    # Variable floors, relative to their caps
    p_min_fraction: float = 1e-9
    f_min_fraction: float = 1e-6


@dataclass
class RunSettings:
    """Experiment execution options."""
    workers: int = 1
    log_level: str = "INFO"
    trace_path: str | None = None


def settings_from_env(env_file: str = ".env.local") -> tuple[SolverSettings, RunSettings]:
    """
    Build solver and run settings from FOGNBS_* environment variables.

    Values in `env_file` are loaded first (missing file is fine) and never
    override variables already present in the process environment.
    """
    load_dotenv(env_file)
    solver = SolverSettings(
        tol=float(os.getenv("FOGNBS_TOL", SolverSettings.tol)),
        check_convexity=os.getenv("FOGNBS_CHECK_CONVEXITY", "0").lower() in ("1", "true", "yes"),
    )
    run = RunSettings(
        workers=int(os.getenv("FOGNBS_WORKERS", "1")),
        log_level=os.getenv("FOGNBS_LOG_LEVEL", "INFO").upper(),
        trace_path=os.getenv("FOGNBS_TRACE") or None,
    )
    return solver, run


# ============================================================================
# Default Scenario (desk-scale experiment)
# ============================================================================

MBYTE_BITS = 8e6


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


def dbm_to_watts(value_dbm: float) -> float:
    return 10.0 ** ((value_dbm - 30.0) / 10.0)


def get_default_scenario() -> ScenarioSpec:
    """
    Scenario used when no file is given: K = 3 devices in a 70 m cell.

    Tasks are 0.1-1.1 MByte with 50-250 cycles/bit; idle power 2-3.5 W.
    """
    return ScenarioSpec(
        network=NetworkConfig(
            bandwidth_hz=0.1e6,
            noise_density_w_per_hz=dbm_to_watts(-174.0),
            pathloss_beta=db_to_linear(-90.0),
            pathloss_alpha=3.5,
            cpu_cap_hz=1.2e9,
            cpu_energy_lambda=1e-27,
            power_model=PowerModel.PRACTICAL,
            device_count=3,
        ),
        cell_radius_km=0.07,
        task_bits_range=(0.1 * MBYTE_BITS, 1.1 * MBYTE_BITS),
        cycles_range=(50.0, 250.0),
        idle_power_range=(2.0, 3.5),
        max_power_w=2.0,
        seed=2024,
        runs=200,
    )
