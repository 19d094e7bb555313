"""Latency/energy trade-off and bargaining allocation for fog-assisted IoT networks."""

from .config import NetworkConfig, PowerModel, ScenarioSpec, SolverSettings, get_default_scenario
from .device_opt import ideal_energy, ideal_latency, solve_tchebyshev_single
from .game import equal_share_baseline, solve_nbs
from .scenario import Device, load_scenario, sample_devices

__all__ = [
    "Device",
    "NetworkConfig",
    "PowerModel",
    "ScenarioSpec",
    "SolverSettings",
    "equal_share_baseline",
    "get_default_scenario",
    "ideal_energy",
    "ideal_latency",
    "load_scenario",
    "sample_devices",
    "solve_nbs",
    "solve_tchebyshev_single",
]
