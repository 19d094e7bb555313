"""
Device circuit-power models and fog CPU cycle energy.

Coefficients are data so the practical and unrealistic models are a switch.
All boundaries are SI; mW and Mbit/s appear only inside the baseband formula.
"""

from dataclasses import dataclass

from .config import NetworkConfig, PowerModel


@dataclass(frozen=True)
class CircuitPowerModel:
    """Connected-mode, baseband and RF power coefficients."""
    p_connected_w: float  # P_c, active transmission chain
    bb_const_mw: float
    bb_slope_mw_per_mbps: float
    rf_const_w: float
    rf_slope: float  # W of RF circuit power per W radiated


PRACTICAL = CircuitPowerModel(
    p_connected_w=1.35,
    bb_const_mw=2110.0,
    bb_slope_mw_per_mbps=0.87,
    rf_const_w=0.6,
    rf_slope=10.1,
)

UNREALISTIC = CircuitPowerModel(
    p_connected_w=0.0,
    bb_const_mw=0.0,
    bb_slope_mw_per_mbps=0.0,
    rf_const_w=0.0,
    rf_slope=0.0,
)


def circuit_model(cfg: NetworkConfig) -> CircuitPowerModel:
    return PRACTICAL if cfg.power_model is PowerModel.PRACTICAL else UNREALISTIC


def baseband_power_w(rate_bps: float, model: CircuitPowerModel) -> float:
    """Baseband power in W; the table form takes Mbit/s and yields mW."""
    return (model.bb_const_mw + model.bb_slope_mw_per_mbps * rate_bps / 1e6) / 1000.0


def rf_power_w(power_w: float, model: CircuitPowerModel) -> float:
    return model.rf_const_w + model.rf_slope * power_w


def cpu_cycle_energy_j(freq_hz: float, lam: float) -> float:
    """Energy per CPU cycle at frequency f, lambda f^2 (J/cycle)."""
    return lam * freq_hz * freq_hz
