"""Large-scale channel gain and uplink data rate."""

import math
from dataclasses import dataclass

import numpy as np

from .config import NetworkConfig
from .errors import DomainError


@dataclass(frozen=True)
class RatePoint:
    power_w: float
    rate_bps: float


def pathloss_gain(distance_km: float, cfg: NetworkConfig) -> float:
    """Large-scale gain beta / d^alpha, d in km (1 km reference distance)."""
    if not distance_km > 0:
        raise DomainError(f"distance must be positive, got {distance_km!r} km")
    return cfg.pathloss_beta / distance_km**cfg.pathloss_alpha


def snr_slope(gain: float, cfg: NetworkConfig) -> float:
    """SNR per watt of transmit power, l / (B N0)."""
    return gain / (cfg.bandwidth_hz * cfg.noise_density_w_per_hz)


def data_rate(power_w, gain: float, cfg: NetworkConfig):
    """Uplink rate B log2(1 + p l / (B N0)) in bit/s; exactly 0 at p = 0.

    Accepts scalars or numpy arrays of powers.
    """
    if np.any(np.asarray(power_w) < 0):
        raise DomainError("transmit power must be nonnegative")
    rate = cfg.bandwidth_hz * np.log1p(snr_slope(gain, cfg) * np.asarray(power_w, dtype=float)) / math.log(2.0)
    return float(rate) if np.ndim(rate) == 0 else rate


def rate_derivatives(power_w: float, gain: float, cfg: NetworkConfig) -> tuple[float, float, float]:
    """(R, dR/dp, d2R/dp2) at a scalar power."""
    a = snr_slope(gain, cfg)
    scale = cfg.bandwidth_hz / math.log(2.0)
    u = 1.0 + a * power_w
    return scale * math.log1p(a * power_w), scale * a / u, -scale * a * a / (u * u)


def rate_point(power_w: float, gain: float, cfg: NetworkConfig) -> RatePoint:
    return RatePoint(power_w=power_w, rate_bps=data_rate(power_w, gain, cfg))
