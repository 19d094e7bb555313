"""
Latency and energy of a device under an allocation.

Besides plain evaluation this module exposes the algebraic regrouping of the
transmit energy,

    E_tx(p) = D (K1 + K2 p) / R(p) + c_bb D,

which isolates the only non-convex piece, p / R(p), and the separable
value/derivative terms the solvers are assembled from.
"""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .config import NetworkConfig, PowerModel
from .convex import surrogate_ratio
from .errors import DegenerateRateError, DomainError
from .power import baseband_power_w, circuit_model, cpu_cycle_energy_j, rf_power_w
from .radio import data_rate, rate_derivatives
from .scenario import Device


@dataclass(frozen=True)
class Allocation:
    """Decision variables of all devices."""
    freqs_hz: np.ndarray
    powers_w: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "freqs_hz", np.asarray(self.freqs_hz, dtype=float))
        object.__setattr__(self, "powers_w", np.asarray(self.powers_w, dtype=float))
        if self.freqs_hz.shape != self.powers_w.shape:
            raise DomainError("freqs_hz and powers_w must have the same length")

    def validate(self, devices: Sequence[Device], cfg: NetworkConfig, rel_slack: float = 1e-9) -> None:
        """Raise DomainError unless 0 < p_k <= pbar_k, f_k > 0 and sum f_k <= f0."""
        if len(devices) != len(self.freqs_hz):
            raise DomainError(f"allocation has {len(self.freqs_hz)} entries for {len(devices)} devices")
        caps = np.array([d.max_power_w for d in devices])
        if np.any(self.powers_w <= 0) or np.any(self.powers_w > caps):
            raise DomainError(f"powers {self.powers_w} outside (0, pbar]")
        if np.any(self.freqs_hz <= 0):
            raise DomainError(f"frequencies {self.freqs_hz} must be positive")
        if self.freqs_hz.sum() > cfg.cpu_cap_hz * (1.0 + rel_slack):
            raise DomainError(f"sum of frequencies {self.freqs_hz.sum():.6g} exceeds {cfg.cpu_cap_hz:.6g} Hz")


@dataclass(frozen=True)
class LatencyEnergy:
    """Per-device latency and energy with all sub-terms."""
    t_tx_s: float
    t_ex_s: float
    t_total_s: float
    e_tx_j: float
    e_ex_j: float
    e_on_j: float
    e_total_j: float

    @classmethod
    def evaluate(cls, device: Device, f_hz: float, p_w: float, cfg: NetworkConfig) -> "LatencyEnergy":
        t_tx, t_ex, t_total = latency(device, f_hz, p_w, cfg)
        e_tx, e_ex, e_on, e_total = energy(device, f_hz, p_w, cfg)
        return cls(t_tx, t_ex, t_total, e_tx, e_ex, e_on, e_total)


def effective_idle_power(device: Device, cfg: NetworkConfig) -> float:
    """P_on of the device, forced to zero by the unrealistic model."""
    return 0.0 if cfg.power_model is PowerModel.UNREALISTIC else device.idle_power_w


def _checked_rate(device: Device, p_w, cfg: NetworkConfig):
    rate = data_rate(p_w, device.gain, cfg)
    if np.any(np.asarray(rate) <= 0):
        raise DegenerateRateError(f"data rate is zero at p={p_w!r} W")
    return rate


def latency(device: Device, f_hz, p_w, cfg: NetworkConfig):
    """(t_tx, t_ex, t_total) in seconds; broadcasts over numpy arrays."""
    if np.any(np.asarray(f_hz) <= 0):
        raise DomainError("CPU frequency must be positive")
    t_tx = device.task_bits / _checked_rate(device, p_w, cfg)
    t_ex = device.cycles / np.asarray(f_hz, dtype=float)
    if np.ndim(t_ex) == 0:
        t_ex = float(t_ex)
    return t_tx, t_ex, t_tx + t_ex


def energy(device: Device, f_hz, p_w, cfg: NetworkConfig, t_for_fractional: float | None = None):
    """
    (e_tx, e_ex, e_on, e_total) in joules; broadcasts over numpy arrays.

    With `t_for_fractional` the ratio p/R inside e_tx is replaced by its
    quadratic-transform surrogate, giving the convexified energy E(f, p; t).
    """
    t_tx, _, t_total = latency(device, f_hz, p_w, cfg)
    model = circuit_model(cfg)
    rate = data_rate(p_w, device.gain, cfg)
    if t_for_fractional is None:
        e_tx = (model.p_connected_w + baseband_power_w(rate, model) + rf_power_w(p_w, model) + p_w) * t_tx
    else:
        k1, k2, c_bb = energy_ratio_decomposition(device, cfg)
        ratio = surrogate_ratio(p_w, rate, t_for_fractional)
        e_tx = device.task_bits * (k1 / rate + k2 * ratio + c_bb)
    f = np.asarray(f_hz, dtype=float)
    e_ex = cpu_cycle_energy_j(f, cfg.cpu_energy_lambda) * device.cycles
    if np.ndim(e_ex) == 0:
        e_ex = float(e_ex)
    e_on = effective_idle_power(device, cfg) * t_total
    return e_tx, e_ex, e_on, e_tx + e_ex + e_on


def energy_ratio_decomposition(device: Device, cfg: NetworkConfig) -> tuple[float, float, float]:
    """
    Constants (K1 [W], K2, c_bb [J/bit]) with E_tx = D (K1 + K2 p) / R + c_bb D.

    The baseband slope term becomes per-bit: mW per Mbit/s times D / R.
    """
    model = circuit_model(cfg)
    k1 = model.p_connected_w + model.bb_const_mw / 1000.0 + model.rf_const_w
    k2 = 1.0 + model.rf_slope
    c_bb = model.bb_slope_mw_per_mbps / 1000.0 / 1e6
    return k1, k2, c_bb


# ============================================================================
# Separable terms with derivatives (solver building blocks)
# ============================================================================

@dataclass(frozen=True)
class DeviceTerms:
    """
    Per-device objective pieces as (value, first, second) derivative triples.

    T(f, p)    = tx_time(p) + exec_time(f)
    E(f, p; t) = energy_f(f) + energy_p(p, t)
    """
    device: Device
    cfg: NetworkConfig

    def rate(self, p: float) -> tuple[float, float, float]:
        r, r1, r2 = rate_derivatives(p, self.device.gain, self.cfg)
        if r <= 0:
            raise DegenerateRateError(f"data rate is zero at p={p!r} W")
        return r, r1, r2

    def tx_time(self, p: float) -> tuple[float, float, float]:
        d = self.device.task_bits
        r, r1, r2 = self.rate(p)
        return d / r, -d * r1 / r**2, d * (2.0 * r1 * r1 / r**3 - r2 / r**2)

    def exec_time(self, f: float) -> tuple[float, float, float]:
        cd = self.device.cycles
        return cd / f, -cd / f**2, 2.0 * cd / f**3

    def energy_f(self, f: float) -> tuple[float, float, float]:
        """Fog execution energy plus the idle energy of the execution time."""
        lam_cd = self.cfg.cpu_energy_lambda * self.device.cycles
        p_on = effective_idle_power(self.device, self.cfg)
        v, d1, d2 = self.exec_time(f)
        return lam_cd * f * f + p_on * v, 2.0 * lam_cd * f + p_on * d1, 2.0 * lam_cd + p_on * d2

    def energy_p(self, p: float, t: float | None = None) -> tuple[float, float, float]:
        """Transmit energy plus the idle energy of the transmit time.

        With `t` the ratio p/R is replaced by t p^2 + 1/(4 t R^2).
        """
        d = self.device.task_bits
        k1, k2, c_bb = energy_ratio_decomposition(self.device, self.cfg)
        k1 += effective_idle_power(self.device, self.cfg)
        r, r1, r2 = self.rate(p)
        inv = (1.0 / r, -r1 / r**2, 2.0 * r1 * r1 / r**3 - r2 / r**2)
        if t is None:
            # p / R
            ratio = (p / r, (r - p * r1) / r**2, (-p * r2 * r - 2.0 * r1 * (r - p * r1)) / r**3)
        else:
            inv_sq = (1.0 / r**2, -2.0 * r1 / r**3, (6.0 * r1 * r1 - 2.0 * r * r2) / r**4)
            ratio = (
                t * p * p + inv_sq[0] / (4.0 * t),
                2.0 * t * p + inv_sq[1] / (4.0 * t),
                2.0 * t + inv_sq[2] / (4.0 * t),
            )
        return (
            d * (k1 * inv[0] + k2 * ratio[0] + c_bb),
            d * (k1 * inv[1] + k2 * ratio[1]),
            d * (k1 * inv[2] + k2 * ratio[2]),
        )

    def total_latency(self, f: float, p: float) -> float:
        return self.tx_time(p)[0] + self.exec_time(f)[0]

    def total_energy(self, f: float, p: float, t: float | None = None) -> float:
        return self.energy_f(f)[0] + self.energy_p(p, t)[0]
