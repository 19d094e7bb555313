import numpy as np
import pytest

from fognbs.errors import DegenerateRateError, DomainError
from fognbs.metrics import (
    Allocation,
    DeviceTerms,
    LatencyEnergy,
    energy,
    energy_ratio_decomposition,
    latency,
)
from fognbs.radio import data_rate


def test_execution_time(near_device, network):
    _, t_ex, _ = latency(near_device, 1.2e9, 2.0, network)
    assert t_ex == pytest.approx(1.0 / 3.0, rel=1e-12)


def test_latency_reference_values(near_device, network):
    t_tx, _, t_total = latency(near_device, 1.2e9, 2.0, network)
    assert t_tx == pytest.approx(1.07, abs=0.01)
    assert t_total == pytest.approx(1.40, abs=0.01)


def test_latency_minimal_at_box_corner(near_device, network):
    f = np.linspace(1.2e7, 1.2e9, 100)[:, None]
    p = np.linspace(0.02, 2.0, 100)[None, :]
    grid = latency(near_device, f, p, network)[2]
    assert np.unravel_index(np.argmin(grid), grid.shape) == (99, 99)


def test_latency_degenerate_rate(near_device, network):
    with pytest.raises(DegenerateRateError):
        latency(near_device, 1e9, 0.0, network)
    with pytest.raises(DomainError):
        latency(near_device, 0.0, 1.0, network)


def test_energy_terms_by_hand(near_device, network):
    f, p = 1.2e9, 1.0
    rate = data_rate(p, near_device.gain, network)
    t_tx = 4e6 / rate
    t_total = t_tx + 4e8 / f
    e_tx_hand = (1.35 + (2110 + 0.87 * rate / 1e6) / 1000 + 0.6 + 10.1 * p + p) * t_tx
    e_ex_hand = 1e-27 * f**2 * 4e8
    e_on_hand = 2.75 * t_total
    e_tx, e_ex, e_on, e_total = energy(near_device, f, p, network)
    assert e_tx == pytest.approx(e_tx_hand, rel=1e-12)
    assert e_ex == pytest.approx(e_ex_hand, rel=1e-12)
    assert e_on == pytest.approx(e_on_hand, rel=1e-12)
    assert e_total == pytest.approx(e_tx_hand + e_ex_hand + e_on_hand, rel=1e-12)


def test_unrealistic_has_no_idle_energy(near_device, unrealistic):
    _, _, e_on, _ = energy(near_device, 1e9, 1.0, unrealistic)
    assert e_on == 0.0


def test_decomposition_constants(network, unrealistic, near_device):
    k1, k2, c_bb = energy_ratio_decomposition(near_device, network)
    assert k1 == pytest.approx(4.06)
    assert k2 == pytest.approx(11.1)
    assert c_bb == pytest.approx(0.87e-9)
    assert energy_ratio_decomposition(near_device, unrealistic) == (0.0, 1.0, 0.0)


@pytest.mark.parametrize("p", [1e-4, 0.05, 0.7, 2.0])
def test_surrogate_energy_tight_at_matched_multiplier(near_device, network, p):
    rate = data_rate(p, near_device.gain, network)
    t = 1.0 / (2.0 * p * rate)
    plain = energy(near_device, 8e8, p, network)[3]
    surrogate = energy(near_device, 8e8, p, network, t_for_fractional=t)[3]
    assert surrogate == pytest.approx(plain, rel=1e-12)


def test_decomposed_energy_matches_direct(near_device, network):
    terms = DeviceTerms(near_device, network)
    for f, p in [(2e8, 0.01), (8e8, 0.5), (1.2e9, 2.0)]:
        assert terms.total_energy(f, p) == pytest.approx(energy(near_device, f, p, network)[3], rel=1e-12)
        assert terms.total_latency(f, p) == pytest.approx(latency(near_device, f, p, network)[2], rel=1e-12)


def test_term_derivatives(near_device, network):
    terms = DeviceTerms(near_device, network)
    h = 1e-6
    for fn, x, step in [(terms.energy_f, 6e8, 6e8 * h), (terms.energy_p, 0.4, 0.4 * h), (terms.tx_time, 0.4, 0.4 * h)]:
        value, d1, d2 = fn(x)
        assert d1 == pytest.approx((fn(x + step)[0] - fn(x - step)[0]) / (2 * step), rel=1e-5)
        assert d2 == pytest.approx((fn(x + step)[1] - fn(x - step)[1]) / (2 * step), rel=1e-4)


def test_latency_energy_record(near_device, network):
    le = LatencyEnergy.evaluate(near_device, 1e9, 1.0, network)
    assert le.t_total_s == pytest.approx(le.t_tx_s + le.t_ex_s)
    assert le.e_total_j == pytest.approx(le.e_tx_j + le.e_ex_j + le.e_on_j)


def test_allocation_validation(near_device, far_device, network):
    devices = [near_device, far_device]
    Allocation([0.6e9, 0.6e9], [1.0, 2.0]).validate(devices, network)
    with pytest.raises(DomainError):
        Allocation([0.7e9, 0.6e9], [1.0, 2.0]).validate(devices, network)
    with pytest.raises(DomainError):
        Allocation([0.5e9, 0.5e9], [0.0, 2.0]).validate(devices, network)
    with pytest.raises(DomainError):
        Allocation([0.5e9, 0.5e9], [1.0, 2.5]).validate(devices, network)
