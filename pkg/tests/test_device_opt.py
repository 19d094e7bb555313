import numpy as np
import pytest

from fognbs.device_opt import (
    TchebyshevSetting,
    eta_grid,
    freq_floor,
    ideal_energy,
    ideal_latency,
    pareto_boundary,
    power_floor,
    solve_tchebyshev_single,
)
from fognbs.errors import DomainError
from fognbs.metrics import DeviceTerms, energy, latency
from fognbs.oracle import ENERGY, LATENCY, GridSpec, grid_min_single
from fognbs.scenario import sample_devices


def test_ideal_latency_reference(near_device, network):
    assert ideal_latency(near_device, network) == pytest.approx(1.40, abs=0.01)


def test_ideal_latency_beats_grid(near_device, network):
    f = np.linspace(1.2e7, 1.2e9, 200)[:, None]
    p = np.geomspace(2e-3, 2.0, 200)[None, :]
    assert ideal_latency(near_device, network) <= latency(near_device, f, p, network)[2].min() * (1 + 1e-12)


def test_ideal_latency_decreases_with_budget(near_device, network):
    assert ideal_latency(near_device, network, 2.4e9) < ideal_latency(near_device, network)


def test_ideal_energy_matches_grid(near_device, network, settings):
    ideal = ideal_energy(near_device, network, settings)
    grid = grid_min_single(near_device, network, ENERGY, GridSpec(points_per_axis=300))
    assert ideal.e_min_j <= grid.value + 1e-9
    assert grid.value - ideal.e_min_j <= grid.cell_slack
    assert not ideal.f_clamped


def test_ideal_energy_below_corner_energy(near_device, far_device, network):
    for device in (near_device, far_device):
        ideal = ideal_energy(device, network)
        assert ideal.e_min_j <= energy(device, network.cpu_cap_hz, device.max_power_w, network)[3]


def test_ideal_energy_cpu_frequency_stationary_point(near_device, network):
    ideal = ideal_energy(near_device, network)
    expected = (near_device.idle_power_w / (2 * network.cpu_energy_lambda)) ** (1 / 3)
    assert ideal.argmin_e[0] == pytest.approx(min(expected, network.cpu_cap_hz), rel=1e-3)


def test_unrealistic_ideal_energy_pins_frequency(near_device, unrealistic, settings):
    ideal = ideal_energy(near_device, unrealistic, settings)
    assert ideal.f_clamped
    assert ideal.argmin_e[0] == pytest.approx(unrealistic.cpu_cap_hz * settings.f_min_fraction)


@pytest.mark.parametrize("eta", [0.0, 1.0, -0.1, 1.5])
def test_tchebyshev_setting_rejects_closed_endpoints(eta):
    with pytest.raises(DomainError):
        TchebyshevSetting(eta)


def test_small_eta_approaches_energy_ideal(near_device, network):
    ideal = ideal_energy(near_device, network)
    state = solve_tchebyshev_single(near_device, 1e-3, network.cpu_cap_hz, network, ideal=ideal)
    e = DeviceTerms(near_device, network).total_energy(state.f_hz, state.p_w)
    assert e <= ideal.e_min_j * 1.01


def test_large_eta_approaches_latency_ideal(near_device, network):
    state = solve_tchebyshev_single(near_device, 1 - 1e-4, network.cpu_cap_hz, network)
    t = DeviceTerms(near_device, network).total_latency(state.f_hz, state.p_w)
    assert t <= ideal_latency(near_device, network) * 1.01


@pytest.mark.parametrize("eta", [0.2, 0.5, 0.8])
def test_both_deviations_active(near_device, network, eta):
    ideal = ideal_energy(near_device, network)
    state = solve_tchebyshev_single(near_device, eta, network.cpu_cap_hz, network, ideal=ideal)
    terms = DeviceTerms(near_device, network)
    dt = eta * (terms.total_latency(state.f_hz, state.p_w) - ideal.t_min_s)
    de = (1 - eta) * (terms.total_energy(state.f_hz, state.p_w) - ideal.e_min_j)
    assert state.y == pytest.approx(max(dt, de))
    assert dt == pytest.approx(de, rel=1e-4)
    assert 0 < state.f_hz <= network.cpu_cap_hz
    assert 0 < state.p_w <= near_device.max_power_w


def test_budget_above_capacity_rejected(near_device, network):
    with pytest.raises(DomainError):
        solve_tchebyshev_single(near_device, 0.5, 2 * network.cpu_cap_hz, network)


def test_pareto_boundary_monotone(far_device, network):
    points = pareto_boundary(far_device, network, eta_grid(8))
    latencies = [p.T_s for p in points]
    energies = [p.E_J for p in points]
    assert all(b <= a * (1 + 1e-6) for a, b in zip(latencies, latencies[1:]))
    assert all(b >= a * (1 - 1e-6) for a, b in zip(energies, energies[1:]))


def test_eta_grid_symmetric():
    grid = eta_grid(20)
    assert grid[0] == pytest.approx(0.001)
    assert grid[-1] == pytest.approx(0.999)
    assert np.all(np.diff(grid) > 0)
    np.testing.assert_allclose(grid + grid[::-1], 1.0, atol=1e-15)


def test_ideal_energy_on_sampled_devices(spec, settings):
    """Whole default population: large barrier values must still centre."""
    for run in range(5):
        for device in sample_devices(spec, run):
            ideal = ideal_energy(device, spec.network, settings)
            corner = energy(device, spec.network.cpu_cap_hz, device.max_power_w, spec.network)[3]
            assert 0 < ideal.e_min_j <= corner
            f, p = ideal.argmin_e
            assert freq_floor(spec.network, settings) <= f <= spec.network.cpu_cap_hz
            assert power_floor(device, settings) <= p <= device.max_power_w


def _population(spec, size=100):
    devices = []
    run = 0
    while len(devices) < size:
        devices.extend(sample_devices(spec, run))
        run += 1
    return devices[:size]


@pytest.mark.slow
def test_ideal_energy_descends_and_matches_grid_on_population(spec, settings):
    for device in _population(spec):
        ideal = ideal_energy(device, spec.network, settings)
        trace = ideal.objective_trace
        assert all(b <= a + 1e-9 for a, b in zip(trace, trace[1:]))
        grid = grid_min_single(device, spec.network, ENERGY, GridSpec(points_per_axis=300))
        assert ideal.e_min_j <= grid.value + 1e-9
        assert grid.value - ideal.e_min_j <= grid.cell_slack


@pytest.mark.slow
def test_ideal_latency_at_grid_corner_on_population(spec):
    cfg = spec.network
    for device in _population(spec):
        grid = grid_min_single(device, cfg, LATENCY, GridSpec(points_per_axis=200))
        assert grid.argmin == (cfg.cpu_cap_hz, device.max_power_w)
        assert ideal_latency(device, cfg) == pytest.approx(grid.value, rel=1e-12)
