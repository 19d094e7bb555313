from pathlib import Path

import pytest

from fognbs.config import NetworkConfig, PowerModel, ScenarioSpec, SolverSettings, get_default_scenario
from fognbs.overrides import merge_overrides
from fognbs.scenario import Device

SCENARIO_DIR = Path(__file__).resolve().parents[1] / "scenarios"


@pytest.fixture
def spec() -> ScenarioSpec:
    return get_default_scenario()


@pytest.fixture
def network(spec) -> NetworkConfig:
    return spec.network


@pytest.fixture
def unrealistic(spec) -> NetworkConfig:
    return merge_overrides(spec, {"power_model": PowerModel.UNREALISTIC.value}).network


@pytest.fixture
def near_device(network) -> Device:
    """4 Mbit task, 100 cycles/bit, 50 m from the fog node."""
    return Device.at(0.05, 4e6, 100.0, network, max_power_w=2.0, idle_power_w=2.75)


@pytest.fixture
def far_device(network) -> Device:
    return Device.at(0.068, 8e6, 220.0, network, max_power_w=2.0, idle_power_w=3.2)


@pytest.fixture
def settings() -> SolverSettings:
    return SolverSettings()


@pytest.fixture
def tiny_spec() -> ScenarioSpec:
    from fognbs.scenario import load_scenario

    return load_scenario(SCENARIO_DIR / "tiny.conf")


@pytest.fixture
def write_scenario_text(tmp_path):
    def write(text: str, name: str = "scenario.conf") -> Path:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return write
