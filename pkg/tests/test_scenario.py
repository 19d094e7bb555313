import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fognbs.config import PowerModel, get_default_scenario
from fognbs.errors import DomainError, ResultsWriteError, ScenarioParseError, ScenarioValidationError
from fognbs.overrides import echo_scenario, merge_overrides
from fognbs.records import ParetoPoint
from fognbs.scenario import (
    format_results,
    format_scenario,
    load_scenario,
    parse_key_values,
    sample_devices,
    spec_from_mapping,
    write_results,
    write_scenario,
)

FULL_TEXT = """\
# comment line
bandwidth_hz = 1e5
n0_dbm_per_hz = -174
beta_db = -90      # trailing comment
pathloss_alpha = 3.5
cpu_cap_hz = 1.2e9
cpu_energy_lambda = 1e-27
power_model = Practical
device_count = 3
cell_radius_km = 0.07
task_mbytes_range = 0.1, 1.1
cycles_range = 50, 250
idle_power_range = 2, 3.5
"""


def test_load_converts_db_and_mbytes(write_scenario_text):
    spec = load_scenario(write_scenario_text(FULL_TEXT))
    assert spec.network.pathloss_beta == pytest.approx(1e-9, rel=1e-12)
    assert spec.network.noise_density_w_per_hz == pytest.approx(3.981e-21, rel=1e-3)
    assert spec.network.power_model is PowerModel.PRACTICAL
    assert spec.task_bits_range == pytest.approx((0.8e6, 8.8e6))
    assert spec.runs == 200 and spec.seed == 2024


def test_missing_required_field_is_named(write_scenario_text):
    text = "\n".join(line for line in FULL_TEXT.splitlines() if not line.startswith("cpu_cap_hz"))
    with pytest.raises(ScenarioValidationError) as info:
        load_scenario(write_scenario_text(text))
    assert info.value.field == "cpu_cap_hz"


@pytest.mark.parametrize(
    ("line", "fragment"),
    [
        ("no equals sign", "expected"),
        ("mystery_key = 3", "unknown key"),
        ("bandwidth_hz = ", "empty"),
        ("bandwidth_hz = 2e5", "duplicate"),
    ],
)
def test_parse_errors_carry_line_numbers(line, fragment):
    text = "bandwidth_hz = 1e5\n" + line + "\n"
    with pytest.raises(ScenarioParseError) as info:
        parse_key_values(text, "s.conf")
    assert info.value.line_no == 2
    assert fragment in str(info.value)


@pytest.mark.parametrize(
    ("key", "value"),
    [("bandwidth_hz", -1.0), ("cycles_range", (250.0, 50.0)), ("idle_power_range", (-1.0, 2.0)), ("runs", 0)],
)
def test_invalid_values_are_rejected(key, value):
    with pytest.raises(ScenarioValidationError):
        merge_overrides(get_default_scenario(), {key: value})


def test_non_integer_count_rejected():
    with pytest.raises(ScenarioValidationError) as info:
        merge_overrides(get_default_scenario(), {"device_count": 2.5})
    assert info.value.field == "device_count"


def test_alias_and_canonical_together_rejected():
    with pytest.raises(ScenarioValidationError):
        spec_from_mapping({"beta_db": -90, "pathloss_beta": 1e-9})


def test_written_scenario_reloads_equal(tmp_path, spec):
    path = tmp_path / "out.conf"
    write_scenario(spec, path)
    assert load_scenario(path) == spec


def test_echo_parses_back(spec, write_scenario_text):
    assert load_scenario(write_scenario_text(echo_scenario(spec))) == spec


@given(
    bandwidth=st.floats(1e3, 1e7),
    lam=st.floats(1e-30, 1e-20),
    radius=st.floats(0.01, 1.0),
    seed=st.integers(0, 2**32),
)
@settings(max_examples=50, deadline=None)
def test_format_round_trip(bandwidth, lam, radius, seed):
    spec = merge_overrides(
        get_default_scenario(),
        {"bandwidth_hz": bandwidth, "cpu_energy_lambda": lam, "cell_radius_km": radius, "seed": seed},
    )
    assert spec_from_mapping(parse_key_values(format_scenario(spec))) == spec


def test_merge_overrides_skips_unset_and_rejects_unknown(spec):
    assert merge_overrides(spec, {"seed": None}) == spec
    assert merge_overrides(spec, {"seed": 5}, {"seed": 9}).seed == 9
    with pytest.raises(ScenarioValidationError):
        merge_overrides(spec, {"not_a_key": 1})


def test_merge_alias_replaces_canonical(spec):
    merged = merge_overrides(spec, {"beta_db": -80})
    assert merged.network.pathloss_beta == pytest.approx(1e-8)


# ============================================================================
# Sampling
# ============================================================================

def test_sampling_is_deterministic(spec):
    assert sample_devices(spec, 3) == sample_devices(spec, 3)
    assert sample_devices(spec, 3) != sample_devices(spec, 4)


def test_sampling_independent_of_model(spec):
    other = merge_overrides(spec, {"power_model": "unrealistic"})
    assert sample_devices(spec, 0) == sample_devices(other, 0)


def test_collapsed_ranges(spec):
    point = merge_overrides(
        spec, {"task_bits_range": (4e6, 4e6), "cycles_range": (100, 100), "idle_power_range": (2.5, 2.5)}
    )
    devices = sample_devices(point, 0)
    assert {d.task_bits for d in devices} == {4e6}
    assert {d.cycles_per_bit for d in devices} == {100.0}
    assert {d.idle_power_w for d in devices} == {2.5}


def test_distances_uniform_over_disk(spec):
    many = merge_overrides(spec, {"device_count": 10_000, "runs": 1})
    distances = np.array([d.distance_km for d in sample_devices(many, 0)])
    assert np.all((distances > 0) & (distances <= 0.07))
    assert distances.mean() == pytest.approx(2.0 / 3.0 * 0.07, rel=0.02)


def test_sampling_run_index_bounds(spec):
    with pytest.raises(DomainError):
        sample_devices(spec, spec.runs)


# ============================================================================
# Results
# ============================================================================

def test_single_row_file(tmp_path):
    path = tmp_path / "rows.csv"
    write_results([ParetoPoint(0.5, 1.4, 10.0, 1e9, 0.5, 0.2)], path)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert len(lines) == 2
    assert lines[0] == "eta,T_s,E_J,f_hz,p_w,y"


def test_results_nine_significant_digits():
    text = format_results([{"eta": 1 / 3, "T_s": 2.0}])
    assert text.splitlines()[1] == "0.333333333,2"


def test_results_byte_identical(tmp_path):
    rows = [ParetoPoint(0.1 * i, 1.0 / (i + 1), float(i), 1e9, 0.5, 0.1) for i in range(5)]
    write_results(rows, tmp_path / "a.csv")
    write_results(rows, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_write_failure_leaves_no_partial_file(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(ResultsWriteError):
        write_results([{"eta": 0.5}], blocker / "sub" / "rows.csv")
