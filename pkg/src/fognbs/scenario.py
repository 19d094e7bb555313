"""
Scenario ingestion, seeded device placement and result persistence.

Scenario files are flat `key = value` text with `#` comments. dB-valued keys
(`beta_db`, `n0_dbm_per_hz`) and MByte task ranges are converted at load;
their linear counterparts are accepted directly and are what the writer emits,
so a written scenario reloads to an equal spec.

Device draws use numpy's Philox (4x64 counter-based) generator keyed by
SeedSequence(seed, spawn_key=(run_index,)), so every run has its own stream
and results do not depend on the platform or the order runs execute in.
"""

import logging
import os
import tempfile
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, fields, is_dataclass
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from pydantic import ValidationError

from .config import MBYTE_BITS, NetworkConfig, ScenarioSpec, db_to_linear, dbm_to_watts
from .errors import DomainError, ResultsWriteError, ScenarioParseError, ScenarioValidationError
from .radio import pathloss_gain

logger = logging.getLogger("fognbs.scenario")

NETWORK_KEYS = (
    "bandwidth_hz",
    "noise_density_w_per_hz",
    "pathloss_beta",
    "pathloss_alpha",
    "cpu_cap_hz",
    "cpu_energy_lambda",
    "power_model",
    "device_count",
)
SCENARIO_KEYS = (
    "cell_radius_km",
    "task_bits_range",
    "cycles_range",
    "idle_power_range",
    "max_power_w",
    "seed",
    "runs",
)
RANGE_KEYS = frozenset({"task_bits_range", "cycles_range", "idle_power_range", "task_mbytes_range"})

# Alternate spellings converted to the canonical key at load
ALIASES = {
    "beta_db": "pathloss_beta",
    "n0_dbm_per_hz": "noise_density_w_per_hz",
    "task_mbytes_range": "task_bits_range",
}
KNOWN_KEYS = frozenset(NETWORK_KEYS) | frozenset(SCENARIO_KEYS) | frozenset(ALIASES)


@dataclass(frozen=True)
class Device:
    """One IoT node with its offloading task."""
    distance_km: float
    task_bits: float  # D_k
    cycles_per_bit: float  # C_k
    max_power_w: float  # pbar_k
    idle_power_w: float  # P_on_k as drawn; zeroed downstream by the unrealistic model
    gain: float  # l_k

    @classmethod
    def at(
        cls,
        distance_km: float,
        task_bits: float,
        cycles_per_bit: float,
        cfg: NetworkConfig,
        max_power_w: float = 2.0,
        idle_power_w: float = 0.0,
    ) -> "Device":
        """Build a device with its gain derived from the distance."""
        if not (task_bits > 0 and cycles_per_bit > 0 and max_power_w > 0):
            raise DomainError("task_bits, cycles_per_bit and max_power_w must be positive")
        if idle_power_w < 0:
            raise DomainError("idle_power_w must be nonnegative")
        return cls(
            distance_km=distance_km,
            task_bits=task_bits,
            cycles_per_bit=cycles_per_bit,
            max_power_w=max_power_w,
            idle_power_w=idle_power_w,
            gain=pathloss_gain(distance_km, cfg),
        )

    @property
    def cycles(self) -> float:
        """Total CPU cycles of the task, C_k D_k."""
        return self.cycles_per_bit * self.task_bits


# ============================================================================
# Loading
# ============================================================================

def parse_key_values(text: str, path: str = "<string>") -> dict[str, str]:
    """Split scenario text into raw string values keyed by name."""
    values: dict[str, str] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioParseError(path, line_no, f"expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ScenarioParseError(path, line_no, "empty key or value")
        if key not in KNOWN_KEYS:
            raise ScenarioParseError(path, line_no, f"unknown key {key!r}")
        if key in values:
            raise ScenarioParseError(path, line_no, f"duplicate key {key!r}")
        values[key] = value
    return values


def _convert(key: str, value: Any) -> Any:
    if key in RANGE_KEYS:
        if isinstance(value, str):
            parts = [p.strip() for p in value.split(",")]
            if len(parts) != 2:
                raise ScenarioValidationError(key, "expected 'lo, hi'")
            value = parts
        lo, hi = (float(v) for v in value)
        return (lo, hi)
    if key == "power_model":
        return str(value).strip().lower()
    if key in ("device_count", "seed", "runs"):
        as_float = float(value)
        if not as_float.is_integer():
            raise ScenarioValidationError(key, f"expected an integer, got {value!r}")
        return int(as_float)
    return float(value)


def spec_from_mapping(values: Mapping[str, Any]) -> ScenarioSpec:
    """
    Validate raw values into a ScenarioSpec.

    Raises ScenarioValidationError naming the first offending field.
    """
    canonical: dict[str, Any] = {}
    for key, raw in values.items():
        target = ALIASES.get(key, key)
        if target in canonical:
            raise ScenarioValidationError(target, f"given twice (also as {key!r})")
        try:
            value = _convert(key, raw)
        except ValueError as exc:
            raise ScenarioValidationError(key, f"cannot parse {raw!r}: {exc}") from exc
        if key == "beta_db":
            value = db_to_linear(value)
        elif key == "n0_dbm_per_hz":
            value = dbm_to_watts(value)
        elif key == "task_mbytes_range":
            value = (value[0] * MBYTE_BITS, value[1] * MBYTE_BITS)
        canonical[target] = value

    network = {k: canonical[k] for k in NETWORK_KEYS if k in canonical}
    scenario = {k: canonical[k] for k in SCENARIO_KEYS if k in canonical}
    try:
        return ScenarioSpec(network=network, **scenario)
    except ValidationError as exc:
        first = exc.errors()[0]
        loc = [str(part) for part in first["loc"] if isinstance(part, str)]
        field = loc[-1] if loc else "scenario"
        raise ScenarioValidationError(field, first["msg"]) from exc


def load_scenario(path: str | os.PathLike) -> ScenarioSpec:
    """Read and validate a scenario file."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    spec = spec_from_mapping(parse_key_values(text, str(path)))
    logger.debug("Loaded scenario %s (K=%d, runs=%d)", path, spec.network.device_count, spec.runs)
    return spec


def spec_to_mapping(spec: ScenarioSpec) -> dict[str, Any]:
    """Canonical (linear-unit) key values of a spec."""
    values: dict[str, Any] = {k: getattr(spec.network, k) for k in NETWORK_KEYS}
    values["power_model"] = spec.network.power_model.value
    values.update({k: getattr(spec, k) for k in SCENARIO_KEYS})
    return values


def format_scenario(spec: ScenarioSpec) -> str:
    """Render a spec as scenario-file text that reloads to an equal spec."""
    lines = []
    for key, value in spec_to_mapping(spec).items():
        if isinstance(value, tuple):
            text = f"{value[0]!r}, {value[1]!r}"
        else:
            text = repr(value) if isinstance(value, float) else str(value)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"


def write_scenario(spec: ScenarioSpec, path: str | os.PathLike) -> None:
    _atomic_write(Path(path), format_scenario(spec))


# ============================================================================
# Device Sampling
# ============================================================================

def run_generator(seed: int, *spawn_key: int) -> np.random.Generator:
    """Philox stream for one (seed, spawn_key) pair."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=spawn_key)))


def sample_devices(spec: ScenarioSpec, run_index: int) -> list[Device]:
    """Draw the K devices of one run, uniformly over the cell disk."""
    if not 0 <= run_index < spec.runs:
        raise DomainError(f"run_index {run_index} outside [0, {spec.runs})")
    k = spec.network.device_count
    rng = run_generator(spec.seed, run_index)
    # 1 - u lies in (0, 1], so every distance is in (0, R]
    distances = spec.cell_radius_km * np.sqrt(1.0 - rng.random(k))
    tasks = rng.uniform(*spec.task_bits_range, size=k)
    cycles = rng.uniform(*spec.cycles_range, size=k)
    idle = rng.uniform(*spec.idle_power_range, size=k)
    return [
        Device.at(
            distance_km=float(distances[i]),
            task_bits=float(tasks[i]),
            cycles_per_bit=float(cycles[i]),
            cfg=spec.network,
            max_power_w=spec.max_power_w,
            idle_power_w=float(idle[i]),
        )
        for i in range(k)
    ]


# ============================================================================
# Result Persistence
# ============================================================================

def _atomic_write(path: Path, text: str) -> None:
    directory = path.parent if str(path.parent) else Path(".")
    tmp_name = None
    try:
        directory.mkdir(parents=True, exist_ok=True)
        with tempfile.NamedTemporaryFile(
            "w", encoding="utf-8", dir=directory, prefix=f".{path.name}.", suffix=".tmp",
            delete=False, newline="",
        ) as handle:
            tmp_name = handle.name
            handle.write(text)
        os.replace(tmp_name, path)
    except OSError as exc:
        if tmp_name and os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise ResultsWriteError(str(path), exc) from exc


def rows_to_frame(rows: Sequence[Any]) -> pd.DataFrame:
    """DataFrame from dataclass or mapping rows, keeping declared column order."""
    first = rows[0]
    if is_dataclass(first):
        names = [f.name for f in fields(first)]
        columns = [name.rstrip("_") for name in names]
        records = [{col: getattr(row, name) for col, name in zip(columns, names)} for row in rows]
    else:
        columns = list(first)
        records = [dict(row) for row in rows]
    return pd.DataFrame.from_records(records, columns=columns)


def format_results(rows: Sequence[Any]) -> str:
    """CSV text: UTF-8, comma separated, 9 significant digits."""
    if not rows:
        raise ValueError("no rows to write")
    frame = rows_to_frame(rows)
    return frame.to_csv(index=False, float_format="%.9g", lineterminator="\n", na_rep="")


def write_results(rows: Sequence[Any], path: str | os.PathLike) -> None:
    """Write result rows atomically (temp file in the target directory, then rename)."""
    _atomic_write(Path(path), format_results(rows))
    logger.info("Wrote %d rows to %s", len(rows), path)
