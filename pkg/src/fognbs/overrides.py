"""
Merge scenario sources into one validated spec.

Used by the CLI to layer a scenario file, environment and flags without
inline merging logic. Later sources override earlier ones.
"""

import logging
from collections.abc import Mapping
from typing import Any

from .config import ScenarioSpec
from .errors import ScenarioValidationError
from .scenario import ALIASES, KNOWN_KEYS, format_scenario, spec_from_mapping, spec_to_mapping

logger = logging.getLogger("fognbs.overrides")


def merge_overrides(spec: ScenarioSpec, *sources: Mapping[str, Any] | None) -> ScenarioSpec:
    """
    Apply override mappings on top of `spec` and revalidate.

    None values (unset flags) are skipped; unknown keys are rejected. An
    alias key (e.g. `beta_db`) replaces its canonical key.
    """
    merged: dict[str, Any] = spec_to_mapping(spec)
    changed: list[str] = []
    for source in sources:
        if not source:
            continue
        for key, value in source.items():
            if value is None:
                continue
            if key not in KNOWN_KEYS:
                raise ScenarioValidationError(key, "unknown override key")
            canonical = ALIASES.get(key, key)
            for existing in [k for k in merged if ALIASES.get(k, k) == canonical]:
                del merged[existing]
            merged[key] = value
            changed.append(key)
    if changed:
        logger.debug("Scenario overrides applied", extra={"extra": {"keys": sorted(set(changed))}})
    return spec_from_mapping(merged)


def echo_scenario(spec: ScenarioSpec) -> str:
    """Effective-configuration block for stderr; parses back to `spec`."""
    return "# effective scenario\n" + format_scenario(spec)
