"""Bundled reference model: the 24-service shop environment, its codebook,
and the two benchmark scenarios."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

BUILTIN_SCENARIOS = {
    "active-fault": "scenario_active_fault.json",
    "healthy": "scenario_healthy.json",
}


def path(name: str) -> Path:
    """Filesystem path of a bundled data file."""
    candidate = Path(str(resources.files(__package__) / name))
    if not candidate.exists():
        raise FileNotFoundError(f"no bundled file {name!r}")
    return candidate


def scenario_path(name: str) -> Path:
    """Resolve a builtin scenario name ('active-fault' or 'healthy')."""
    if name not in BUILTIN_SCENARIOS:
        raise FileNotFoundError(
            f"unknown builtin scenario {name!r}; choose from {sorted(BUILTIN_SCENARIOS)}")
    return path(BUILTIN_SCENARIOS[name])
