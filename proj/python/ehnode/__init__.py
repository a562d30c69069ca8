"""Energy-harvesting sensor node: queue simulation, stability thresholds and MDP solves."""

import json

from ._core import (
    ConfigError,
    RateFunction,
    cli,
    preset_json,
    preset_names,
    simulate,
    solve_mdp,
    sweep_csv,
    thresholds,
    waterfill_level,
)

__all__ = [
    "ConfigError",
    "RateFunction",
    "cli",
    "config",
    "preset_json",
    "preset_names",
    "simulate",
    "solve_mdp",
    "sweep_csv",
    "thresholds",
    "waterfill_level",
]


def config(preset=None, **overrides):
    """JSON config text from an optional preset name plus top-level overrides."""
    doc = dict(overrides)
    if preset is not None:
        doc["preset"] = preset
    return json.dumps(doc)
