from .config import (EXPERIMENTS, FAMILIES, TOLERANCE_DEFAULTS, ConfigError,
                     ScenarioConfig, build_base, build_skew, config_to_json,
                     emit_config, parse_config, scenario_hash, with_overrides)
from .runner import RunResult, emit_tables, run_scenario
from .cli import main

__all__ = [
    "EXPERIMENTS", "FAMILIES", "TOLERANCE_DEFAULTS", "ConfigError",
    "RunResult", "ScenarioConfig", "build_base", "build_skew",
    "config_to_json", "emit_config", "emit_tables", "main", "parse_config",
    "run_scenario", "scenario_hash", "with_overrides",
]
