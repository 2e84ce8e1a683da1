"""Scenario configuration, sweep execution, plot-data emission and the CLI."""

from .config import ConfigError, ScenarioConfig, VariantSpec, load_config, parse_config, parse_variant, preset_names
from .plotdata import FIGURES, emit_plotdata, figure_ids, write_plotdata
from .runner import RESULT_COLUMNS, RunResult, run_scenario, train_slow_time

__all__ = [
    "FIGURES",
    "RESULT_COLUMNS",
    "ConfigError",
    "RunResult",
    "ScenarioConfig",
    "VariantSpec",
    "emit_plotdata",
    "figure_ids",
    "load_config",
    "parse_config",
    "parse_variant",
    "preset_names",
    "run_scenario",
    "train_slow_time",
    "write_plotdata",
]
