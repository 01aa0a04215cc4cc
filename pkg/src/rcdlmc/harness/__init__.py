"""Configuration, presets, sweeps, CSV output and the command line."""

from .config import PRESETS, ConfigError, ExperimentSpec, dump_config, parse_config, preset_spec
from .csvio import COLUMNS, SCHEMA_VERSION, emit_csv, read_csv, write_saturation_tsv
from .experiment import bounds_table, build_target, run_experiment

__all__ = [
    "PRESETS",
    "ConfigError",
    "ExperimentSpec",
    "dump_config",
    "parse_config",
    "preset_spec",
    "COLUMNS",
    "SCHEMA_VERSION",
    "emit_csv",
    "read_csv",
    "write_saturation_tsv",
    "bounds_table",
    "build_target",
    "run_experiment",
]
