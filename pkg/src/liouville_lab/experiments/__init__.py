"""Scenario configs, the sweep runner and the command line interface."""
from .config import KINDS, ConfigError, Point, Scenario, load_scenario, parse_scenario
from .runner import OUTPUT_ENV, RunError, RunResult, report_summary, run_config, run_point, run_scenario

__all__ = [
    "KINDS",
    "OUTPUT_ENV",
    "ConfigError",
    "Point",
    "RunError",
    "RunResult",
    "Scenario",
    "load_scenario",
    "parse_scenario",
    "report_summary",
    "run_config",
    "run_point",
    "run_scenario",
]
