"""Deterministic discrete-event simulator of edge serverless clusters."""

__version__ = "0.1.0"

from .engine import AVAILABLE, BACKEND, run_plan
from .loadgen import RunResult
from .scenario import (RunPlan, ScenarioConfig, ScenarioError, expand_grid, format_scenario,
                       parse_scenario)

__all__ = [
    "AVAILABLE", "BACKEND", "RunPlan", "RunResult", "ScenarioConfig", "ScenarioError",
    "__version__", "expand_grid", "format_scenario", "parse_scenario", "run_plan",
]
