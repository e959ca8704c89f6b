"""IRS-assisted secure dual-function radar-communication design."""
from .config import ConfigError, SystemConfig
from .experiments import ExperimentSpec, emit_csv, run_experiment
from .optimizer import RunResult, optimize
from .scenario import ChannelSet, CsiView, draw_scenario, realization_rngs
from .signal_model import DesignState, evaluate

__all__ = [
    "ConfigError", "SystemConfig", "ExperimentSpec", "emit_csv", "run_experiment",
    "RunResult", "optimize", "ChannelSet", "CsiView", "draw_scenario", "realization_rngs",
    "DesignState", "evaluate",
]
