"""Joint optimization of wind-farm layout and cooperative turbine control.

Modules
-------
wake
    Gaussian wake model with yaw deflection; farm power evaluation.
scenarios
    Wind roses, control plans, configs and report persistence.
control
    Per-scenario yaw and induction optimization.
layout
    AEP objective, spacing penalty, feasibility repair, particle swarm and
    the sequential pipeline.
dbhm
    Consensus ADMM over wind scenarios, warm-started by the swarm.
oracle
    Brute-force references for small instances.
"""
from .control import ControlSolveOptions, greedy_controls, optimize_controls, optimize_controls_all_scenarios
from .dbhm import (
    DbhmOptions, DbhmState, dbhm_coordinate, dbhm_optimize, dbhm_pipeline, dbhm_residual,
    dbhm_subproblem, dbhm_update_multipliers,
)
from .layout import (
    LayoutProblem, PsoOptions, aep, control_only, is_feasible, layout_only, pso_layout,
    repair_layout, sequential_optimize, spacing_penalty,
)
from .scenarios import (
    ControlPlan, FarmConfig, OptimizationReport, WindRose, annual_energy_gwh, discretize_rose,
    load_config, load_layout, load_report, load_wind_rose, save_layout, save_report,
    save_wind_rose,
)
from .wake import (
    Controls, FarmSpec, FlowResult, Inflow, Layout, TurbineControl, WakeDomainError, farm_power,
)

__version__ = "0.1.0"

__all__ = [
    "ControlPlan", "ControlSolveOptions", "Controls", "DbhmOptions", "DbhmState", "FarmConfig",
    "FarmSpec", "FlowResult", "Inflow", "Layout", "LayoutProblem", "OptimizationReport",
    "PsoOptions", "TurbineControl", "WakeDomainError", "WindRose", "aep", "annual_energy_gwh",
    "control_only", "dbhm_coordinate", "dbhm_optimize", "dbhm_pipeline", "dbhm_residual",
    "dbhm_subproblem", "dbhm_update_multipliers", "discretize_rose", "farm_power",
    "greedy_controls", "is_feasible", "layout_only", "load_config", "load_layout",
    "load_report", "load_wind_rose", "optimize_controls", "optimize_controls_all_scenarios",
    "pso_layout", "repair_layout", "save_layout", "save_report", "save_wind_rose",
    "sequential_optimize", "spacing_penalty",
]
