"""Simulation and threshold analysis of a stochastic dengue model with Levy jumps."""

__version__ = "0.1.0"

from .model import (
    AssumptionError,
    AssumptionReport,
    JumpAtom,
    JumpMeasure,
    ModelParams,
    NoiseParams,
    State,
    deterministic_r0,
    diffusion,
    drift,
    endemic_equilibrium,
    validate,
)
from .thresholds import ThresholdReport, ThresholdUndefinedError, Verdict, classify
from .engine import (
    AuxTrajectory,
    NegativityError,
    PositivityPolicy,
    SimConfig,
    Trajectory,
    simulate,
    simulate_aux,
    simulate_coupled,
)
from .estimators import (
    EnsembleSummary,
    ensemble_run,
    extinction_rate,
    persistence_check,
    slln_diagnostics,
    time_average,
)
from .scenario import PRESETS, Scenario, ScenarioError, load_scenario, save_scenario
