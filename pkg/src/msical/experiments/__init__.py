"""Simulation studies, oracle targets, and the navigation harness."""

from .nav import NavMetrics, NavScenario, NoiseSource, nav_eval
from .oracles import OracleTargets, theta0_oracle
from .statespace import BiasState, StateSpaceSpec, model_to_state_space
from .study import StudyConfig, StudyReport, run_simulation_study

__all__ = [
    "BiasState",
    "NavMetrics",
    "NavScenario",
    "NoiseSource",
    "OracleTargets",
    "StateSpaceSpec",
    "StudyConfig",
    "StudyReport",
    "model_to_state_space",
    "nav_eval",
    "run_simulation_study",
    "theta0_oracle",
]
