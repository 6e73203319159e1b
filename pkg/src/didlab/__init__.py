"""Difference-in-differences simulation lab.

Data-generating scenarios with time-invariant and time-varying confounding,
regression and matching estimators of the treatment effect, closed-form
oracles, and a reproducible Monte Carlo runner.
"""

__version__ = "0.1.0"

from didlab.dgp import NoiseSwitches, OutcomeProcess, PanelDataset, Scenario, ScenarioSpec, generate
from didlab.regression import ModelKind, ModelSpec, fit_model
from didlab.matching import Distance, MatchKind, MatchStrategy, match_panel
from didlab.oracle import expected_means_scenario6, true_att
from didlab.harness import AnalysisMethod, ExperimentConfig, run_experiment, run_replicate

__all__ = [
    "NoiseSwitches",
    "OutcomeProcess",
    "PanelDataset",
    "Scenario",
    "ScenarioSpec",
    "generate",
    "ModelKind",
    "ModelSpec",
    "fit_model",
    "Distance",
    "MatchKind",
    "MatchStrategy",
    "match_panel",
    "expected_means_scenario6",
    "true_att",
    "AnalysisMethod",
    "ExperimentConfig",
    "run_experiment",
    "run_replicate",
]
