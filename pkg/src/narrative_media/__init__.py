"""Optimal media strategies for consumers who interpret signals through causal narratives."""

from .model_core import (
    NARRATIVES,
    ConsumerStrategy,
    Environment,
    ModelError,
    Narrative,
    Separability,
    SignalFunction,
    anticipatory_utility,
    factorize,
    fit_narrative,
    smooth,
    subjective_value,
)
from .equilibrium import EquilibriumResult, find_equilibria, is_equilibrium
from .strategy_optimizer import (
    OptimizationReport,
    benchmark_value,
    optimize_media_strategy,
    optimize_signal_for_narrative,
    rational_benchmark,
)
from .menu_design import optimize_menu
from .competitive_market import competitive_equilibrium, verify_competitive
from .rational_mix import optimize_mixed
from .scenarios import ScenarioSpec, build as build_scenario
from .kernels import BACKEND

__all__ = [
    "NARRATIVES", "ConsumerStrategy", "Environment", "ModelError", "Narrative", "Separability",
    "SignalFunction", "anticipatory_utility", "factorize", "fit_narrative", "smooth", "subjective_value",
    "EquilibriumResult", "find_equilibria", "is_equilibrium", "OptimizationReport", "benchmark_value",
    "optimize_media_strategy", "optimize_signal_for_narrative", "rational_benchmark", "optimize_menu",
    "competitive_equilibrium", "verify_competitive", "optimize_mixed", "ScenarioSpec", "build_scenario",
    "BACKEND",
]
