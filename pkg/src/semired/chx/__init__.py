"""1D coupled phase-field/elasticity discretization built on the
reduction and evolution toolkits."""

from .config import (
    ConfigError,
    ModelConfig,
    Tolerances,
    default_config,
    dispersion_config,
    parse_config,
)
from .hypotheses import (
    EvolutionConstants,
    FamilyConstants,
    HypothesisReport,
    check_hypotheses,
    coercivity_constant,
    coupling_constants,
    coupling_strength,
    coupling_values,
    derive_family_constants,
    evolution_constants,
    young_weight,
)
from .model import Model, SpaceBundle, assemble_spaces, build_model
from .study import ConvergenceReport, convergence_study, thread_count

__all__ = [
    "ConfigError",
    "ModelConfig",
    "Tolerances",
    "default_config",
    "dispersion_config",
    "parse_config",
    "EvolutionConstants",
    "FamilyConstants",
    "HypothesisReport",
    "check_hypotheses",
    "coercivity_constant",
    "coupling_constants",
    "coupling_strength",
    "coupling_values",
    "derive_family_constants",
    "evolution_constants",
    "young_weight",
    "Model",
    "SpaceBundle",
    "assemble_spaces",
    "build_model",
    "ConvergenceReport",
    "convergence_study",
    "thread_count",
]
