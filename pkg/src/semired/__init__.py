"""Reduction of semimonotone operator pairs, damped-Richardson solvers,
implicit evolution with a degenerate pivot, and a 1D coupled
phase-field/elasticity discretization built on top of them.
"""

from .evolution import (
    DissipationReport,
    DivergenceError,
    EvolutionProblem,
    EvolutionSpaces,
    StepError,
    StepResult,
    Trajectory,
    dissipation_report,
    energy_identity_check,
    implicit_euler_step,
    run,
)
from .monotone import (
    ConvergenceError,
    MonotoneProblem,
    PairSampler,
    SolveReport,
    estimate_lipschitz,
    estimate_monotonicity,
    solve_strongly_monotone,
)
from .reduction import (
    CoupledSystem,
    CouplingConstants,
    EliminationError,
    EstimateReport,
    ReducedOperator,
    ReducedValue,
    SemimonotoneReport,
    check_semimonotone,
    coupled_residuals,
    eliminate,
    ray_continuity_check,
    translate,
    verify_reduction_estimates,
)
from .spaces import (
    DualVector,
    SpaceDescriptor,
    duality_map,
    inner,
    poincare_constant,
    project_zero_mean,
    sqrt_spd,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "SpaceDescriptor",
    "DualVector",
    "inner",
    "duality_map",
    "poincare_constant",
    "sqrt_spd",
    "project_zero_mean",
    "MonotoneProblem",
    "SolveReport",
    "ConvergenceError",
    "PairSampler",
    "solve_strongly_monotone",
    "estimate_monotonicity",
    "estimate_lipschitz",
    "CouplingConstants",
    "CoupledSystem",
    "EliminationError",
    "ReducedValue",
    "ReducedOperator",
    "EstimateReport",
    "SemimonotoneReport",
    "eliminate",
    "coupled_residuals",
    "translate",
    "verify_reduction_estimates",
    "check_semimonotone",
    "ray_continuity_check",
    "EvolutionSpaces",
    "EvolutionProblem",
    "StepResult",
    "Trajectory",
    "DivergenceError",
    "StepError",
    "implicit_euler_step",
    "run",
    "energy_identity_check",
    "DissipationReport",
    "dissipation_report",
]
