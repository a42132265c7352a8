"""Structural constants of the constitutive laws and the gate checks.

Everything here is plain arithmetic on the configuration plus the
discrete embedding constant: per-law monotonicity/Lipschitz/growth
moduli, the induced coupling constants of the eliminated system, the
state-coupling strength with its optimal Young weight, and the margins
whose positivity the solver relies on.  ``check_hypotheses`` never
raises on a bad parameter set — it reports which condition failed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..reduction import CouplingConstants
from .config import ModelConfig

__all__ = [
    "FamilyConstants",
    "EvolutionConstants",
    "HypothesisReport",
    "derive_family_constants",
    "coupling_values",
    "coupling_constants",
    "coupling_strength",
    "young_weight",
    "evolution_constants",
    "coercivity_constant",
    "check_hypotheses",
]


@dataclass(frozen=True)
class FamilyConstants:
    """Per-law moduli of the flux/bulk/stress family.

    ``*_grad_*`` entries refer to the gradient argument, ``*_strain_*``
    to the strain argument, and ``*_state_*`` to the tanh state terms;
    the growth entries bound squared nonlinear contributions (hence the
    factor 3 on the tanh coefficients squared), and ``stress_state_holder``
    is the one-sided slope bound of the stress state term.  The window
    [window_lo, window_hi] brackets the strain modulus of the stress law.
    """

    flux_grad_monotone: float
    flux_strain_lip: float
    flux_state_growth: float
    flux_strain_growth: float
    bulk_grad_lip: float
    bulk_strain_lip: float
    bulk_state_growth: float
    bulk_strain_growth: float
    stress_strain_monotone: float
    stress_strain_lip: float
    stress_grad_lip: float
    stress_state_growth: float
    stress_state_holder: float
    window_lo: float
    window_hi: float


def derive_family_constants(config: ModelConfig) -> FamilyConstants:
    return FamilyConstants(
        flux_grad_monotone=config.a1,
        flux_strain_lip=abs(config.d1),
        flux_state_growth=3.0 * config.c1**2,
        flux_strain_growth=abs(config.d1),
        bulk_grad_lip=abs(config.a2),
        bulk_strain_lip=abs(config.d2),
        bulk_state_growth=3.0 * config.c2**2,
        bulk_strain_growth=abs(config.d2),
        stress_strain_monotone=config.k0,
        stress_strain_lip=config.k0,
        stress_grad_lip=abs(config.d0),
        stress_state_growth=3.0 * config.gamma0**2,
        stress_state_holder=2.0 * config.gamma0,
        window_lo=config.k0,
        window_hi=config.k0,
    )


def coupling_values(
    family: FamilyConstants, poincare: float
) -> tuple[float, float, float, float]:
    """(alpha_x, beta_x, alpha_y, beta_y) of the eliminated pair, as raw floats.

    The bulk law acts through the embedding, so its moduli carry one
    factor of the embedding constant each; the flux law acts directly on
    gradients.
    """
    alpha_x = family.flux_grad_monotone - poincare * family.bulk_grad_lip
    beta_x = family.flux_strain_lip + poincare * family.bulk_strain_lip
    alpha_y = family.stress_strain_monotone
    beta_y = family.stress_grad_lip
    return alpha_x, beta_x, alpha_y, beta_y


def coupling_constants(family: FamilyConstants, poincare: float) -> CouplingConstants:
    """Validated coupling constants; raises when a monotonicity modulus fails."""
    alpha_x, beta_x, alpha_y, beta_y = coupling_values(family, poincare)
    return CouplingConstants(
        alpha_x=alpha_x, beta_x=beta_x, alpha_y=alpha_y, beta_y=beta_y
    )


def _state_growth_pair(family: FamilyConstants, poincare: float) -> tuple[float, float]:
    alpha0 = family.stress_strain_monotone
    if alpha0 <= 0.0:
        return float("nan"), float("nan")
    through_strain = family.stress_state_growth / alpha0
    p = family.flux_state_growth + poincare * family.flux_strain_growth * through_strain
    q = poincare * (
        family.bulk_state_growth + poincare * family.bulk_strain_growth * through_strain
    )
    return p, q


def coupling_strength(family: FamilyConstants, poincare: float) -> float:
    """Aggregate state-coupling modulus: sqrt of the direct budget plus
    sqrt of the embedded budget, each routed through the stress law."""
    p, q = _state_growth_pair(family, poincare)
    if math.isnan(p):
        return float("nan")
    return math.sqrt(p) + math.sqrt(q)


def young_weight(family: FamilyConstants, poincare: float) -> float:
    """Weight that balances the two budget halves at the stated strength.

    Zero when only the direct half is active, infinite when only the
    embedded half is, NaN when both vanish (any weight is optimal then).
    """
    p, q = _state_growth_pair(family, poincare)
    if math.isnan(p) or (p == 0.0 and q == 0.0):
        return float("nan")
    if p == 0.0:
        return float("inf")
    return math.sqrt(q / p)


@dataclass(frozen=True)
class EvolutionConstants:
    """Moduli of the eliminated spatial operator seen by the time stepper.

    ``second_slot_lip`` bounds the state-argument (tanh) dependence of
    the eliminated operator, both direct and routed through the strain;
    it is subtracted from the gradient-argument monotonicity to give the
    full operator's modulus ``mono_alpha``.
    """

    mono_alpha: float
    mono_lipschitz: float
    second_slot_lip: float


def evolution_constants(
    config: ModelConfig, family: FamilyConstants, poincare: float
) -> EvolutionConstants:
    alpha_x, beta_x, alpha_y, beta_y = coupling_values(family, poincare)
    if alpha_y <= 0.0:
        return EvolutionConstants(float("nan"), float("nan"), float("nan"))
    second_slot = (
        poincare * (abs(config.c1) + poincare * abs(config.c2))
        + beta_x * abs(config.gamma0) * poincare / alpha_y
    )
    mono_alpha = (alpha_x * alpha_y - beta_x * beta_y) / alpha_y - second_slot
    mono_lipschitz = (
        abs(config.a1)
        + poincare * abs(config.a2)
        + beta_x * beta_y / alpha_y
        + second_slot
        + abs(config.lambda_phi) * poincare**2
    )
    return EvolutionConstants(
        mono_alpha=mono_alpha,
        mono_lipschitz=max(mono_lipschitz, mono_alpha),
        second_slot_lip=second_slot,
    )


def coercivity_constant(family: FamilyConstants, poincare: float) -> float:
    """Guaranteed coercivity of the eliminated operator after the state
    coupling is absorbed: (alpha_x alpha_y - beta_x beta_y - alpha_y phi) / (2 alpha_y)."""
    alpha_x, beta_x, alpha_y, beta_y = coupling_values(family, poincare)
    if alpha_y <= 0.0:
        return float("nan")
    phi = coupling_strength(family, poincare)
    return (alpha_x * alpha_y - beta_x * beta_y - alpha_y * phi) / (2.0 * alpha_y)


@dataclass(frozen=True)
class HypothesisReport:
    """Outcome of the structural gate checks for one configuration.

    ``conditions`` maps each named requirement to a boolean;
    ``passed`` is their conjunction.  The numeric fields record the
    derived quantities the conditions were evaluated on, so a failing
    report shows by how much a margin was missed.  ``degenerate_flag``
    is 1.0 when the pivot weight vanishes (purely degenerate evolution).
    """

    poincare: float
    family: FamilyConstants
    alpha_x: float
    beta_x: float
    alpha_y: float
    beta_y: float
    coupling_strength: float
    young_weight: float
    ellipticity_margin: float
    coupling_margin: float
    coercivity: float
    degenerate_flag: float
    growth_exponent: float
    conditions: dict[str, bool]
    passed: bool


def check_hypotheses(config: ModelConfig, poincare: float | None = None) -> HypothesisReport:
    """Evaluate every structural condition for ``config``.

    When ``poincare`` is not supplied, the discrete embedding constant
    of the configured grid is computed (this assembles the grid but no
    operators).  Nothing is raised on failures: NaN margins simply fail
    their positivity checks.
    """
    if poincare is None:
        from ..spaces import poincare_constant
        from .model import assemble_spaces

        bundle = assemble_spaces(config.n_cells)
        poincare = poincare_constant(bundle.space_v, bundle.space_h, bundle.embed)
    poincare = float(poincare)

    family = derive_family_constants(config)
    alpha_x, beta_x, alpha_y, beta_y = coupling_values(family, poincare)
    phi = coupling_strength(family, poincare)
    margin = alpha_x * alpha_y - beta_x * beta_y - phi

    conditions = {
        "sign_conditions": config.mobility > 0.0 and config.mu >= 0.0,
        "potential_convexity": config.lambda_phi >= 0.0
        and config.growth_exponent > 2.0,
        "flux_bounds": config.a1 > 0.0,
        "stress_bounds": config.k0 > 0.0,
        "ellipticity": alpha_x > 0.0
        and family.window_lo
        <= family.stress_strain_monotone
        <= family.stress_strain_lip
        <= family.window_hi,
        "coupling_budget": margin > 0.0,
        "initial_data": math.isfinite(config.amplitude) and config.mode >= 1,
    }

    return HypothesisReport(
        poincare=poincare,
        family=family,
        alpha_x=alpha_x,
        beta_x=beta_x,
        alpha_y=alpha_y,
        beta_y=beta_y,
        coupling_strength=phi,
        young_weight=young_weight(family, poincare),
        ellipticity_margin=alpha_x,
        coupling_margin=margin,
        coercivity=coercivity_constant(family, poincare),
        degenerate_flag=1.0 if config.mu == 0.0 else 0.0,
        growth_exponent=float(config.growth_exponent),
        conditions=conditions,
        passed=all(conditions.values()),
    )
