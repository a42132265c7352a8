"""P1/P0 finite elements on [0, 1] for the coupled phase/strain model.

The evolving field is a zero-mean piecewise-linear function; its reduced
coordinates are the nodal increments relative to the left endpoint,
which makes the zero-mean constraint a property of the representation
map rather than a side condition.  Strains are piecewise constant, one
value per cell, and mechanical equilibrium is solved per state by the
generic elimination machinery — the stress law is strongly monotone in
the strain with matching Lipschitz constant, so that inner iteration
converges in a single damped step.

All coordinate maps broadcast over leading axes, so whole trajectories
or sample stacks can be pushed through at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..evolution import EvolutionProblem, EvolutionSpaces
from ..reduction import (
    CoupledSystem,
    CouplingConstants,
    ReducedOperator,
    _eliminate_stack,
    eliminate,
)
from ..spaces import DualVector, SpaceDescriptor, poincare_constant, project_zero_mean
from .config import ModelConfig
from .hypotheses import (
    EvolutionConstants,
    FamilyConstants,
    coupling_constants,
    derive_family_constants,
    evolution_constants,
)

__all__ = ["SpaceBundle", "Model", "assemble_spaces", "build_model"]


@dataclass(frozen=True)
class SpaceBundle:
    """Grid geometry, assembled forms, and the coordinate spaces.

    ``a_nodes`` maps reduced coordinates to the (n_cells + 1) nodal
    values of the zero-mean representative; ``grad`` maps them to cell
    gradients and doubles as the strain map on clamped displacements;
    ``mid`` evaluates at cell midpoints.  ``weights`` are the exact mass
    row sums (the integral of each hat function), ``omega`` their
    normalization.
    """

    n_cells: int
    h: float
    nodes: np.ndarray
    midpoints: np.ndarray
    mass_full: np.ndarray
    stiff_full: np.ndarray
    weights: np.ndarray
    omega: np.ndarray
    a_nodes: np.ndarray
    grad: np.ndarray
    mid: np.ndarray
    embed: np.ndarray
    space_v: SpaceDescriptor
    space_h: SpaceDescriptor
    space_u: SpaceDescriptor
    space_y: SpaceDescriptor


def assemble_spaces(n_cells: int) -> SpaceBundle:
    """Assemble the uniform-grid forms and spaces for ``n_cells`` cells."""
    n = int(n_cells)
    if n < 2:
        raise ValueError(f"need at least two cells, got {n}")
    h = 1.0 / n
    nodes = np.linspace(0.0, 1.0, n + 1)
    midpoints = 0.5 * (nodes[:-1] + nodes[1:])
    i = np.arange(n)
    j = np.arange(n + 1)

    mass = np.zeros((n + 1, n + 1))
    mass[i, i + 1] = h / 6.0
    mass[i + 1, i] = h / 6.0
    diag = np.full(n + 1, 2.0 * h / 3.0)
    diag[0] = diag[-1] = h / 3.0
    mass[j, j] = diag

    stiff = np.zeros((n + 1, n + 1))
    stiff[i, i + 1] = -1.0 / h
    stiff[i + 1, i] = -1.0 / h
    sdiag = np.full(n + 1, 2.0 / h)
    sdiag[0] = sdiag[-1] = 1.0 / h
    stiff[j, j] = sdiag

    weights = mass.sum(axis=1)
    omega = weights / weights.sum()

    # Column k represents the k-th increment coordinate: the hat at node
    # k+1 minus its weighted mean, so every represented field integrates
    # to zero exactly.
    a_nodes = np.vstack([np.zeros((1, n)), np.eye(n)]) - np.outer(
        np.ones(n + 1), omega[1:]
    )

    grad = (np.eye(n) - np.eye(n, k=-1)) / h

    avg = np.zeros((n, n + 1))
    avg[i, i] = 0.5
    avg[i, i + 1] = 0.5
    mid = avg @ a_nodes

    # The stiffness form annihilates constants, so on increment
    # coordinates it is exactly the trailing principal submatrix.
    gram_v = stiff[1:, 1:].copy()
    gram_h = a_nodes.T @ mass @ a_nodes
    gram_h = 0.5 * (gram_h + gram_h.T)

    space_v = SpaceDescriptor(n, gram_v, "zero-mean P1, gradient inner product")
    space_h = SpaceDescriptor(n, gram_h, "zero-mean P1, L2 inner product")
    space_u = SpaceDescriptor(n, gram_v, "clamped P1 displacements, strain energy")
    space_y = SpaceDescriptor(n, h * np.eye(n), "P0 strains, L2 inner product")
    embed = np.eye(n)

    for arr in (nodes, midpoints, mass, stiff, weights, omega, a_nodes, grad, mid, embed):
        arr.setflags(write=False)
    return SpaceBundle(
        n_cells=n,
        h=h,
        nodes=nodes,
        midpoints=midpoints,
        mass_full=mass,
        stiff_full=stiff,
        weights=weights,
        omega=omega,
        a_nodes=a_nodes,
        grad=grad,
        mid=mid,
        embed=embed,
        space_v=space_v,
        space_h=space_h,
        space_u=space_u,
        space_y=space_y,
    )


@dataclass(frozen=True)
class Model:
    """A configuration bound to its grid, constants, and operators."""

    config: ModelConfig
    bundle: SpaceBundle
    family: FamilyConstants
    constants: CouplingConstants
    evo: EvolutionConstants
    poincare: float

    # --- coordinate maps -------------------------------------------------

    def nodal_values(self, c) -> np.ndarray:
        """Nodal values of the zero-mean representative, (..., n+1)."""
        return np.asarray(c, dtype=float) @ self.bundle.a_nodes.T

    def reduced_coords(self, v) -> np.ndarray:
        """Increment coordinates of nodal values (constant shifts drop out)."""
        v = np.asarray(v, dtype=float)
        return v[..., 1:] - v[..., :1]

    def cell_gradients(self, c) -> np.ndarray:
        return np.asarray(c, dtype=float) @ self.bundle.grad.T

    def cell_midvals(self, c) -> np.ndarray:
        return np.asarray(c, dtype=float) @ self.bundle.mid.T

    def strain_of_displacement(self, disp) -> np.ndarray:
        """Cell strains of a clamped displacement (nodal values 1..n)."""
        return np.asarray(disp, dtype=float) @ self.bundle.grad.T

    # --- constitutive laws (pointwise, per cell) ---------------------------

    def flux_law(self, grad_u, strain, state):
        cfg = self.config
        return cfg.a1 * grad_u + cfg.d1 * strain + cfg.c1 * np.tanh(state)

    def bulk_law(self, grad_u, strain, state):
        cfg = self.config
        return cfg.a2 * grad_u + cfg.d2 * strain + cfg.c2 * np.tanh(state)

    def stress_law(self, strain, grad_u, state):
        cfg = self.config
        return cfg.k0 * strain + cfg.d0 * grad_u + cfg.gamma0 * np.tanh(state)

    # --- assembled operators ----------------------------------------------

    def phase_load_nodal(self, x1, x2, y) -> np.ndarray:
        """Flux/bulk load against the projected hat basis, all n+1 nodes.

        The flux pairs against hat gradients (a telescoping difference of
        cell fluxes), the bulk against midpoint hat values; projecting
        onto the zero-mean basis subtracts the weighted total, so the
        result annihilates constants exactly.
        """
        p1 = self.cell_gradients(x1)
        m2 = self.cell_midvals(x2)
        y = np.asarray(y, dtype=float)
        flux = self.flux_law(p1, y, m2)
        bulk = self.bulk_law(p1, y, m2)
        pad = [(0, 0)] * (flux.ndim - 1) + [(1, 1)]
        fpad = np.pad(flux, pad)
        load = fpad[..., :-1] - fpad[..., 1:]
        bpad = np.pad(bulk, pad)
        load = load + 0.5 * self.bundle.h * (bpad[..., :-1] + bpad[..., 1:])
        total = load.sum(axis=-1, keepdims=True)
        return load - self.bundle.omega * total

    def phase_dual(self, x1, x2, y) -> np.ndarray:
        """Outer operator of the eliminated pair, reduced dual coordinates."""
        return self.phase_load_nodal(x1, x2, y)[..., 1:]

    def strain_dual(self, x1, x2, y) -> np.ndarray:
        """Stress residual as a dual on the strain space (cell measure h)."""
        p1 = self.cell_gradients(x1)
        m2 = self.cell_midvals(x2)
        return self.bundle.h * self.stress_law(np.asarray(y, dtype=float), p1, m2)

    @cached_property
    def coupled_system(self) -> CoupledSystem:
        return CoupledSystem(
            outer=self.phase_dual,
            inner=self.strain_dual,
            space_x=self.bundle.space_v,
            space_y=self.bundle.space_y,
            constants=self.constants,
            inner_rhs=DualVector(np.zeros(self.bundle.space_y.dim), self.bundle.space_y),
            inner_lipschitz=self.config.k0,
            vectorized=True,
        )

    def solve_strain(self, c, tol: float = 1e-12):
        """Equilibrium strain for one phase state; returns (strain, report)."""
        return eliminate(self.coupled_system, c, c, tol=tol)

    def solve_strain_batch(self, cs, tol: float = 1e-12):
        """Equilibrium strains for a stack of states; returns (strains, residuals)."""
        cs = np.asarray(cs, dtype=float)
        return _eliminate_stack(self.coupled_system, cs, cs, tol)

    # --- potential part -----------------------------------------------------

    def potential_dual(self, c) -> np.ndarray:
        """Dual of the quadratic potential (an exact mass pairing)."""
        return self.config.lambda_phi * (
            np.asarray(c, dtype=float) @ self.bundle.space_h.gram
        )

    def potential_value(self, c):
        c = np.asarray(c, dtype=float)
        gram = self.bundle.space_h.gram
        return 0.5 * self.config.lambda_phi * np.einsum("...i,ij,...j->...", c, gram, c)

    def mass_mean(self, c):
        """Integral of the represented field; zero by construction."""
        return self.nodal_values(c) @ self.bundle.weights

    # --- evolution ------------------------------------------------------------

    @cached_property
    def evolution_spaces(self) -> EvolutionSpaces:
        return EvolutionSpaces(
            space_v=self.bundle.space_v,
            space_h=self.bundle.space_h,
            embed=self.bundle.embed,
            f_mat=self.config.mobility * np.array(self.bundle.space_v.gram),
            mu=self.config.mu,
        )

    @cached_property
    def picard_matrix(self) -> np.ndarray:
        """Fixed SPD step matrix: the potential pairing plus the leading flux."""
        return self.config.lambda_phi * np.array(
            self.bundle.space_h.gram
        ) + self.config.a1 * np.array(self.bundle.space_v.gram)

    def initial_state(self) -> np.ndarray:
        cfg = self.config
        profile = cfg.amplitude * np.cos(cfg.mode * np.pi * self.bundle.nodes)
        profile = project_zero_mean(self.bundle.weights, profile)
        return self.reduced_coords(profile)

    def evolution_problem(self, inner_tol: float = 1e-12) -> EvolutionProblem:
        """Implicit-Euler problem for this configuration.

        Each call creates a fresh eliminated operator with its own
        warm-start cache, so concurrent runs must not share the returned
        problem.
        """
        op = ReducedOperator(self.coupled_system, inner_tol=inner_tol)
        zero = np.zeros(self.bundle.space_v.dim)
        zero.setflags(write=False)

        def reduced(t, u):
            return op.apply(u).coords

        return EvolutionProblem(
            spaces=self.evolution_spaces,
            monotone_part=self.potential_dual,
            reduced_part=reduced,
            forcing=lambda t: zero,
            initial=self.initial_state(),
            t_end=self.config.t_end,
            n_steps=self.config.n_steps,
            mono_alpha=self.evo.mono_alpha,
            mono_lipschitz=self.evo.mono_lipschitz,
            picard_matrix=self.picard_matrix,
        )

    # --- modal rates ------------------------------------------------------------

    def _require_decoupled(self):
        if not self.config.is_decoupled_linear:
            raise ValueError(
                "modal decay rates are defined only for the decoupled linear "
                "configuration (a2, c1, c2, d1, d2, d0, gamma0 all zero)"
            )

    def dispersion_rate(self, k: int | None = None) -> float:
        """Continuum decay rate of cosine mode ``k`` (defaults to the
        configured initial mode)."""
        self._require_decoupled()
        cfg = self.config
        k = cfg.mode if k is None else int(k)
        nu = (k * math.pi) ** 2
        return (
            cfg.mobility
            * nu
            * (cfg.lambda_phi + cfg.a1 * nu)
            / (1.0 + cfg.mobility * cfg.mu * nu)
        )

    def discrete_decay_rate(self, k: int | None = None) -> float:
        """Exact decay rate of mode ``k`` for the spatial discretization.

        The interpolated cosine is an exact eigenvector of the assembled
        stiffness/mass pencil, with eigenvalue
        (6 / h^2) (1 - cos(k pi h)) / (2 + cos(k pi h)).
        """
        self._require_decoupled()
        cfg = self.config
        k = cfg.mode if k is None else int(k)
        theta = k * math.pi * self.bundle.h
        lam = (6.0 / self.bundle.h**2) * (1.0 - math.cos(theta)) / (2.0 + math.cos(theta))
        return (
            cfg.mobility
            * lam
            * (cfg.lambda_phi + cfg.a1 * lam)
            / (1.0 + cfg.mobility * cfg.mu * lam)
        )


def build_model(config: ModelConfig) -> Model:
    """Assemble the grid and validate the coupling constants for ``config``.

    Raises ``ValueError`` when a monotonicity modulus is nonpositive
    (the hypothesis checks report the same conditions without raising).
    """
    bundle = assemble_spaces(config.n_cells)
    poincare = poincare_constant(bundle.space_v, bundle.space_h, bundle.embed)
    family = derive_family_constants(config)
    constants = coupling_constants(family, poincare)
    evo = evolution_constants(config, family, poincare)
    return Model(
        config=config,
        bundle=bundle,
        family=family,
        constants=constants,
        evo=evo,
        poincare=poincare,
    )
