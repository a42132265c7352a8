"""Implicit time stepping for operator equations with a degenerate pivot term.

The time derivative is weighted by the symmetric positive semidefinite
operator

    E = mu * I + I F^-1 I,        I = embed^T G_H embed,

where F is an SPD kinetic form on the configuration space V and G_H the
Gram matrix of the pivot space H.  E admits the factorization
``E = K^T G_H K`` with ``K = sqrt(E1) . embed`` and
``E1 = mu Id + embed F^-1 embed^T G_H`` self-adjoint in the H inner
product; consequently the energy identity

    <E (a - b), a> = 1/2 (<E a, a> - <E b, b> + <E (a - b), a - b>)

holds exactly, which is what makes the implicit Euler scheme

    (1/dt) E (u - u_prev) + A(u) + B(t, u) = f(t)

dissipative for monotone A and B.  A is the (time-independent) potential
part, B the lower-order reduced part.  Each step is a strongly monotone
equation for u, solved either by damped Richardson iteration (robust,
slow for stiff steps) or by Picard iteration with a fixed factored
matrix (fast when the remainder beyond that matrix has a small Lipschitz
constant).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve, eigh

from .monotone import MonotoneProblem, solve_strongly_monotone
from .spaces import DualVector, SpaceDescriptor, sqrt_spd

__all__ = [
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


@dataclass(frozen=True)
class EvolutionSpaces:
    """Configuration space V, pivot space H, and the kinetic form between them.

    ``embed`` holds the H coordinates of the V basis (columns), ``f_mat``
    the SPD kinetic form on V, and ``mu >= 0`` the weight of the direct
    pivot pairing in the time-derivative operator.  ``mu = 0`` is the
    degenerate case: E is then only as invertible as I F^-1 I.
    """

    space_v: SpaceDescriptor
    space_h: SpaceDescriptor
    embed: np.ndarray
    f_mat: np.ndarray
    mu: float = 0.0

    def __post_init__(self):
        embed = np.array(self.embed, dtype=float)
        f_mat = np.array(self.f_mat, dtype=float)
        if embed.shape != (self.space_h.dim, self.space_v.dim):
            raise ValueError("embed must map V coordinates into H coordinates")
        if f_mat.shape != (self.space_v.dim, self.space_v.dim):
            raise ValueError("f_mat must be square on V")
        if not np.allclose(f_mat, f_mat.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(f_mat).max())):
            raise ValueError("kinetic form must be symmetric")
        if self.mu < 0.0:
            raise ValueError("mu must be nonnegative")
        f_mat = 0.5 * (f_mat + f_mat.T)
        embed.flags.writeable = False
        f_mat.flags.writeable = False
        object.__setattr__(self, "embed", embed)
        object.__setattr__(self, "f_mat", f_mat)
        self._f_cho  # fail fast if the kinetic form is not positive definite

    @cached_property
    def _f_cho(self):
        try:
            return cho_factor(np.array(self.f_mat))
        except np.linalg.LinAlgError as exc:
            raise ValueError("kinetic form must be positive definite") from exc

    @cached_property
    def i_mat(self) -> np.ndarray:
        mat = self.embed.T @ np.array(self.space_h.gram) @ self.embed
        mat = 0.5 * (mat + mat.T)
        mat.flags.writeable = False
        return mat

    @cached_property
    def e_mat(self) -> np.ndarray:
        """The time-derivative weight E = mu * I + I F^-1 I (V -> V-dual)."""
        i_mat = np.array(self.i_mat)
        mat = self.mu * i_mat + i_mat @ cho_solve(self._f_cho, i_mat)
        mat = 0.5 * (mat + mat.T)
        mat.flags.writeable = False
        return mat

    @cached_property
    def e_norm(self) -> float:
        """Operator norm of E relative to the V norm (largest generalized eigenvalue)."""
        vals = eigh(
            np.array(self.e_mat), np.array(self.space_v.gram), eigvals_only=True
        )
        return float(vals[-1])

    @cached_property
    def k_operator(self) -> np.ndarray:
        """K with E = K^T G_H K, built as the H-self-adjoint root of E1 times embed."""
        g_h = np.array(self.space_h.gram)
        e1 = self.mu * np.eye(self.space_h.dim) + self.embed @ cho_solve(
            self._f_cho, self.embed.T @ g_h
        )
        root = sqrt_spd(self.space_h, e1)
        return root @ self.embed

    def apply_e(self, u) -> np.ndarray:
        return np.array(self.e_mat) @ np.asarray(u, dtype=float)

    def energy(self, u) -> float:
        """The quadratic form <E u, u> = |K u|_H^2."""
        u = np.asarray(u, dtype=float)
        return float(u @ (np.array(self.e_mat) @ u))


def energy_identity_check(e_mat, a, b) -> float:
    """Residual of the pivot energy identity; zero (to rounding) for symmetric E.

    Returns |<E (a - b), a> - (  <E a, a> - <E b, b> + <E (a - b), a - b>  ) / 2|.
    """
    e_mat = np.asarray(e_mat, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = a - b
    lhs = float(d @ (e_mat @ a))
    rhs = 0.5 * (
        float(a @ (e_mat @ a)) - float(b @ (e_mat @ b)) + float(d @ (e_mat @ d))
    )
    return abs(lhs - rhs)


@dataclass(frozen=True)
class EvolutionProblem:
    """Implicit Euler data on a uniform grid over [0, t_end].

    ``monotone_part(u)`` is the leading monotone operator (from a convex
    potential), ``reduced_part(t, u)`` the lower-order operator obtained
    by eliminating auxiliary variables; both return V-dual coordinates.
    ``mono_alpha`` must lower-bound the monotonicity modulus of their sum
    in the V norm and be positive, since both step solvers rest on it;
    ``mono_lipschitz`` upper-bounds the Lipschitz modulus.
    ``picard_matrix`` optionally supplies a fixed SPD approximation of
    the spatial linearization: the Picard path then solves with
    E/dt + picard_matrix factored once, iterating only on the remainder.
    """

    spaces: EvolutionSpaces
    monotone_part: Callable[[np.ndarray], np.ndarray]
    reduced_part: Callable[[float, np.ndarray], np.ndarray]
    forcing: Callable[[float], np.ndarray]
    initial: np.ndarray
    t_end: float
    n_steps: int
    mono_alpha: float
    mono_lipschitz: float
    picard_matrix: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.t_end <= 0.0 or self.n_steps < 1:
            raise ValueError("need t_end > 0 and at least one step")
        if not (self.mono_alpha > 0.0):
            raise ValueError(
                "spatial operator monotonicity must be positive; check the "
                "structural hypotheses of the model before stepping"
            )
        if self.mono_lipschitz < self.mono_alpha:
            raise ValueError("mono_lipschitz below mono_alpha")
        initial = np.array(self.initial, dtype=float)
        if initial.shape != (self.spaces.space_v.dim,):
            raise ValueError("initial state has wrong dimension")
        initial.flags.writeable = False
        object.__setattr__(self, "initial", initial)

    def spatial(self, t: float, u: np.ndarray) -> np.ndarray:
        """A(u) + B(t, u) in dual coordinates."""
        return np.asarray(self.monotone_part(u), dtype=float) + np.asarray(
            self.reduced_part(t, u), dtype=float
        )

    @property
    def dt(self) -> float:
        return self.t_end / self.n_steps


@dataclass(frozen=True)
class StepResult:
    state: np.ndarray
    iterations: int
    residual: float
    method: str


class DivergenceError(RuntimeError):
    """A step iteration failed to contract.

    Usually means the supplied monotonicity constants do not actually
    hold for the operator (structural hypotheses violated) or the Picard
    remainder is too large for the fixed matrix.
    """


def _step_rhs(problem: EvolutionProblem, t_next: float, u_prev: np.ndarray, dt: float):
    return np.asarray(problem.forcing(t_next), dtype=float) + problem.spaces.apply_e(
        u_prev
    ) / dt


def _picard_step(
    problem: EvolutionProblem,
    u_prev: np.ndarray,
    t_next: float,
    dt: float,
    tol: float,
    max_iter: int,
    u_init: Optional[np.ndarray],
    step_cho=None,
) -> StepResult:
    spaces = problem.spaces
    e_mat = np.array(spaces.e_mat)
    if step_cho is None:
        step_cho = cho_factor(
            e_mat / dt + np.asarray(problem.picard_matrix, dtype=float)
        )
    rhs = _step_rhs(problem, t_next, u_prev, dt)
    u = np.array(u_prev if u_init is None else u_init, dtype=float)
    gram = spaces.space_v
    best = math.inf
    res = math.inf
    for k in range(max_iter + 1):
        r = e_mat @ u / dt + problem.spatial(t_next, u) - rhs
        if not np.all(np.isfinite(r)):
            raise DivergenceError("step iteration produced non-finite values")
        res = gram.dual_norm(r)
        if res <= tol:
            return StepResult(state=u, iterations=k, residual=res, method="picard")
        if res > 1e4 * max(best, 1.0):
            raise DivergenceError(
                f"step residual grew to {res:.3e}; the fixed-matrix remainder "
                "exceeds its contraction budget"
            )
        if k == max_iter:
            break
        best = min(best, res)
        u = u - cho_solve(step_cho, r)
    raise DivergenceError(
        f"step stalled at residual {res:.3e} after {max_iter} iterations"
    )


def _richardson_step(
    problem: EvolutionProblem,
    u_prev: np.ndarray,
    t_next: float,
    dt: float,
    tol: float,
    max_iter: int,
    u_init: Optional[np.ndarray],
) -> StepResult:
    spaces = problem.spaces
    e_mat = np.array(spaces.e_mat)
    rhs = _step_rhs(problem, t_next, u_prev, dt)
    step_problem = MonotoneProblem(
        operator=lambda u: DualVector(
            e_mat @ u / dt + problem.spatial(t_next, u), spaces.space_v
        ),
        alpha=problem.mono_alpha,
        lipschitz=spaces.e_norm / dt + problem.mono_lipschitz,
        rhs=DualVector(rhs, spaces.space_v),
        space=spaces.space_v,
    )
    try:
        report = solve_strongly_monotone(
            step_problem,
            y_init=np.array(u_prev if u_init is None else u_init, dtype=float),
            tol=tol,
            max_iter=max_iter,
        )
    except ValueError as exc:
        raise DivergenceError(
            f"step iteration diverged ({exc}); check the structural hypotheses"
        ) from exc
    if not report.converged:
        raise DivergenceError(
            f"step stalled at residual {report.final_residual:.3e}; check the "
            "structural hypotheses or supply a Picard matrix"
        )
    return StepResult(
        state=report.solution,
        iterations=report.iterations,
        residual=report.final_residual,
        method="richardson",
    )


def implicit_euler_step(
    problem: EvolutionProblem,
    u_prev,
    t_next: float,
    dt: float,
    tol: float = 1e-10,
    max_iter: int = 1_000_000,
    method: str = "auto",
    u_init=None,
) -> StepResult:
    """Solve one step (1/dt) E (u - u_prev) + A(u) + B(t, u) = f(t).

    ``method`` is "picard", "richardson", or "auto" (Picard when the
    problem carries a fixed matrix, Richardson otherwise).  The residual
    is the V-dual norm of the step equation.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if not (tol > 0.0):
        raise ValueError("tol must be positive")
    u_prev = np.asarray(u_prev, dtype=float)
    if method == "auto":
        method = "picard" if problem.picard_matrix is not None else "richardson"
    if method == "picard":
        if problem.picard_matrix is None:
            raise ValueError("picard method requires problem.picard_matrix")
        return _picard_step(problem, u_prev, t_next, dt, tol, max_iter, u_init)
    if method == "richardson":
        return _richardson_step(problem, u_prev, t_next, dt, tol, max_iter, u_init)
    raise ValueError(f"unknown step method {method!r}")


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    iterations: np.ndarray
    residuals: np.ndarray
    method: str

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


class StepError(RuntimeError):
    """A step inside a run failed; carries the trajectory computed so far."""

    def __init__(self, message: str, partial: Trajectory, step_index: int):
        super().__init__(message)
        self.partial = partial
        self.step_index = step_index


def run(
    problem: EvolutionProblem,
    tol: float = 1e-10,
    max_iter: int = 1_000_000,
    method: str = "auto",
) -> Trajectory:
    """March the implicit Euler scheme over the problem's uniform time grid."""
    n_steps = problem.n_steps
    dt = problem.dt
    times = np.linspace(0.0, problem.t_end, n_steps + 1)
    dim = problem.spaces.space_v.dim
    states = np.empty((n_steps + 1, dim))
    states[0] = problem.initial
    iterations = np.zeros(n_steps, dtype=int)
    residuals = np.zeros(n_steps)

    if method == "auto":
        method = "picard" if problem.picard_matrix is not None else "richardson"
    step_cho = None
    if method == "picard":
        if problem.picard_matrix is None:
            raise ValueError("picard method requires problem.picard_matrix")
        step_cho = cho_factor(
            np.array(problem.spaces.e_mat) / dt
            + np.asarray(problem.picard_matrix, dtype=float)
        )

    for k in range(n_steps):
        try:
            if method == "picard":
                result = _picard_step(
                    problem, states[k], times[k + 1], dt, tol, max_iter, None, step_cho
                )
            else:
                result = _richardson_step(
                    problem, states[k], times[k + 1], dt, tol, max_iter, None
                )
        except DivergenceError as exc:
            partial = Trajectory(
                times=times[: k + 1],
                states=states[: k + 1].copy(),
                iterations=iterations[:k].copy(),
                residuals=residuals[:k].copy(),
                method=method,
            )
            raise StepError(f"step {k + 1} failed: {exc}", partial, k + 1) from exc
        states[k + 1] = result.state
        iterations[k] = result.iterations
        residuals[k] = result.residual
    return Trajectory(
        times=times,
        states=states,
        iterations=iterations,
        residuals=residuals,
        method=method,
    )


@dataclass(frozen=True)
class DissipationReport:
    """Per-step energy bookkeeping of a trajectory.

    For each step, pairing the step equation with du = u - u_prev and
    using the exact energy identity gives

        (energies[k+1] - energies[k]) + quadratic_terms[k] / 2
            + dt * (monotone_pairings[k] + reduced_pairings[k])
            = dt * forcing_pairings[k] + O(residual),

    where energies are <E u, u> / 2, quadratic_terms are <E du, du> >= 0,
    and the pairings are taken against du's endpoint state u.  ``gaps``
    holds each step's violation beyond the solver-residual allowance;
    steps with a positive gap are flagged.
    """

    n_steps: int
    energies: np.ndarray
    quadratic_terms: np.ndarray
    monotone_pairings: np.ndarray
    reduced_pairings: np.ndarray
    forcing_pairings: np.ndarray
    gaps: np.ndarray
    flagged_steps: np.ndarray
    passed: bool


def dissipation_report(
    trajectory: Trajectory, problem: EvolutionProblem, tol: float = 1e-10
) -> DissipationReport:
    spaces = problem.spaces
    e_mat = np.array(spaces.e_mat)
    n = len(trajectory.times) - 1
    dt = float(trajectory.times[1] - trajectory.times[0]) if n else 0.0
    energies = 0.5 * np.einsum(
        "ij,jk,ik->i", trajectory.states, e_mat, trajectory.states
    )
    quads = np.zeros(n)
    mono_pairs = np.zeros(n)
    red_pairs = np.zeros(n)
    force_pairs = np.zeros(n)
    gaps = np.zeros(n)
    for k in range(n):
        t = float(trajectory.times[k + 1])
        u = trajectory.states[k + 1]
        du = u - trajectory.states[k]
        quads[k] = float(du @ (e_mat @ du))
        mono_pairs[k] = float(np.asarray(problem.monotone_part(u), dtype=float) @ u)
        red_pairs[k] = float(np.asarray(problem.reduced_part(t, u), dtype=float) @ u)
        force_pairs[k] = float(np.asarray(problem.forcing(t), dtype=float) @ u)
        # Pairing the step equation with the endpoint state u and using the
        # energy identity on the E-term, the balance must close to within
        # the solver residual paired against u.
        weak = (
            (energies[k + 1] - energies[k])
            + 0.5 * quads[k]
            + dt * (mono_pairs[k] + red_pairs[k] - force_pairs[k])
        )
        allowance = (
            10.0
            * max(trajectory.residuals[k], tol)
            * dt
            * max(1.0, spaces.space_v.norm(u))
        )
        gaps[k] = abs(weak) - allowance
    flagged = np.nonzero(gaps > 0.0)[0]
    return DissipationReport(
        n_steps=n,
        energies=energies,
        quadratic_terms=quads,
        monotone_pairings=mono_pairs,
        reduced_pairings=red_pairs,
        forcing_pairings=force_pairs,
        gaps=gaps,
        flagged_steps=flagged,
        passed=flagged.size == 0 and bool(np.all(quads >= -1e-13)),
    )
