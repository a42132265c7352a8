"""Fixed-step solver and empirical moduli for strongly monotone operators.

The solver is the damped Richardson iteration

    y  <-  y - tau * gram^{-1} (B(y) - rhs),      tau = alpha / L**2,

which contracts the error with factor q = sqrt(1 - alpha**2 / L**2) per
step whenever B is alpha-strongly monotone and L-Lipschitz (alpha <= L).
Residuals are measured in the dual norm sqrt(r @ gram^{-1} @ r).  The
operator must be radially continuous along the iteration path; this is a
documented precondition, not something the solver can verify.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .spaces import DualVector, SpaceDescriptor

__all__ = [
    "MonotoneProblem",
    "SolveReport",
    "ConvergenceError",
    "solve_strongly_monotone",
    "PairSampler",
    "estimate_monotonicity",
    "estimate_lipschitz",
]


class ConvergenceError(RuntimeError):
    """Raised by callers when a solve must succeed; carries the report."""

    def __init__(self, message: str, report: "SolveReport"):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class MonotoneProblem:
    """A strongly monotone equation ``B(y) = rhs`` with known moduli."""

    operator: Callable[[np.ndarray], DualVector]
    alpha: float
    lipschitz: float
    rhs: DualVector
    space: SpaceDescriptor

    def __post_init__(self):
        if not (self.alpha > 0.0):
            raise ValueError(f"monotonicity constant must be positive, got {self.alpha}")
        if self.lipschitz < self.alpha:
            raise ValueError(
                f"Lipschitz constant {self.lipschitz} below monotonicity constant {self.alpha}"
            )


@dataclass(frozen=True)
class SolveReport:
    solution: np.ndarray
    iterations: int
    final_residual: float
    converged: bool
    contraction_estimate: float


def solve_strongly_monotone(
    problem: MonotoneProblem,
    y_init: Optional[np.ndarray] = None,
    tol: float = 1e-10,
    max_iter: int = 10_000,
) -> SolveReport:
    """Run the damped Richardson iteration until the dual residual <= tol.

    Returns a report with ``converged=False`` after ``max_iter`` updates
    instead of raising; non-finite operator output raises ValueError.
    ``iterations`` counts updates actually applied.
    """
    if not (tol > 0.0):
        raise ValueError("tol must be positive")
    space = problem.space
    if y_init is None:
        y = np.zeros(space.dim)
    else:
        y = np.array(y_init, dtype=float)
        if y.shape != (space.dim,):
            raise ValueError(f"y_init has shape {y.shape}, expected ({space.dim},)")
    tau = problem.alpha / problem.lipschitz**2
    ratio = problem.alpha / problem.lipschitz
    q = math.sqrt(max(1.0 - ratio * ratio, 0.0))
    rhs = problem.rhs.coords
    residual = math.inf
    for k in range(max_iter + 1):
        r = problem.operator(y).coords - rhs
        if not np.all(np.isfinite(r)):
            raise ValueError("operator returned non-finite values")
        r_sol = space.solve_gram(r)
        residual = math.sqrt(max(float(r @ r_sol), 0.0))
        if residual <= tol:
            return SolveReport(y, k, residual, True, q)
        if k == max_iter:
            break
        y = y - tau * r_sol
    return SolveReport(y, max_iter, residual, False, q)


class PairSampler:
    """Seeded source of sample vectors and well-separated vector pairs.

    Draws are standard normal scaled by ``amplitude``; pairs closer than
    ``min_separation`` in the space norm are redrawn so difference
    quotients stay well defined.  Deterministic given the seed.
    """

    def __init__(
        self,
        space: SpaceDescriptor,
        seed: int,
        amplitude: float = 1.0,
        min_separation: float = 1e-12,
    ):
        if not (amplitude > 0.0):
            raise ValueError("amplitude must be positive")
        self.space = space
        self.amplitude = float(amplitude)
        self.min_separation = float(min_separation)
        self._rng = np.random.default_rng(seed)

    def vector(self) -> np.ndarray:
        return self.amplitude * self._rng.standard_normal(self.space.dim)

    def pair(self) -> tuple[np.ndarray, np.ndarray]:
        while True:
            y1 = self.vector()
            y2 = self.vector()
            if self.space.norm(y1 - y2) >= self.min_separation:
                return y1, y2

    def pair_stack(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """n pairs at once, shape (n, dim) each, with the same separation rule."""
        if n < 1:
            raise ValueError("n must be at least 1")
        dim = self.space.dim
        y1 = self.amplitude * self._rng.standard_normal((n, dim))
        y2 = self.amplitude * self._rng.standard_normal((n, dim))
        gram = np.array(self.space.gram)
        while True:
            d = y1 - y2
            close = np.einsum("ij,jk,ik->i", d, gram, d) < self.min_separation**2
            if not close.any():
                return y1, y2
            m = int(close.sum())
            y1[close] = self.amplitude * self._rng.standard_normal((m, dim))
            y2[close] = self.amplitude * self._rng.standard_normal((m, dim))


def estimate_monotonicity(
    op: Callable[[np.ndarray], DualVector],
    space: SpaceDescriptor,
    sampler: PairSampler,
    n: int,
) -> float:
    """Smallest sampled difference quotient ``<B(y1)-B(y2), y1-y2> / |y1-y2|^2``.

    A lower bound witness for the monotonicity modulus: it approaches the
    true constant from above as ``n`` grows and never undercuts it.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    best = math.inf
    for _ in range(n):
        y1, y2 = sampler.pair()
        d = y1 - y2
        val = float((op(y1).coords - op(y2).coords) @ d) / space.inner(d, d)
        best = min(best, val)
    return best


def estimate_lipschitz(
    op: Callable[[np.ndarray], DualVector],
    space: SpaceDescriptor,
    sampler: PairSampler,
    n: int,
) -> float:
    """Largest sampled ratio ``|B(y1)-B(y2)|_dual / |y1-y2|`` (grows toward L)."""
    if n < 1:
        raise ValueError("n must be at least 1")
    best = 0.0
    for _ in range(n):
        y1, y2 = sampler.pair()
        d = y1 - y2
        val = space.dual_norm(op(y1).coords - op(y2).coords) / space.norm(d)
        best = max(best, val)
    return best
