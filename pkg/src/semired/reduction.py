"""Elimination of the strongly monotone half of a coupled operator pair.

A coupled system consists of two operators on spaces X (retained) and Y
(eliminated),

    outer(x1, x2, y) -> X-dual,      inner(x1, x2, y) -> Y-dual,

where the first slot is the leading (monotone) argument and the second a
lower-order argument.  When ``inner`` is strongly monotone in y, the
equation ``inner(x1, x2, y) = inner_rhs`` has a unique solution
``y = R(x1, x2)``, and substituting it into ``outer`` yields the reduced
operator ``S(x1, x2) = outer(x1, x2, R(x1, x2))``.  With the four moduli
in :class:`CouplingConstants` the reduction satisfies

    |R(x1, x2) - R(x2, x2)|_Y            <= (beta_y / alpha_y) |x1 - x2|_X
    <S(x1, x2) - S(x2, x2), x1 - x2>     >= ((alpha_x * alpha_y
                                              - beta_x * beta_y) / alpha_y)
                                            * |x1 - x2|_X^2

so the diagonal map x -> S(x, x) is semimonotone whenever
``alpha_x * alpha_y >= beta_x * beta_y``.  ``verify_reduction_estimates``
and ``check_semimonotone`` probe both facts by sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .monotone import MonotoneProblem, SolveReport, solve_strongly_monotone, PairSampler
from .spaces import DualVector, SpaceDescriptor

__all__ = [
    "CouplingConstants",
    "CoupledSystem",
    "EliminationError",
    "eliminate",
    "ReducedValue",
    "ReducedOperator",
    "coupled_residuals",
    "translate",
    "EstimateReport",
    "verify_reduction_estimates",
    "SemimonotoneReport",
    "check_semimonotone",
    "ray_continuity_check",
]


@dataclass(frozen=True)
class CouplingConstants:
    """Moduli of a coupled pair.

    alpha_x  strong monotonicity of ``outer`` in its leading slot
    beta_x   Lipschitz modulus of ``outer`` in the eliminated variable
    alpha_y  strong monotonicity of ``inner`` in the eliminated variable
    beta_y   Lipschitz modulus of ``inner`` in its leading slot

    Any valid bounds work (alpha as lower bounds, beta as upper bounds);
    sharper constants give sharper reduction estimates.
    """

    alpha_x: float
    beta_x: float
    alpha_y: float
    beta_y: float

    def __post_init__(self):
        if not (self.alpha_x > 0.0 and self.alpha_y > 0.0):
            raise ValueError("monotonicity constants must be positive")
        if self.beta_x < 0.0 or self.beta_y < 0.0:
            raise ValueError("Lipschitz moduli must be nonnegative")

    @property
    def product_ok(self) -> bool:
        """Whether alpha_x * alpha_y >= beta_x * beta_y (reduction admissible)."""
        return self.alpha_x * self.alpha_y >= self.beta_x * self.beta_y

    @property
    def reduction_lipschitz(self) -> float:
        """Bound on |R(x1,x2) - R(x2,x2)| / |x1 - x2|."""
        return self.beta_y / self.alpha_y

    @property
    def reduced_monotonicity(self) -> float:
        """Lower bound for the reduced difference quotient."""
        return (self.alpha_x * self.alpha_y - self.beta_x * self.beta_y) / self.alpha_y


@dataclass(frozen=True)
class CoupledSystem:
    """Operator pair plus the data needed to eliminate the Y unknown.

    ``outer`` and ``inner`` consume coordinate arrays ``(x1, x2, y)`` and
    return dual coordinate arrays on X resp. Y.  When ``vectorized`` is
    true they must also broadcast over stacked samples of shape
    ``(m, dim)`` per argument, returning ``(m, dim)`` duals; the sampling
    verifiers then run their elimination on whole blocks at once.
    ``inner_lipschitz`` bounds ``inner(x1, x2, .)`` in y and drives the
    inner solver's damping.
    """

    outer: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    inner: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    space_x: SpaceDescriptor
    space_y: SpaceDescriptor
    constants: CouplingConstants
    inner_rhs: DualVector
    inner_lipschitz: float
    vectorized: bool = False

    def __post_init__(self):
        if self.inner_lipschitz < self.constants.alpha_y:
            raise ValueError("inner_lipschitz below the inner monotonicity constant")

    def outer_dual(self, x1, x2, y) -> DualVector:
        return DualVector(np.asarray(self.outer(x1, x2, y), dtype=float), self.space_x)

    def inner_dual(self, x1, x2, y) -> DualVector:
        return DualVector(np.asarray(self.inner(x1, x2, y), dtype=float), self.space_y)


class EliminationError(RuntimeError):
    """Inner solve failed; carries the last solver report when available."""

    def __init__(self, message: str, report: Optional[SolveReport] = None):
        super().__init__(message)
        self.report = report


def eliminate(
    system: CoupledSystem,
    x1,
    x2,
    tol: float = 1e-12,
    y_init: Optional[np.ndarray] = None,
    max_iter: int = 100_000,
) -> tuple[np.ndarray, SolveReport]:
    """Solve ``inner(x1, x2, y) = inner_rhs`` for y (the map R).

    Returns the solution together with the solver report; raises
    :class:`EliminationError` if the inner iteration does not reach
    ``tol`` within ``max_iter`` updates.
    """
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    problem = MonotoneProblem(
        operator=lambda y: system.inner_dual(x1, x2, y),
        alpha=system.constants.alpha_y,
        lipschitz=system.inner_lipschitz,
        rhs=system.inner_rhs,
        space=system.space_y,
    )
    report = solve_strongly_monotone(problem, y_init=y_init, tol=tol, max_iter=max_iter)
    if not report.converged:
        raise EliminationError(
            f"inner solve stalled at residual {report.final_residual:.3e} "
            f"after {report.iterations} iterations (tol {tol:.1e})",
            report,
        )
    return report.solution, report


def _eliminate_stack(
    system: CoupledSystem,
    x1s: np.ndarray,
    x2s: np.ndarray,
    tol: float,
    max_iter: int = 100_000,
) -> tuple[np.ndarray, np.ndarray]:
    """Block Richardson elimination for vectorized systems.

    Same iteration and damping as :func:`eliminate`, applied to all
    samples simultaneously; stops when every sample's dual residual is
    below ``tol``.  Returns (solutions, final residuals).
    """
    space = system.space_y
    m = x1s.shape[0]
    y = np.zeros((m, space.dim))
    tau = system.constants.alpha_y / system.inner_lipschitz**2
    rhs = system.inner_rhs.coords
    res = np.full(m, np.inf)
    for k in range(max_iter + 1):
        r = np.asarray(system.inner(x1s, x2s, y), dtype=float) - rhs
        if not np.all(np.isfinite(r)):
            raise ValueError("operator returned non-finite values")
        r_sol = space.solve_gram_stack(r)
        res = np.sqrt(np.clip(np.einsum("ij,ij->i", r, r_sol), 0.0, None))
        if res.max() <= tol:
            return y, res
        if k == max_iter:
            break
        y = y - tau * r_sol
    raise EliminationError(
        f"block inner solve stalled at worst residual {res.max():.3e} (tol {tol:.1e})"
    )


@dataclass(frozen=True)
class ReducedValue:
    """Reduced operator value with the propagated inner-solve error bound."""

    value: DualVector
    error_bound: float
    inner_report: SolveReport


class ReducedOperator:
    """The reduced map ``x -> outer(x, x, R(x, x))`` with warm-started solves.

    The last inner solution is cached and reused as the next starting
    point; because the inner iteration converges to the same tolerance
    from any start, caching moves results by at most a small multiple of
    ``inner_tol``.  Evaluation is internally sequential — share an
    instance across threads only with ``warm_start=False``.
    """

    def __init__(
        self,
        system: CoupledSystem,
        inner_tol: float = 1e-12,
        inner_max_iter: int = 100_000,
        warm_start: bool = True,
    ):
        if not (inner_tol > 0.0):
            raise ValueError("inner_tol must be positive")
        self.system = system
        self.inner_tol = float(inner_tol)
        self.inner_max_iter = int(inner_max_iter)
        self.warm_start = bool(warm_start)
        self._cache: Optional[np.ndarray] = None

    def reset(self):
        self._cache = None

    def eliminate(self, x1, x2) -> np.ndarray:
        """The inner solution R(x1, x2) at this operator's tolerance."""
        y, _ = eliminate(
            self.system,
            x1,
            x2,
            tol=self.inner_tol,
            y_init=self._cache if self.warm_start else None,
            max_iter=self.inner_max_iter,
        )
        if self.warm_start:
            self._cache = y
        return y

    def apply_split(self, x1, x2) -> ReducedValue:
        """S(x1, x2) plus the error bound beta_x * residual / alpha_y."""
        y, report = eliminate(
            self.system,
            x1,
            x2,
            tol=self.inner_tol,
            y_init=self._cache if self.warm_start else None,
            max_iter=self.inner_max_iter,
        )
        if self.warm_start:
            self._cache = y
        constants = self.system.constants
        bound = constants.beta_x * report.final_residual / constants.alpha_y
        return ReducedValue(self.system.outer_dual(x1, x2, y), bound, report)

    def apply(self, x) -> DualVector:
        """Diagonal value S(x, x)."""
        return self.apply_split(x, x).value


def coupled_residuals(
    system: CoupledSystem, x, y, outer_rhs: DualVector
) -> tuple[float, float]:
    """Dual-norm residuals of both equations at (x, y)."""
    r_outer = (system.outer_dual(x, x, y) - outer_rhs).norm()
    r_inner = (system.inner_dual(x, x, y) - system.inner_rhs).norm()
    return r_outer, r_inner


def translate(op: Callable[[np.ndarray], object], shift) -> Callable[[np.ndarray], object]:
    """The shifted operator ``u -> op(u - shift)``."""
    shift = np.array(shift, dtype=float)

    def shifted(u):
        return op(np.asarray(u, dtype=float) - shift)

    return shifted


@dataclass(frozen=True)
class EstimateReport:
    """Sampled check of the two reduction estimates.

    ``lip_excess`` is the worst value of ratio - bound - slack (pass when
    <= 0); ``mono_deficit`` the worst of bound - slack - ratio.  Slack is
    ten times the inner-residual contamination of each sampled ratio plus
    a rounding floor proportional to the magnitudes entering the ratio —
    without the floor, instances whose bounds hold with equality would
    fail on noise of a few ulps.
    """

    n: int
    lip_bound: float
    lip_worst: float
    lip_excess: float
    mono_bound: float
    mono_worst: float
    mono_deficit: float
    passed: bool


def verify_reduction_estimates(
    system: CoupledSystem,
    sampler: PairSampler,
    n: int,
    inner_tol: float = 1e-12,
) -> EstimateReport:
    """Sample the reduction Lipschitz bound and the reduced monotonicity bound."""
    if n < 1:
        raise ValueError("n must be at least 1")
    constants = system.constants
    lip_bound = constants.reduction_lipschitz
    mono_bound = constants.reduced_monotonicity
    space_x, space_y = system.space_x, system.space_y

    lip_worst = 0.0
    lip_excess = -math.inf
    mono_worst = math.inf
    mono_deficit = -math.inf

    if system.vectorized:
        x1s, x2s = sampler.pair_stack(n)
        y12, res1 = _eliminate_stack(system, x1s, x2s, inner_tol)
        y22, res2 = _eliminate_stack(system, x2s, x2s, inner_tol)
        d = x1s - x2s
        seps = np.sqrt(np.einsum("ij,jk,ik->i", d, np.array(space_x.gram), d))
        dy = y12 - y22
        ynorms = np.sqrt(np.einsum("ij,jk,ik->i", dy, np.array(space_y.gram), dy))
        lip_ratios = ynorms / seps
        s12 = np.asarray(system.outer(x1s, x2s, y12), dtype=float)
        s22 = np.asarray(system.outer(x2s, x2s, y22), dtype=float)
        mono_ratios = np.einsum("ij,ij->i", s12 - s22, d) / seps**2
        y_err = (res1 + res2) / constants.alpha_y
        pair_scale = np.einsum("ij,ij->i", np.abs(s12) + np.abs(s22), np.abs(d))
        eps = np.finfo(float).eps
        lip_slack = 10.0 * y_err / seps + 256.0 * eps * (1.0 + lip_ratios)
        mono_slack = 10.0 * constants.beta_x * y_err / seps + 256.0 * eps * (
            1.0 + pair_scale / seps**2
        )
        lip_worst = float(lip_ratios.max())
        lip_excess = float((lip_ratios - lip_bound - lip_slack).max())
        mono_worst = float(mono_ratios.min())
        mono_deficit = float((mono_bound - mono_slack - mono_ratios).max())
    else:
        warm: Optional[np.ndarray] = None
        for _ in range(n):
            x1, x2 = sampler.pair()
            y12, rep1 = eliminate(system, x1, x2, tol=inner_tol, y_init=warm)
            y22, rep2 = eliminate(system, x2, x2, tol=inner_tol, y_init=y12)
            warm = y22
            d = x1 - x2
            sep = space_x.norm(d)
            lip_ratio = space_y.norm(y12 - y22) / sep
            s12 = system.outer(x1, x2, y12)
            s22 = system.outer(x2, x2, y22)
            mono_ratio = float((np.asarray(s12) - np.asarray(s22)) @ d) / sep**2
            y_err = (rep1.final_residual + rep2.final_residual) / constants.alpha_y
            pair_scale = float(
                (np.abs(np.asarray(s12)) + np.abs(np.asarray(s22))) @ np.abs(d)
            )
            eps = np.finfo(float).eps
            lip_worst = max(lip_worst, lip_ratio)
            lip_excess = max(
                lip_excess,
                lip_ratio
                - lip_bound
                - 10.0 * y_err / sep
                - 256.0 * eps * (1.0 + lip_ratio),
            )
            mono_worst = min(mono_worst, mono_ratio)
            mono_deficit = max(
                mono_deficit,
                mono_bound
                - 10.0 * constants.beta_x * y_err / sep
                - 256.0 * eps * (1.0 + pair_scale / sep**2)
                - mono_ratio,
            )

    return EstimateReport(
        n=n,
        lip_bound=lip_bound,
        lip_worst=lip_worst,
        lip_excess=lip_excess,
        mono_bound=mono_bound,
        mono_worst=mono_worst,
        mono_deficit=mono_deficit,
        passed=(lip_excess <= 0.0 and mono_deficit <= 0.0),
    )


@dataclass(frozen=True)
class SemimonotoneReport:
    """Sampled check of the defining inequality <S(x,x) - S(y,x), x - y> >= 0."""

    n: int
    worst: float
    excess: float
    passed: bool


def check_semimonotone(
    system: CoupledSystem,
    sampler: PairSampler,
    n: int,
    inner_tol: float = 1e-12,
) -> SemimonotoneReport:
    if n < 1:
        raise ValueError("n must be at least 1")
    constants = system.constants
    worst = math.inf
    excess = -math.inf

    if system.vectorized:
        xs, ys = sampler.pair_stack(n)
        yxx, res1 = _eliminate_stack(system, xs, xs, inner_tol)
        yyx, res2 = _eliminate_stack(system, ys, xs, inner_tol)
        d = xs - ys
        seps = np.sqrt(
            np.einsum("ij,jk,ik->i", d, np.array(system.space_x.gram), d)
        )
        sxx = np.asarray(system.outer(xs, xs, yxx), dtype=float)
        syx = np.asarray(system.outer(ys, xs, yyx), dtype=float)
        vals = np.einsum("ij,ij->i", sxx - syx, d)
        pair_scale = np.einsum("ij,ij->i", np.abs(sxx) + np.abs(syx), np.abs(d))
        eps = np.finfo(float).eps
        slack = (
            10.0 * constants.beta_x * (res1 + res2) / constants.alpha_y * seps
            + 256.0 * eps * (1.0 + pair_scale)
        )
        worst = float(vals.min())
        excess = float((-vals - slack).max())
    else:
        warm: Optional[np.ndarray] = None
        for _ in range(n):
            x, yv = sampler.pair()
            y_xx, rep1 = eliminate(system, x, x, tol=inner_tol, y_init=warm)
            y_yx, rep2 = eliminate(system, yv, x, tol=inner_tol, y_init=y_xx)
            warm = y_yx
            d = x - yv
            sep = system.space_x.norm(d)
            s_xx = np.asarray(system.outer(x, x, y_xx), dtype=float)
            s_yx = np.asarray(system.outer(yv, x, y_yx), dtype=float)
            val = float((s_xx - s_yx) @ d)
            pair_scale = float((np.abs(s_xx) + np.abs(s_yx)) @ np.abs(d))
            slack = (
                10.0
                * constants.beta_x
                * (rep1.final_residual + rep2.final_residual)
                / constants.alpha_y
                * sep
                + 256.0 * np.finfo(float).eps * (1.0 + pair_scale)
            )
            worst = min(worst, val)
            excess = max(excess, -val - slack)

    return SemimonotoneReport(n=n, worst=worst, excess=excess, passed=excess <= 0.0)


def ray_continuity_check(
    op: Callable[[np.ndarray], DualVector], x0, direction, scales
) -> np.ndarray:
    """Dual norms ``|op(x0 + s * direction) - op(x0)|`` for each scale s.

    Documented spot-check for continuity along a ray: for a continuous
    operator the values must decay to zero with the scales.
    """
    x0 = np.asarray(x0, dtype=float)
    direction = np.asarray(direction, dtype=float)
    base = op(x0)
    return np.array(
        [(op(x0 + float(s) * direction) - base).norm() for s in scales], dtype=float
    )
