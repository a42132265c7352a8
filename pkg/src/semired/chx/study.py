"""Step-refinement and modal-decay studies on a fixed grid.

The implicit Euler error at fixed final time is first order in the step
size, so halving the step count twice and comparing against a much
finer reference exposes the order as the least-squares slope of
log(error) against log(dt).  Pairwise ratios are deliberately not used:
with a reference at one sixteenth of the base step the consecutive
error ratios are 15/7 and 7/3, whose two-point orders straddle the
asymptotic value, while the three-point fit lands at ln(5)/(2 ln 2).

On decoupled linear configurations the same runs also yield the modal
decay rate as the slope of the log pivot-norm over time, which is
compared against the continuum dispersion rate.
"""

from __future__ import annotations

import dataclasses
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..evolution import Trajectory, run
from .config import ModelConfig
from .model import Model, build_model

__all__ = ["ConvergenceReport", "convergence_study", "thread_count"]


def thread_count() -> int:
    """Worker cap from the SEMIRED_THREADS environment variable (default 1)."""
    raw = os.environ.get("SEMIRED_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


@dataclass(frozen=True)
class ConvergenceReport:
    """Outcome of one step-refinement study.

    ``errors[i]`` is the final-state gradient-norm distance between
    level i and the reference run; ``decay_rates[i]`` the fitted modal
    decay rate of level i.  ``passed`` requires the fitted order to sit
    in [0.8, 1.2] and the finest level's decay rate to match the
    continuum target within 2 percent.
    """

    step_counts: tuple[int, ...]
    reference_steps: int
    dts: np.ndarray
    errors: np.ndarray
    order: float
    decay_rates: np.ndarray
    target_rate: float
    rate_error: float
    passed: bool


def _decay_rate(model: Model, trajectory: Trajectory) -> float:
    gram = model.bundle.space_h.gram
    norms = np.sqrt(
        np.einsum("ij,jk,ik->i", trajectory.states, gram, trajectory.states)
    )
    if np.any(norms <= 0.0):
        return float("nan")
    slope = np.polyfit(trajectory.times, np.log(norms), 1)[0]
    return -float(slope)


def convergence_study(
    config: ModelConfig,
    step_tol: float = 1e-10,
    inner_tol: float = 1e-12,
    threads: int | None = None,
) -> ConvergenceReport:
    """Run the three-level refinement study for ``config``.

    Levels use the configured step count, twice, and four times it; the
    reference uses sixteen times.  The configuration must be decoupled
    linear so that the target decay rate is defined.  ``threads`` above
    one runs the four trajectories concurrently (each run owns its
    model and caches; defaults to the SEMIRED_THREADS environment cap).
    """
    base_model = build_model(config)
    target = base_model.dispersion_rate()

    n0 = config.n_steps
    step_counts = (n0, 2 * n0, 4 * n0)
    reference_steps = 16 * n0
    all_counts = step_counts + (reference_steps,)
    if threads is None:
        threads = thread_count()

    def run_level(n_steps: int) -> tuple[Model, Trajectory]:
        model = build_model(dataclasses.replace(config, n_steps=n_steps))
        problem = model.evolution_problem(inner_tol=inner_tol)
        return model, run(problem, tol=step_tol)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=min(threads, len(all_counts))) as pool:
            results = list(pool.map(run_level, all_counts))
    else:
        results = [run_level(n) for n in all_counts]

    reference = results[-1][1].final
    space_v = base_model.bundle.space_v
    errors = np.array(
        [space_v.norm(result[1].final - reference) for result in results[:-1]]
    )
    dts = np.array([config.t_end / n for n in step_counts])
    order = float(np.polyfit(np.log(dts), np.log(errors), 1)[0]) if np.all(
        errors > 0.0
    ) else float("nan")
    decay_rates = np.array([_decay_rate(m, t) for m, t in results[:-1]])
    rate_error = abs(decay_rates[-1] / target - 1.0) if target != 0.0 else float("nan")
    passed = bool(0.8 <= order <= 1.2) and bool(rate_error <= 0.02)
    return ConvergenceReport(
        step_counts=step_counts,
        reference_steps=reference_steps,
        dts=dts,
        errors=errors,
        order=order,
        decay_rates=decay_rates,
        target_rate=target,
        rate_error=rate_error,
        passed=passed,
    )
