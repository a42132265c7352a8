import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semired.monotone import (
    MonotoneProblem,
    PairSampler,
    estimate_lipschitz,
    estimate_monotonicity,
    solve_strongly_monotone,
)
from semired.spaces import DualVector, SpaceDescriptor

SOLVE_TOL = 1e-10
INIT_INSENSITIVITY = 10 * SOLVE_TOL


def _identity_space(dim):
    return SpaceDescriptor(dim, np.eye(dim), "rn")


def _spd_problem(seed, dim, lo=0.5, hi=3.0):
    """Random SPD operator with a controlled spectrum, so alpha and L are exact."""
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    vals = np.geomspace(lo, hi, dim)
    mat = (q * vals) @ q.T
    mat = 0.5 * (mat + mat.T)
    space = _identity_space(dim)
    rhs = DualVector(rng.standard_normal(dim), space)
    problem = MonotoneProblem(
        operator=lambda y: DualVector(mat @ y, space),
        alpha=lo,
        lipschitz=hi,
        rhs=rhs,
        space=space,
    )
    return problem, mat, rhs


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("dim", [2, 5, 16])
def test_linear_spd_solve_matches_direct_solve(seed, dim):
    problem, mat, rhs = _spd_problem(seed, dim)
    report = solve_strongly_monotone(problem, tol=SOLVE_TOL)
    assert report.converged
    exact = np.linalg.solve(mat, rhs.coords)
    assert np.linalg.norm(report.solution - exact) <= SOLVE_TOL / problem.alpha * 2


@pytest.mark.parametrize("seed", range(20))
def test_error_sequence_is_non_increasing(seed):
    """The damped iteration contracts toward the solution at every update."""
    dim = 2 + seed % 15
    problem, mat, rhs = _spd_problem(seed, dim)
    exact = np.linalg.solve(mat, rhs.coords)
    rng = np.random.default_rng(seed + 1000)
    y_init = rng.standard_normal(dim)
    errors = []
    for k in range(12):
        report = solve_strongly_monotone(problem, y_init=y_init, tol=1e-300, max_iter=k)
        errors.append(problem.space.norm(report.solution - exact))
    for prev, cur in zip(errors, errors[1:]):
        assert cur <= prev * (1.0 + 1e-12)


def test_converges_from_any_start_and_result_is_init_insensitive():
    problem, mat, rhs = _spd_problem(3, 6)
    rng = np.random.default_rng(0)
    baseline = solve_strongly_monotone(problem, tol=SOLVE_TOL).solution
    for _ in range(5):
        start = 100.0 * rng.standard_normal(6)
        report = solve_strongly_monotone(problem, y_init=start, tol=SOLVE_TOL)
        assert report.converged
        assert problem.space.norm(report.solution - baseline) <= INIT_INSENSITIVITY


def test_tanh_perturbed_solve_against_newton_oracle():
    """Nonlinear monotone law y + tanh(y) = rhs, solved independently by Newton."""
    dim = 4
    space = _identity_space(dim)
    rhs = np.array([0.3, -1.7, 2.5, 0.0])

    def op(y):
        return DualVector(y + np.tanh(y), space)

    # oracle: scalar Newton per component (the law decouples)
    oracle = np.zeros(dim)
    for i in range(dim):
        y = 0.0
        for _ in range(60):
            f = y + math.tanh(y) - rhs[i]
            if abs(f) <= 1e-15:
                break
            y -= f / (1.0 + 1.0 / math.cosh(y) ** 2)
        oracle[i] = y

    problem = MonotoneProblem(operator=op, alpha=1.0, lipschitz=2.0, rhs=DualVector(rhs, space), space=space)
    report = solve_strongly_monotone(problem, tol=1e-13)
    assert report.converged
    assert np.allclose(report.solution, oracle, atol=1e-12)


def test_iteration_count_respects_contraction_bound():
    tol = 1e-10
    for seed in range(10):
        problem, mat, rhs = _spd_problem(seed, 3 + seed)
        r0 = problem.space.dual_norm(rhs.coords - mat @ np.zeros(mat.shape[0]))
        report = solve_strongly_monotone(problem, tol=tol)
        assert report.converged
        q = report.contraction_estimate
        assert q == pytest.approx(math.sqrt(1.0 - (problem.alpha / problem.lipschitz) ** 2))
        if r0 > tol:
            budget = math.ceil(math.log(tol / r0) / math.log(q)) + 2
            assert report.iterations <= budget


def test_non_convergence_reports_instead_of_raising():
    problem, _, _ = _spd_problem(0, 8)
    report = solve_strongly_monotone(problem, tol=1e-14, max_iter=2)
    assert not report.converged
    assert report.iterations == 2
    assert report.final_residual > 1e-14


def test_non_finite_operator_output_raises():
    space = _identity_space(2)
    problem = MonotoneProblem(
        operator=lambda y: DualVector(np.array([np.nan, 0.0]), space),
        alpha=1.0,
        lipschitz=1.0,
        rhs=DualVector(np.zeros(2), space),
        space=space,
    )
    with pytest.raises(ValueError):
        solve_strongly_monotone(problem)


def test_problem_validates_moduli():
    space = _identity_space(2)
    op = lambda y: DualVector(y, space)  # noqa: E731
    rhs = DualVector(np.zeros(2), space)
    with pytest.raises(ValueError):
        MonotoneProblem(operator=op, alpha=0.0, lipschitz=1.0, rhs=rhs, space=space)
    with pytest.raises(ValueError):
        MonotoneProblem(operator=op, alpha=2.0, lipschitz=1.0, rhs=rhs, space=space)


@given(seed=st.integers(min_value=0, max_value=10_000))
@settings(max_examples=30, deadline=None)
def test_monotonicity_estimate_never_exceeds_lipschitz_estimate(seed):
    """Cauchy-Schwarz: every sampled difference quotient is at most the ratio bound."""
    rng = np.random.default_rng(seed)
    dim = 3
    m = rng.standard_normal((dim, dim))
    mat = m @ m.T + 0.1 * np.eye(dim) + 0.3 * (m - m.T)
    space = _identity_space(dim)
    op = lambda y: DualVector(mat @ y, space)  # noqa: E731
    mono = estimate_monotonicity(op, space, PairSampler(space, seed), 25)
    lip = estimate_lipschitz(op, space, PairSampler(space, seed), 25)
    assert mono <= lip + 1e-12


def test_estimates_bracket_true_constants_for_symmetric_operator():
    dim = 4
    space = _identity_space(dim)
    mat = np.diag([0.5, 1.0, 2.0, 4.0])
    op = lambda y: DualVector(mat @ y, space)  # noqa: E731
    sampler = PairSampler(space, 99)
    mono = estimate_monotonicity(op, space, sampler, 400)
    lip = estimate_lipschitz(op, space, sampler, 400)
    assert 0.5 <= mono <= 4.0
    assert mono <= 4.0 + 1e-12 and lip <= 4.0 + 1e-12
    assert lip >= 2.0  # with 400 samples the top of the spectrum is nearly reached


def test_pair_sampler_respects_separation_and_determinism():
    space = _identity_space(3)
    a = PairSampler(space, 5, min_separation=0.5)
    b = PairSampler(space, 5, min_separation=0.5)
    for _ in range(50):
        x1, x2 = a.pair()
        assert space.norm(x1 - x2) >= 0.5
        y1, y2 = b.pair()
        assert np.array_equal(x1, y1) and np.array_equal(x2, y2)
    stack1 = PairSampler(space, 7, min_separation=0.3).pair_stack(64)
    stack2 = PairSampler(space, 7, min_separation=0.3).pair_stack(64)
    assert np.array_equal(stack1[0], stack2[0])
    d = stack1[0] - stack1[1]
    assert (np.linalg.norm(d, axis=1) >= 0.3).all()
