import numpy as np
import pytest

from semired.evolution import (
    DivergenceError,
    EvolutionProblem,
    EvolutionSpaces,
    StepError,
    dissipation_report,
    energy_identity_check,
    implicit_euler_step,
    run,
)
from semired.spaces import SpaceDescriptor

STEP_TOL = 1e-11
E_FORMULA_RTOL = 1e-10
IDENTITY_SCALED_TOL = 1e-12
CONTRACTION_SLACK = 1e-10
HALVING_BAND = (1.8, 2.2)


def _spd(rng, dim, floor=0.5):
    m = rng.standard_normal((dim, dim))
    return m @ m.T + floor * np.eye(dim)


def _scalar_spaces(mu=0.0):
    one = SpaceDescriptor(1, np.eye(1), "r")
    return EvolutionSpaces(
        space_v=one, space_h=one, embed=np.eye(1), f_mat=np.eye(1), mu=mu
    )


def _random_spaces(seed, dim_v=3, dim_h=5, mu=0.0):
    rng = np.random.default_rng(seed)
    space_v = SpaceDescriptor(dim_v, _spd(rng, dim_v), "v")
    space_h = SpaceDescriptor(dim_h, _spd(rng, dim_h), "h")
    embed = rng.standard_normal((dim_h, dim_v))
    f_mat = _spd(rng, dim_v, 1.0)
    return EvolutionSpaces(space_v=space_v, space_h=space_h, embed=embed, f_mat=f_mat, mu=mu)


def _stepping_spaces(seed, dim, mu=0.0):
    """Identity Grams, orthonormal embedding, kinetic form with spectrum in
    [1, 3]: keeps coordinate moduli exact in the V norm and E well
    conditioned, so the damped step iteration terminates quickly."""
    rng = np.random.default_rng(seed)
    ident = SpaceDescriptor(dim, np.eye(dim), "plain")
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    f_mat = (q * np.geomspace(1.0, 3.0, dim)) @ q.T
    f_mat = 0.5 * (f_mat + f_mat.T)
    return EvolutionSpaces(space_v=ident, space_h=ident, embed=np.eye(dim), f_mat=f_mat, mu=mu)


def _decay_problem(lam=2.0, u0=1.0, t_end=1.0, n_steps=10, **kwargs):
    spaces = _scalar_spaces()
    return EvolutionProblem(
        spaces=spaces,
        monotone_part=lambda u: lam * np.asarray(u, dtype=float),
        reduced_part=lambda t, u: np.zeros(1),
        forcing=lambda t: np.zeros(1),
        initial=np.array([u0]),
        t_end=t_end,
        n_steps=n_steps,
        mono_alpha=lam,
        mono_lipschitz=lam,
        **kwargs,
    )


# --- the weight operator E ---------------------------------------------------


@pytest.mark.parametrize("mu", [0.0, 0.7, 3.0])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_e_matrix_factors_through_k(seed, mu):
    spaces = _random_spaces(seed, mu=mu)
    k = spaces.k_operator
    rebuilt = k.T @ np.array(spaces.space_h.gram) @ k
    scale = np.abs(spaces.e_mat).max()
    assert np.abs(rebuilt - spaces.e_mat).max() <= E_FORMULA_RTOL * scale


def test_energy_is_h_norm_of_ku(rng):
    spaces = _random_spaces(4, mu=0.5)
    u = rng.standard_normal(3)
    ku = spaces.k_operator @ u
    assert spaces.energy(u) == pytest.approx(spaces.space_h.inner(ku, ku), rel=1e-10)
    assert spaces.energy(u) <= spaces.e_norm * spaces.space_v.inner(u, u) * (1 + 1e-12)


def test_energy_identity_on_random_inputs(rng):
    for _ in range(100):
        dim = rng.integers(2, 9)
        m = rng.standard_normal((dim, dim))
        e_mat = m + m.T
        a, b = rng.standard_normal(dim), rng.standard_normal(dim)
        scale = (
            abs(a @ (e_mat @ a)) + abs(b @ (e_mat @ b)) + 1.0
        )
        assert energy_identity_check(e_mat, a, b) <= IDENTITY_SCALED_TOL * scale


def test_spaces_validate_inputs():
    one = SpaceDescriptor(1, np.eye(1), "r")
    with pytest.raises(ValueError):
        EvolutionSpaces(one, one, np.eye(1), np.array([[-1.0]]), mu=0.0)
    with pytest.raises(ValueError):
        EvolutionSpaces(one, one, np.eye(1), np.eye(1), mu=-0.5)
    with pytest.raises(ValueError):
        EvolutionSpaces(one, one, np.ones((2, 1)), np.eye(1), mu=0.0)


# --- single steps against closed forms ----------------------------------------


def test_one_step_matches_closed_form_decay():
    problem = _decay_problem(lam=2.0, u0=1.0, t_end=0.1, n_steps=1)
    result = implicit_euler_step(problem, problem.initial, 0.1, 0.1, tol=STEP_TOL)
    assert result.state[0] == pytest.approx(1.0 / 1.2, abs=1e-10)


def test_ten_steps_are_geometric_decay():
    n, dt, lam = 10, 0.05, 3.0
    problem = _decay_problem(lam=lam, u0=2.0, t_end=n * dt, n_steps=n)
    traj = run(problem, tol=STEP_TOL)
    expected = 2.0 / (1.0 + lam * dt) ** np.arange(n + 1)
    assert np.allclose(traj.states[:, 0], expected, atol=1e-9)
    assert traj.method == "richardson"


def test_stationary_state_is_a_fixed_point():
    spaces = _random_spaces(7)
    rng = np.random.default_rng(0)
    mat = _spd(rng, 3, 1.0)
    u_star = rng.standard_normal(3)
    f_star = mat @ u_star
    problem = EvolutionProblem(
        spaces=spaces,
        monotone_part=lambda u: mat @ np.asarray(u, dtype=float),
        reduced_part=lambda t, u: np.zeros(3),
        forcing=lambda t: f_star,
        initial=u_star,
        t_end=1.0,
        n_steps=5,
        mono_alpha=float(np.linalg.eigvalsh(mat).min()) / np.linalg.norm(spaces.space_v.gram, 2),
        mono_lipschitz=1e3,
    )
    traj = run(problem, tol=1e-12)
    assert np.allclose(traj.states, u_star, atol=1e-10)
    assert (traj.iterations == 0).all()


def test_picard_and_richardson_agree():
    rng = np.random.default_rng(5)
    spaces = _stepping_spaces(9, 4)
    mat = _spd(rng, 4, 1.0)

    def spatial(u):
        u = np.asarray(u, dtype=float)
        return mat @ u + 0.1 * np.tanh(u)

    common = dict(
        spaces=spaces,
        monotone_part=spatial,
        reduced_part=lambda t, u: np.zeros(4),
        forcing=lambda t: np.array([np.sin(t), 0.0, np.cos(2 * t), 1.0]),
        initial=rng.standard_normal(4),
        t_end=0.5,
        n_steps=8,
        mono_alpha=float(np.linalg.eigvalsh(mat).min()),
        mono_lipschitz=float(np.linalg.norm(mat, 2)) + 0.1,
    )
    rich = run(EvolutionProblem(**common), tol=1e-12, method="richardson")
    pic = run(EvolutionProblem(**common, picard_matrix=mat), tol=1e-12, method="picard")
    assert pic.method == "picard"
    assert np.allclose(rich.states, pic.states, atol=1e-10)
    # auto picks picard when the matrix is present, richardson otherwise
    assert run(EvolutionProblem(**common), tol=1e-10).method == "richardson"
    assert run(EvolutionProblem(**common, picard_matrix=mat), tol=1e-10).method == "picard"


def test_step_is_contractive_in_the_data():
    """Two solutions of the same step drift no further apart than their inputs
    (measured in the E energy seminorm) when the spatial part is monotone."""
    rng = np.random.default_rng(11)
    spaces = _stepping_spaces(13, 5)
    mat = _spd(rng, 5, 1.0)
    problem = EvolutionProblem(
        spaces=spaces,
        monotone_part=lambda u: mat @ np.asarray(u, dtype=float),
        reduced_part=lambda t, u: np.zeros(5),
        forcing=lambda t: np.ones(5),
        initial=np.zeros(5),
        t_end=1.0,
        n_steps=4,
        mono_alpha=float(np.linalg.eigvalsh(mat).min()),
        mono_lipschitz=float(np.linalg.norm(mat, 2)),
    )
    for _ in range(5):
        u0, v0 = rng.standard_normal(5), rng.standard_normal(5)
        u1 = implicit_euler_step(problem, u0, 0.25, 0.25, tol=1e-13).state
        v1 = implicit_euler_step(problem, v0, 0.25, 0.25, tol=1e-13).state
        before = np.sqrt(spaces.energy(u0 - v0))
        after = np.sqrt(spaces.energy(u1 - v1))
        assert after <= before + CONTRACTION_SLACK


# --- refinement behaviour ------------------------------------------------------


def test_halving_the_step_halves_the_error():
    rng = np.random.default_rng(21)
    spaces = _stepping_spaces(17, 3)
    mat = _spd(rng, 3, 1.0)

    def make(n_steps):
        return EvolutionProblem(
            spaces=spaces,
            monotone_part=lambda u: mat @ np.asarray(u, dtype=float) + np.tanh(u),
            reduced_part=lambda t, u: np.zeros(3),
            forcing=lambda t: np.array([np.sin(3 * t), np.cos(t), 1.0 - t]),
            initial=np.array([1.0, -0.5, 0.25]),
            t_end=1.0,
            n_steps=n_steps,
            mono_alpha=float(np.linalg.eigvalsh(mat).min()),
            mono_lipschitz=float(np.linalg.norm(mat, 2)) + 1.0,
            picard_matrix=mat + np.eye(3),
        )

    # levels n0 and 2 n0 against a 16 n0 reference: first order gives
    # errors ~ C (dt - dt_ref), so the expected ratio is 15/7 ~ 2.14
    n0 = 40
    reference = run(make(16 * n0), tol=1e-12).final
    err_coarse = spaces.space_v.norm(run(make(n0), tol=1e-12).final - reference)
    err_fine = spaces.space_v.norm(run(make(2 * n0), tol=1e-12).final - reference)
    ratio = err_coarse / err_fine
    assert HALVING_BAND[0] <= ratio <= HALVING_BAND[1]


# --- failure modes --------------------------------------------------------------


def test_misdeclared_constants_raise_divergence_error():
    """An operator ten times stiffer than declared makes the damped iteration blow
    up, which must surface as a diagnosis rather than a hang."""
    spaces = _scalar_spaces()
    problem = EvolutionProblem(
        spaces=spaces,
        monotone_part=lambda u: 10.0 * np.asarray(u, dtype=float),
        reduced_part=lambda t, u: np.zeros(1),
        forcing=lambda t: np.zeros(1),
        initial=np.array([1.0]),
        t_end=1.0,
        n_steps=1,
        mono_alpha=1.0,
        mono_lipschitz=1.0,
    )
    with np.errstate(over="ignore"), pytest.raises(DivergenceError):
        implicit_euler_step(problem, problem.initial, 1.0, 1.0, tol=1e-12, method="richardson")

    # the fixed-matrix path must also notice when its remainder overwhelms it
    undersized = EvolutionProblem(
        spaces=spaces,
        monotone_part=problem.monotone_part,
        reduced_part=problem.reduced_part,
        forcing=problem.forcing,
        initial=problem.initial,
        t_end=1.0,
        n_steps=1,
        mono_alpha=1.0,
        mono_lipschitz=1.0,
        picard_matrix=np.zeros((1, 1)),
    )
    with pytest.raises(DivergenceError):
        implicit_euler_step(undersized, undersized.initial, 1.0, 1.0, tol=1e-12, method="picard")


def test_failed_step_carries_partial_trajectory():
    spaces = _scalar_spaces()

    def reduced(t, u):
        return np.array([np.nan]) if t > 0.55 else np.zeros(1)

    problem = EvolutionProblem(
        spaces=spaces,
        monotone_part=lambda u: np.asarray(u, dtype=float),
        reduced_part=reduced,
        forcing=lambda t: np.zeros(1),
        initial=np.array([1.0]),
        t_end=1.0,
        n_steps=10,
        mono_alpha=1.0,
        mono_lipschitz=1.0,
    )
    with pytest.raises(StepError) as info:
        run(problem, tol=1e-10)
    err = info.value
    assert err.step_index == 6
    assert len(err.partial.times) == 6
    assert err.partial.states.shape == (6, 1)
    assert np.isfinite(err.partial.states).all()


def test_problem_validation():
    spaces = _scalar_spaces()
    good = dict(
        spaces=spaces,
        monotone_part=lambda u: np.asarray(u, dtype=float),
        reduced_part=lambda t, u: np.zeros(1),
        forcing=lambda t: np.zeros(1),
        initial=np.array([1.0]),
        t_end=1.0,
        n_steps=2,
        mono_alpha=1.0,
        mono_lipschitz=1.0,
    )
    EvolutionProblem(**good)
    with pytest.raises(ValueError, match="structural hypotheses"):
        EvolutionProblem(**{**good, "mono_alpha": -0.5})
    with pytest.raises(ValueError):
        EvolutionProblem(**{**good, "t_end": 0.0})
    with pytest.raises(ValueError):
        EvolutionProblem(**{**good, "mono_lipschitz": 0.5})
    with pytest.raises(ValueError):
        EvolutionProblem(**{**good, "initial": np.zeros(3)})
    problem = EvolutionProblem(**good)
    with pytest.raises(ValueError):
        implicit_euler_step(problem, problem.initial, 0.5, -0.5)
    with pytest.raises(ValueError):
        implicit_euler_step(problem, problem.initial, 0.5, 0.5, method="newton")
    with pytest.raises(ValueError):
        implicit_euler_step(problem, problem.initial, 0.5, 0.5, method="picard")


# --- dissipation bookkeeping ------------------------------------------------------


def test_dissipation_ledger_closes_for_unforced_decay():
    rng = np.random.default_rng(31)
    spaces = _stepping_spaces(19, 4, mu=0.3)
    mat = _spd(rng, 4, 1.0)
    problem = EvolutionProblem(
        spaces=spaces,
        monotone_part=lambda u: mat @ np.asarray(u, dtype=float) + 0.2 * np.tanh(u),
        reduced_part=lambda t, u: np.zeros(4),
        forcing=lambda t: np.zeros(4),
        initial=rng.standard_normal(4),
        t_end=0.8,
        n_steps=16,
        mono_alpha=float(np.linalg.eigvalsh(mat).min()),
        mono_lipschitz=float(np.linalg.norm(mat, 2)) + 0.2,
    )
    traj = run(problem, tol=1e-11)
    report = dissipation_report(traj, problem, tol=1e-11)
    assert report.passed
    assert report.flagged_steps.size == 0
    assert (report.quadratic_terms >= -1e-13).all()
    # no forcing and monotone operators vanishing at 0: energy cannot grow
    assert (np.diff(report.energies) <= 1e-12).all()


def test_dissipation_ledger_closes_under_forcing():
    problem = _decay_problem(lam=1.0, u0=0.5, t_end=1.0, n_steps=8)
    forced = EvolutionProblem(
        spaces=problem.spaces,
        monotone_part=problem.monotone_part,
        reduced_part=problem.reduced_part,
        forcing=lambda t: np.array([np.sin(5 * t)]),
        initial=problem.initial,
        t_end=problem.t_end,
        n_steps=problem.n_steps,
        mono_alpha=problem.mono_alpha,
        mono_lipschitz=problem.mono_lipschitz,
    )
    traj = run(forced, tol=1e-12)
    report = dissipation_report(traj, forced, tol=1e-12)
    assert report.passed
    assert report.n_steps == 8
    assert report.forcing_pairings.shape == (8,)
