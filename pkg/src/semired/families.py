"""Ready-made coupled systems used by the verifiers and the test suite.

Every factory returns exact coupling constants: either saturated by
construction (scalar case) or computed from the spectra of the generated
matrices, so sampled ratios can be compared against bounds that are tight
rather than merely safe.  All instances broadcast over sample stacks
(``vectorized=True``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .reduction import CoupledSystem, CouplingConstants
from .spaces import DualVector, SpaceDescriptor


def _identity_space(dim: int, label: str) -> SpaceDescriptor:
    return SpaceDescriptor(dim=dim, gram=np.eye(dim), label=label)


def scalar_instance() -> CoupledSystem:
    """One-dimensional pair whose reduction saturates both estimates.

    outer(x1, x2, y) = 2 x1 + y,  inner(x1, x2, y) = x1 + 2 y = 4,
    so R(x1, x2) = (4 - x1) / 2 and S(x1, x2) = 1.5 x1 + 2.  The constants
    (2, 1, 2, 1) give reduction_lipschitz = 0.5 and reduced_monotonicity
    = 1.5, both attained exactly.
    """
    space_x = _identity_space(1, "scalar-x")
    space_y = _identity_space(1, "scalar-y")
    return CoupledSystem(
        outer=lambda x1, x2, y: 2.0 * x1 + y,
        inner=lambda x1, x2, y: x1 + 2.0 * y,
        space_x=space_x,
        space_y=space_y,
        constants=CouplingConstants(alpha_x=2.0, beta_x=1.0, alpha_y=2.0, beta_y=1.0),
        inner_rhs=DualVector(np.array([4.0]), space_y),
        inner_lipschitz=2.0,
        vectorized=True,
    )


def _spd_matrix(rng: np.random.Generator, dim: int, floor: float) -> np.ndarray:
    g = rng.standard_normal((dim, dim))
    sym = g @ g.T / dim
    return sym + floor * np.eye(dim)


@dataclass(frozen=True)
class LinearBlockInstance:
    """Linear coupled pair together with its matrices for closed-form checks.

    outer(x1, x2, y) = a_xx x1 + a_x2 x2 + a_xy y
    inner(x1, x2, y) = b_yy y  + b_yx x1 + b_x2 x2

    so R(x1, x2) = b_yy^-1 (rhs_y - b_yx x1 - b_x2 x2) in closed form.
    """

    system: CoupledSystem
    a_xx: np.ndarray
    a_x2: np.ndarray
    a_xy: np.ndarray
    b_yy: np.ndarray
    b_yx: np.ndarray
    b_x2: np.ndarray
    rhs_y: np.ndarray

    def exact_inner_solution(self, x1, x2) -> np.ndarray:
        return np.linalg.solve(
            self.b_yy, self.rhs_y - self.b_yx @ np.asarray(x1) - self.b_x2 @ np.asarray(x2)
        )

    def exact_reduced(self, x1, x2) -> np.ndarray:
        y = self.exact_inner_solution(x1, x2)
        return self.a_xx @ np.asarray(x1) + self.a_x2 @ np.asarray(x2) + self.a_xy @ y

    def diagonal_matrix(self) -> np.ndarray:
        """Matrix of x -> S(x, x) minus its constant part (dense elimination)."""
        return (
            self.a_xx
            + self.a_x2
            - self.a_xy @ np.linalg.solve(self.b_yy, self.b_yx + self.b_x2)
        )

    def diagonal_offset(self) -> np.ndarray:
        """Constant part of x -> S(x, x)."""
        return self.a_xy @ np.linalg.solve(self.b_yy, self.rhs_y)


def linear_block_instance(
    dim_x: int = 6, dim_y: int = 4, seed: int = 0
) -> LinearBlockInstance:
    """Random linear pair with exact (spectrally computed) constants.

    The leading blocks are built symmetric positive definite plus a skew
    part, the coupling blocks are scaled so the admissibility product
    holds with margin.  Constants are read off the spectra afterwards,
    making them the best constants for the instance rather than estimates.
    """
    rng = np.random.default_rng(seed)
    a_xx = _spd_matrix(rng, dim_x, 1.0)
    skew = rng.standard_normal((dim_x, dim_x)) / dim_x
    a_xx = a_xx + 0.5 * (skew - skew.T)
    b_yy = _spd_matrix(rng, dim_y, 1.0)

    alpha_x = float(np.linalg.eigvalsh(0.5 * (a_xx + a_xx.T)).min())
    alpha_y = float(np.linalg.eigvalsh(0.5 * (b_yy + b_yy.T)).min())

    # Scale couplings to keep beta_x * beta_y <= alpha_x * alpha_y / 4, and
    # the lower-order second-slot blocks small enough that the diagonal
    # reduced map stays strongly monotone (used by the equivalence checks).
    budget = 0.5 * np.sqrt(alpha_x * alpha_y)
    a_xy = rng.standard_normal((dim_x, dim_y))
    a_xy *= budget / np.linalg.norm(a_xy, 2)
    b_yx = rng.standard_normal((dim_y, dim_x))
    b_yx *= budget / np.linalg.norm(b_yx, 2)
    a_x2 = rng.standard_normal((dim_x, dim_x)) / (4.0 * dim_x)
    b_x2 = rng.standard_normal((dim_y, dim_x)) / (4.0 * dim_x)
    rhs_y = rng.standard_normal(dim_y)

    beta_x = float(np.linalg.norm(a_xy, 2))
    beta_y = float(np.linalg.norm(b_yx, 2))

    space_x = _identity_space(dim_x, f"block-x-{seed}")
    space_y = _identity_space(dim_y, f"block-y-{seed}")
    system = CoupledSystem(
        outer=lambda x1, x2, y: x1 @ a_xx.T + x2 @ a_x2.T + y @ a_xy.T,
        inner=lambda x1, x2, y: y @ b_yy.T + x1 @ b_yx.T + x2 @ b_x2.T,
        space_x=space_x,
        space_y=space_y,
        constants=CouplingConstants(alpha_x, beta_x, alpha_y, beta_y),
        inner_rhs=DualVector(rhs_y, space_y),
        inner_lipschitz=float(np.linalg.norm(b_yy, 2)),
        vectorized=True,
    )
    return LinearBlockInstance(
        system=system,
        a_xx=a_xx,
        a_x2=a_x2,
        a_xy=a_xy,
        b_yy=b_yy,
        b_yx=b_yx,
        b_x2=b_x2,
        rhs_y=rhs_y,
    )


@dataclass(frozen=True)
class TanhInstance:
    """Nonlinear pair: the inner equation gains a saturating gain term.

    inner(x1, x2, y) = b_yy y + gain * tanh(y) + b_yx x1
    outer(x1, x2, y) = a_xx x1 + a_xy tanh(y) + a_x2 x2

    tanh is monotone with derivative in (0, 1], so the gain term only adds
    monotonicity while contributing ``gain`` to the Lipschitz modulus.
    """

    system: CoupledSystem
    a_xx: np.ndarray
    a_x2: np.ndarray
    a_xy: np.ndarray
    b_yy: np.ndarray
    b_yx: np.ndarray
    rhs_y: np.ndarray
    gain: float

    def inner_residual(self, x1, y) -> np.ndarray:
        return (
            self.b_yy @ np.asarray(y)
            + self.gain * np.tanh(np.asarray(y))
            + self.b_yx @ np.asarray(x1)
            - self.rhs_y
        )

    def newton_inner_solution(self, x1, tol: float = 1e-14) -> np.ndarray:
        """Independent Newton solve of the inner equation (second slot unused)."""
        y = np.zeros(self.b_yy.shape[0])
        for _ in range(100):
            r = self.inner_residual(x1, y)
            if np.linalg.norm(r) <= tol:
                return y
            jac = self.b_yy + self.gain * np.diag(1.0 / np.cosh(y) ** 2)
            y = y - np.linalg.solve(jac, r)
        raise RuntimeError("Newton iteration for the saturating inner law stalled")


def linear_tanh_instance(dim: int = 4, seed: int = 7, gain: float = 0.3) -> TanhInstance:
    if gain < 0.0:
        raise ValueError("gain must be nonnegative")
    rng = np.random.default_rng(seed)
    b_yy = _spd_matrix(rng, dim, 1.0)
    a_xx = _spd_matrix(rng, dim, 1.0)
    alpha_x = float(np.linalg.eigvalsh(0.5 * (a_xx + a_xx.T)).min())
    alpha_y = float(np.linalg.eigvalsh(0.5 * (b_yy + b_yy.T)).min())
    budget = 0.5 * np.sqrt(alpha_x * alpha_y)
    a_xy = rng.standard_normal((dim, dim))
    a_xy *= budget / np.linalg.norm(a_xy, 2)
    b_yx = rng.standard_normal((dim, dim))
    b_yx *= budget / np.linalg.norm(b_yx, 2)
    a_x2 = rng.standard_normal((dim, dim)) / (4.0 * dim)
    rhs_y = rng.standard_normal(dim)

    space_x = _identity_space(dim, f"tanh-x-{seed}")
    space_y = _identity_space(dim, f"tanh-y-{seed}")
    system = CoupledSystem(
        outer=lambda x1, x2, y: x1 @ a_xx.T + np.tanh(y) @ a_xy.T + x2 @ a_x2.T,
        inner=lambda x1, x2, y: y @ b_yy.T + gain * np.tanh(y) + x1 @ b_yx.T,
        space_x=space_x,
        space_y=space_y,
        constants=CouplingConstants(
            alpha_x=alpha_x,
            beta_x=float(np.linalg.norm(a_xy, 2)),
            alpha_y=alpha_y,
            beta_y=float(np.linalg.norm(b_yx, 2)),
        ),
        inner_rhs=DualVector(rhs_y, space_y),
        inner_lipschitz=float(np.linalg.norm(b_yy, 2)) + gain,
        vectorized=True,
    )
    return TanhInstance(
        system=system,
        a_xx=a_xx,
        a_x2=a_x2,
        a_xy=a_xy,
        b_yy=b_yy,
        b_yx=b_yx,
        rhs_y=rhs_y,
        gain=gain,
    )
