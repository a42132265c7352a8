"""Finite-dimensional inner-product spaces with explicit Gram matrices.

Vectors are plain coordinate arrays.  A space fixes the pairing
``<x, y> = x @ gram @ y``.  Functionals are carried as coordinate arrays
whose action on a vector is the bare dot product, i.e. any mass or
stiffness weighting is already baked in by whatever produced them; this
keeps Galerkin assembly and duality bookkeeping from applying a Gram
matrix twice.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, eigh, solve_triangular

__all__ = [
    "SpaceDescriptor",
    "DualVector",
    "inner",
    "duality_map",
    "poincare_constant",
    "sqrt_spd",
    "project_zero_mean",
]


def _as_vector(x, dim: int, name: str = "vector") -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.shape != (dim,):
        raise ValueError(f"{name} has shape {arr.shape}, expected ({dim},)")
    return arr


@dataclass(frozen=True)
class SpaceDescriptor:
    """A real inner-product space ``<x, y> = x @ gram @ y``.

    The Gram matrix must be symmetric (to 1e-14 relative) and positive
    definite; both are checked at construction.  Instances are immutable
    and safe to share between threads.
    """

    dim: int
    gram: np.ndarray
    label: str = ""

    def __post_init__(self):
        if not isinstance(self.dim, (int, np.integer)) or self.dim < 1:
            raise ValueError("dim must be a positive integer")
        gram = np.array(self.gram, dtype=float)
        if gram.shape != (self.dim, self.dim):
            raise ValueError(
                f"gram has shape {gram.shape}, expected ({self.dim}, {self.dim})"
            )
        scale = np.abs(gram).max()
        if scale == 0.0 or np.abs(gram - gram.T).max() > 1e-14 * scale:
            raise ValueError(f"gram of {self.label or 'space'} is not symmetric")
        gram = 0.5 * (gram + gram.T)
        gram.setflags(write=False)
        object.__setattr__(self, "gram", gram)
        self._cho  # noqa: B018 — fail fast on non-SPD input

    @cached_property
    def _cho(self):
        try:
            return cho_factor(self.gram, lower=True)
        except LinAlgError:
            raise ValueError(
                f"gram of {self.label or 'space'} is not positive definite"
            ) from None

    @cached_property
    def _gram_is_identity(self) -> bool:
        return bool((self.gram == np.eye(self.dim)).all())

    def inner(self, x, y) -> float:
        x = _as_vector(x, self.dim)
        y = _as_vector(y, self.dim)
        return float(x @ self.gram @ y)

    def norm(self, x) -> float:
        return float(np.sqrt(max(self.inner(x, x), 0.0)))

    def dual(self, x) -> "DualVector":
        """Image of ``x`` under the duality map (Gram-weighted coordinates)."""
        x = _as_vector(x, self.dim)
        return DualVector(self.gram @ x, self)

    def solve_gram(self, coords) -> np.ndarray:
        """gram^{-1} applied to dual coordinates."""
        coords = _as_vector(coords, self.dim, "dual coordinates")
        if self._gram_is_identity:
            return coords
        return cho_solve(self._cho, coords)

    def solve_gram_stack(self, coords: np.ndarray) -> np.ndarray:
        """gram^{-1} applied row-wise to a stack of dual coordinates (m, dim)."""
        coords = np.asarray(coords, dtype=float)
        if coords.ndim != 2 or coords.shape[1] != self.dim:
            raise ValueError(f"stack has shape {coords.shape}, expected (m, {self.dim})")
        if self._gram_is_identity:
            return coords
        return cho_solve(self._cho, coords.T).T

    def dual_norm(self, coords) -> float:
        coords = _as_vector(coords, self.dim, "dual coordinates")
        return float(np.sqrt(max(coords @ self.solve_gram(coords), 0.0)))


@dataclass(frozen=True)
class DualVector:
    """A functional on a space, stored as raw pairing coordinates."""

    coords: np.ndarray
    space: SpaceDescriptor

    def __post_init__(self):
        coords = np.array(self.coords, dtype=float)
        if coords.shape != (self.space.dim,):
            raise ValueError(
                f"dual coordinates have shape {coords.shape}, expected ({self.space.dim},)"
            )
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)

    def pairing(self, x) -> float:
        x = _as_vector(x, self.space.dim)
        return float(self.coords @ x)

    def norm(self) -> float:
        """Dual norm sqrt(coords @ gram^{-1} @ coords)."""
        return self.space.dual_norm(self.coords)

    def __add__(self, other: "DualVector") -> "DualVector":
        if other.space is not self.space:
            raise ValueError("dual vectors live on different spaces")
        return DualVector(self.coords + other.coords, self.space)

    def __sub__(self, other: "DualVector") -> "DualVector":
        if other.space is not self.space:
            raise ValueError("dual vectors live on different spaces")
        return DualVector(self.coords - other.coords, self.space)

    def __mul__(self, scalar: float) -> "DualVector":
        return DualVector(self.coords * float(scalar), self.space)

    __rmul__ = __mul__


def inner(space: SpaceDescriptor, x, y) -> float:
    """Inner product of two vectors of ``space``."""
    return space.inner(x, y)


def duality_map(space: SpaceDescriptor, x) -> DualVector:
    """Riesz image of ``x``: the functional ``<x, .>``."""
    return space.dual(x)


def poincare_constant(
    space_v: SpaceDescriptor, space_h: SpaceDescriptor, embed
) -> float:
    """Operator norm of the embedding ``space_v -> space_h``.

    ``embed`` maps V coordinates to H coordinates; the result is the
    smallest constant C with ``|embed x|_H <= C |x|_V``, computed as the
    square root of the largest eigenvalue of the symmetric pencil
    (embed^T gram_H embed, gram_V).  Deterministic to solver precision.
    """
    embed = np.asarray(embed, dtype=float)
    if embed.shape != (space_h.dim, space_v.dim):
        raise ValueError(
            f"embedding has shape {embed.shape}, expected ({space_h.dim}, {space_v.dim})"
        )
    lhs = embed.T @ space_h.gram @ embed
    lhs = 0.5 * (lhs + lhs.T)
    try:
        vals = eigh(lhs, np.array(space_v.gram), eigvals_only=True)
    except LinAlgError as exc:
        raise ValueError(f"embedding norm computation failed: {exc}") from None
    return float(np.sqrt(max(vals[-1], 0.0)))


def sqrt_spd(space: SpaceDescriptor, operator) -> np.ndarray:
    """Symmetric positive square root of a self-adjoint positive operator.

    ``operator`` is a matrix acting on coordinates of ``space`` that is
    self-adjoint and positive definite with respect to the space's inner
    product.  Returns the unique positive root ``E2`` (self-adjoint in the
    same sense) with ``E2 @ E2 = operator``.  Eigenvalues below -1e-12
    relative raise; tiny negative round-off is clamped to zero.
    """
    op = np.asarray(operator, dtype=float)
    if op.shape != (space.dim, space.dim):
        raise ValueError(
            f"operator has shape {op.shape}, expected ({space.dim}, {space.dim})"
        )
    lower = np.linalg.cholesky(np.array(space.gram))
    # Conjugate into the metric where self-adjointness is plain symmetry.
    sym = lower.T @ solve_triangular(lower, op.T, lower=True).T
    scale = max(np.abs(sym).max(), 1.0)
    if np.abs(sym - sym.T).max() > 1e-10 * scale:
        raise ValueError("operator is not self-adjoint in the space inner product")
    sym = 0.5 * (sym + sym.T)
    vals, vecs = np.linalg.eigh(sym)
    if vals.min() < -1e-12 * max(1.0, vals.max()):
        raise ValueError(
            f"operator is not positive definite (eigenvalue {vals.min():.3e})"
        )
    root = (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T
    return solve_triangular(lower, root, lower=True, trans="T") @ lower.T


def project_zero_mean(weights, x) -> np.ndarray:
    """Remove the weighted mean: ``x - (w @ x / sum(w)) * ones``.

    Weights must be strictly positive.  Idempotent and linear.
    """
    w = np.asarray(weights, dtype=float)
    x = np.asarray(x, dtype=float)
    if w.shape != x.shape or w.ndim != 1:
        raise ValueError(f"weights {w.shape} and vector {x.shape} must be equal 1-d shapes")
    if (w <= 0).any():
        raise ValueError("weights must be strictly positive")
    return x - (w @ x) / w.sum()
