"""Model configuration: coefficients, grid, time window, and INI parsing.

Validation here is purely structural (shapes, finiteness, counts).  Sign
and size conditions on the coefficients are *hypotheses*, not input
errors — they are evaluated by :mod:`semired.chx.hypotheses` and reported,
so that deliberately broken parameter sets can be loaded and examined.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, fields

__all__ = [
    "ModelConfig",
    "Tolerances",
    "ConfigError",
    "default_config",
    "dispersion_config",
    "parse_config",
]


class ConfigError(ValueError):
    """Malformed configuration input (bad file, key, or value)."""


@dataclass(frozen=True)
class ModelConfig:
    """Coefficients and discretization sizes for the 1D coupled model.

    The evolving field u lives on [0, 1] with natural boundary
    conditions and a zero-mean constraint; the auxiliary strain field is
    eliminated pointwise per cell.  The three constitutive laws are

        flux   = a1 * grad(u) + d1 * strain + c1 * tanh(u)
        bulk   = a2 * grad(u) + d2 * strain + c2 * tanh(u)
        stress = k0 * strain + d0 * grad(u) + gamma0 * tanh(u)

    with mechanical equilibrium ``stress = 0`` defining the strain.
    ``mobility`` scales the kinetic form, ``mu`` adds a non-degenerate
    pivot weight to the time derivative (``mu = 0`` is the degenerate
    case), and the convex potential is ``lambda_phi * u^2 / 2`` with the
    stated polynomial growth exponent.  The initial state is
    ``amplitude * cos(mode * pi * x)`` projected to zero mean.
    """

    n_cells: int = 64
    mobility: float = 1.0
    mu: float = 0.0
    a1: float = 1.0
    d1: float = 0.25
    c1: float = 0.1
    a2: float = 0.1
    d2: float = 0.05
    c2: float = 0.05
    k0: float = 1.0
    d0: float = 0.1
    gamma0: float = 0.1
    lambda_phi: float = 1.0
    growth_exponent: float = 4.0
    t_end: float = 0.5
    n_steps: int = 200
    mode: int = 1
    amplitude: float = 0.05

    def __post_init__(self):
        for name in ("n_cells", "n_steps", "mode"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError(f"{name} must be an integer, got {value!r}")
        if self.n_cells < 4:
            raise ConfigError(f"n_cells must be at least 4, got {self.n_cells}")
        if self.n_steps < 1:
            raise ConfigError(f"n_steps must be at least 1, got {self.n_steps}")
        if self.mode < 1:
            raise ConfigError(f"mode must be at least 1, got {self.mode}")
        for field in fields(self):
            if field.type == "float":
                value = float(getattr(self, field.name))
                if not math.isfinite(value):
                    raise ConfigError(f"{field.name} must be finite, got {value!r}")
                object.__setattr__(self, field.name, value)
        if self.t_end <= 0.0:
            raise ConfigError(f"t_end must be positive, got {self.t_end}")

    @property
    def is_decoupled_linear(self) -> bool:
        """True when the model reduces to the linear uncoupled diffusion chain.

        Requires every coupling and nonlinearity to vanish: the strain
        feedback (d1, d2, d0, gamma0), the tanh terms (c1, c2), and the
        gradient part of the bulk law (a2).  Modal decay rates are only
        meaningful in this regime.
        """
        return all(
            getattr(self, name) == 0.0
            for name in ("c1", "c2", "d1", "d2", "d0", "gamma0", "a2")
        )

    @property
    def dt(self) -> float:
        return self.t_end / self.n_steps


@dataclass(frozen=True)
class Tolerances:
    """Solver tolerances carried alongside a run, not part of the model."""

    inner_tol: float = 1e-12
    step_tol: float = 1e-10

    def __post_init__(self):
        if not (self.inner_tol > 0.0) or not math.isfinite(self.inner_tol):
            raise ConfigError(f"inner_tol must be positive, got {self.inner_tol}")
        if not (self.step_tol > 0.0) or not math.isfinite(self.step_tol):
            raise ConfigError(f"step_tol must be positive, got {self.step_tol}")


def default_config() -> ModelConfig:
    return ModelConfig()


def dispersion_config() -> ModelConfig:
    """Decoupled linear setup for modal-decay and step-refinement studies."""
    return ModelConfig(
        n_cells=128,
        mobility=1.0,
        mu=0.0,
        a1=1.0,
        d1=0.0,
        c1=0.0,
        a2=0.0,
        d2=0.0,
        c2=0.0,
        k0=1.0,
        d0=0.0,
        gamma0=0.0,
        lambda_phi=0.0,
        growth_exponent=4.0,
        t_end=0.01,
        n_steps=100,
        mode=1,
        amplitude=0.05,
    )


_INT_KEYS = {"n_cells", "n_steps", "mode"}

_SCHEMA: dict[str, tuple[str, ...]] = {
    "grid": ("n_cells",),
    "coefficients": (
        "mobility",
        "mu",
        "a1",
        "d1",
        "c1",
        "a2",
        "d2",
        "c2",
        "k0",
        "d0",
        "gamma0",
    ),
    "time": ("t_end", "n_steps"),
    "potential": ("lambda_phi", "growth_exponent"),
    "initial": ("mode", "amplitude"),
}

_TOLERANCE_KEYS = ("inner_tol", "step_tol")


def _parse_value(section: str, key: str, raw: str):
    raw = raw.strip()
    try:
        if key in _INT_KEYS:
            return int(raw)
        return float(raw)
    except ValueError:
        kind = "an integer" if key in _INT_KEYS else "a number"
        raise ConfigError(
            f"[{section}] {key} must be {kind}, got {raw!r}"
        ) from None


def parse_config(path) -> tuple[ModelConfig, Tolerances]:
    """Read an INI model description; strict about sections and keys.

    Every section and key of the schema is mandatory except the optional
    ``[tolerances]`` section (keys ``inner_tol`` and ``step_tol``).
    Unknown sections or keys are errors, as are non-numeric values.
    """
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, "r", encoding="utf-8") as handle:
            parser.read_file(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file {path}: {exc}") from None

    values: dict[str, object] = {}
    seen = set(parser.sections())
    for section, keys in _SCHEMA.items():
        if section not in parser:
            raise ConfigError(f"missing section [{section}] in {path}")
        seen.discard(section)
        present = dict(parser.items(section))
        for key in keys:
            if key not in present:
                raise ConfigError(f"missing key {key} in section [{section}]")
            values[key] = _parse_value(section, key, present.pop(key))
        if present:
            extra = ", ".join(sorted(present))
            raise ConfigError(f"unknown keys in section [{section}]: {extra}")

    tol_values: dict[str, float] = {}
    if "tolerances" in parser:
        seen.discard("tolerances")
        present = dict(parser.items("tolerances"))
        for key in _TOLERANCE_KEYS:
            if key in present:
                tol_values[key] = float(_parse_value("tolerances", key, present.pop(key)))
        if present:
            extra = ", ".join(sorted(present))
            raise ConfigError(f"unknown keys in section [tolerances]: {extra}")
    if seen:
        extra = ", ".join(sorted(seen))
        raise ConfigError(f"unknown sections in {path}: {extra}")

    return ModelConfig(**values), Tolerances(**tol_values)
