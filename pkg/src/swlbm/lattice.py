"""Velocity sets, shallow-water equilibria and their Jacobians.

Every equilibrium implemented here has the form

    f_i^eq = A_i h + B_i g h^2/e^2 + C_i h (xi_i . u)/e^2
             + D_i h (xi_i . u)^2/e^4 + E_i h |u|^2/e^2

so a model is fully described by five coefficient vectors of length N.
The Jacobian with respect to the populations follows from the chain rule
through ``h = sum f`` and ``h u = sum xi f``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from enum import Enum

import numpy as np

__all__ = [
    "Model",
    "Family",
    "VelocitySet",
    "EquilibriumSpec",
    "MacroState",
    "DryNodeError",
    "velocity_set",
    "equilibrium",
    "equilibrium_jacobian",
    "moments",
    "momentum_flux",
    "numerical_rank",
    "force_weights",
]


class Model(str, Enum):
    D2Q7 = "D2Q7"
    D2Q9 = "D2Q9"


class Family(str, Enum):
    D2Q7 = "D2Q7"
    D2Q9_SALMON = "D2Q9Salmon"
    D2Q9_LAMBDA = "D2Q9Lambda"
    D2Q9_STANDARD = "D2Q9Standard"

    @property
    def model(self) -> Model:
        return Model.D2Q7 if self is Family.D2Q7 else Model.D2Q9


class DryNodeError(ValueError):
    """Raised when a node carries zero or negative depth."""


# Unit direction tables. D2Q9 order: rest, E, N, W, S, NE, NW, SW, SE.
_D2Q9_C = np.array(
    [[0, 0], [1, 0], [0, 1], [-1, 0], [0, -1], [1, 1], [-1, 1], [-1, -1], [1, -1]],
    dtype=float,
)
_D2Q9_W = np.array([4 / 9] + [1 / 9] * 4 + [1 / 36] * 4)


def _d2q7_directions() -> np.ndarray:
    # exact +-1/2 and +-sqrt(3)/2 so that opposite links cancel without residue
    r = math.sqrt(3.0) / 2
    return np.array([[0, 0], [1, 0], [0.5, r], [-0.5, r], [-1, 0], [-0.5, -r], [0.5, -r]])


_D2Q7_C = _d2q7_directions()


@dataclass(frozen=True)
class VelocitySet:
    model: Model
    e: float
    c: np.ndarray = field(repr=False)
    weights: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.c.shape[0]

    @property
    def xi(self) -> np.ndarray:
        """Discrete velocities in physical units, shape (n, 2)."""
        return self.c * self.e

    @cached_property
    def opposite(self) -> np.ndarray:
        out = np.empty(self.n, dtype=np.int64)
        for i, ci in enumerate(self.c):
            out[i] = int(np.flatnonzero(np.all(np.isclose(self.c, -ci), axis=1))[0])
        return out


def velocity_set(model: Model | str, e: float = 1.0) -> VelocitySet:
    """Return the D2Q7 (hexagonal) or D2Q9 (square) velocity set at lattice speed ``e``."""
    if not e > 0:
        raise ValueError(f"lattice speed must be positive, got {e}")
    try:
        model = Model(model)
    except ValueError:
        raise ValueError(f"unknown model identifier {model!r}") from None
    if model is Model.D2Q9:
        return VelocitySet(model, float(e), _D2Q9_C.copy(), _D2Q9_W.copy())
    return VelocitySet(model, float(e), _D2Q7_C.copy(), None)


def force_weights(vs: VelocitySet) -> np.ndarray:
    """Weights used to distribute a body force over the populations.

    D2Q9 uses its lattice weights. D2Q7 uses 1/6 on the moving links and
    nothing on the rest particle.
    """
    if vs.model is Model.D2Q9:
        return vs.weights.copy()
    return np.array([0.0] + [1 / 6] * 6)


@dataclass(frozen=True)
class MacroState:
    h: float
    u: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "u", (float(self.u[0]), float(self.u[1])))


@dataclass(frozen=True)
class EquilibriumSpec:
    family: Family
    g: float
    e: float = 1.0
    lam: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if not (self.g > 0 and math.isfinite(self.g)):
            raise ValueError(f"reduced gravity must be positive and finite, got {self.g}")
        if not self.e > 0:
            raise ValueError(f"lattice speed must be positive, got {self.e}")
        if self.family is Family.D2Q9_STANDARD and self.e != 1.0:
            raise ValueError("D2Q9Standard is defined in lattice units (e = 1)")

    @property
    def velocity_set(self) -> VelocitySet:
        return velocity_set(self.family.model, self.e)

    @property
    def effective_lambda(self) -> float:
        return self.lam if self.family is Family.D2Q9_LAMBDA else 1.0

    def coefficients(self) -> np.ndarray:
        """Coefficient table of shape (5, N): rows A, B, C, D, E."""
        return equilibrium_coefficients(self.family, self.lam)


def equilibrium_coefficients(family: Family | str, lam: float = 1.0) -> np.ndarray:
    family = Family(family)
    if family is Family.D2Q7:
        rest = (1.0, -1.0, 0.0, 0.0, -1.0)
        moving = (0.0, 1 / 6, 1 / 3, 2 / 3, -1 / 6)
        return np.array([rest] + [moving] * 6).T.copy()
    if family is not Family.D2Q9_LAMBDA:
        lam = 1.0
    rest = ((8 + lam) / 9, -(4 + lam) / 6, 0.0, 0.0, -2 / 3)
    axis = ((1 - lam) / 18, (1 + lam) / 12, 1 / 3, 1 / 2, -1 / 6)
    diag = ((lam - 1) / 36, (2 - lam) / 24, 1 / 12, 1 / 8, -1 / 24)
    return np.array([rest] + [axis] * 4 + [diag] * 4).T.copy()


def _check_state(state: MacroState) -> None:
    if not state.h > 0:
        raise DryNodeError(f"nonpositive depth h={state.h}")


def equilibrium(spec: EquilibriumSpec, state: MacroState) -> np.ndarray:
    _check_state(state)
    A, B, C, D, E = spec.coefficients()
    c = spec.velocity_set.c
    h, e = state.h, spec.e
    U = np.asarray(state.u) / e
    cu = c @ U
    s = spec.g * h / e**2
    return h * (A + B * s + C * cu + D * cu**2 + E * (U @ U))


def equilibrium_jacobian(spec: EquilibriumSpec, state: MacroState) -> np.ndarray:
    """Dense N x N matrix of d f_i^eq / d f_j."""
    _check_state(state)
    A, B, C, D, E = spec.coefficients()
    vs = spec.velocity_set
    c, xi = vs.c, vs.xi
    h, e = state.h, spec.e
    u = np.asarray(state.u)
    cu = c @ u / e  # xi_i . u / e^2 with xi = e c
    usq = u @ u / e**2
    # d/dh at fixed hu, and d/d(hu)
    dh = A + 2 * B * spec.g * h / e**2 - D * cu**2 - E * usq
    dj = (C / e)[:, None] * c + (2 * D * cu / e)[:, None] * c + (2 * E / e**2)[:, None] * u
    return dh[:, None] + dj @ xi.T


def moments(f, vs: VelocitySet) -> MacroState:
    f = np.asarray(f, dtype=float)
    if f.shape != (vs.n,):
        raise ValueError(f"expected {vs.n} populations, got shape {f.shape}")
    h = math.fsum(f)
    if not h > 0:
        raise DryNodeError(f"dry or invalid node: sum of populations is {h}")
    j = f @ vs.xi
    return MacroState(h, (j[0] / h, j[1] / h))


def momentum_flux(f, vs: VelocitySet) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != (vs.n,):
        raise ValueError(f"expected {vs.n} populations, got shape {f.shape}")
    xi = vs.xi
    return np.einsum("i,ia,ib->ab", f, xi, xi)


def numerical_rank(m: np.ndarray, rtol: float = 1e-9) -> int:
    s = np.linalg.svd(m, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rtol * s[0]))
