"""Fully discrete stream-and-collide BGK solver for the shallow water equations.

The update per step is

    f_i(x + xi_i dt, t + dt) = f_i - (f_i - f_i^eq)/tau_hat + 3 dt w_i (xi_i . F)/e^2

followed by boundary treatment and a moment update. Streaming is a push
along precomputed destination tables. Links that leave the domain (in a
non-periodic direction) or end on a solid node are reflected back into the
source node (halfway bounce-back); open-boundary and slip-wall nodes are then
overwritten by :func:`apply_boundaries`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import IntEnum
from functools import cached_property
from typing import Callable, Mapping, Union

import numpy as np

from . import kernels
from .lattice import EquilibriumSpec, MacroState, Model

log = logging.getLogger(__name__)

__all__ = [
    "CellType",
    "Grid",
    "ForceParams",
    "DischargeInflow",
    "DepthBoundary",
    "VelocityBoundary",
    "Wall",
    "Periodic",
    "SimulationConfig",
    "DistributionField",
    "DivergenceDetected",
    "Simulation",
    "SteadyResult",
    "TransientResult",
    "collide_stream_step",
    "apply_boundaries",
    "force_vector",
    "wind_coefficient",
    "coriolis_parameter",
    "bed_gradient",
    "lb_viscosity",
    "physical_viscosity",
    "equilibrium_field",
    "run_to_steady",
    "run_transient",
    "DRY_DEPTH",
]

DRY_DEPTH = 1e-12
EARTH_ROTATION = 0.000073  # rad/s
SIDES = ("west", "east", "south", "north")


class CellType(IntEnum):
    FLUID = 0
    SOLID = 1
    INFLOW = 2
    OUTFLOW = 3


class DivergenceDetected(RuntimeError):
    def __init__(self, step: int, location: tuple[int, int], value: float):
        self.step = step
        self.location = location
        self.value = value
        super().__init__(f"divergence at step {step}, node {location}: h = {value!r}")


# ---------------------------------------------------------------------------
# geometry


@dataclass
class Grid:
    nx: int
    ny: int
    dx: float
    dt: float
    mask: np.ndarray | None = None
    periodic_x: bool = False
    periodic_y: bool = False

    def __post_init__(self):
        if self.mask is None:
            self.mask = np.zeros((self.nx, self.ny), dtype=np.int8)
        self.mask = np.ascontiguousarray(self.mask, dtype=np.int8)
        if self.mask.shape != (self.nx, self.ny):
            raise ValueError(f"mask shape {self.mask.shape} != ({self.nx}, {self.ny})")
        if not (self.dx > 0 and self.dt > 0):
            raise ValueError("dx and dt must be positive")

    @property
    def e(self) -> float:
        return self.dx / self.dt

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @cached_property
    def active_nodes(self) -> np.ndarray:
        return np.flatnonzero(self.mask.ravel() != CellType.SOLID).astype(np.intp)

    @cached_property
    def active_mask(self) -> np.ndarray:
        return self.mask != CellType.SOLID

    def coordinates(self, centered: bool = True) -> tuple[np.ndarray, np.ndarray]:
        off = 0.5 if centered else 0.0
        x = (np.arange(self.nx) + off) * self.dx
        y = (np.arange(self.ny) + off) * self.dx
        return x, y

    def _wrap(self, jx, jy):
        if self.periodic_x:
            jx = jx % self.nx
        if self.periodic_y:
            jy = jy % self.ny
        inside = (jx >= 0) & (jx < self.nx) & (jy >= 0) & (jy < self.ny)
        target = np.where(inside, jx * self.ny + jy, 0)
        return inside, target

    def stream_table(self, c: np.ndarray, opposite: np.ndarray) -> np.ndarray:
        """Flat destination index for every (active node, direction)."""
        key = (c.tobytes(), opposite.tobytes())
        cache = self.__dict__.setdefault("_stream_cache", {})
        if key in cache:
            return cache[key]
        nodes = self.active_nodes
        q = c.shape[0]
        ix, iy = np.divmod(nodes, self.ny)
        ci = c.astype(np.int64)
        solid = self.mask.ravel() == CellType.SOLID
        dst = np.empty((nodes.size, q), dtype=np.intp)
        for i in range(q):
            inside, target = self._wrap(ix + ci[i, 0], iy + ci[i, 1])
            ok = inside & ~solid[target]
            dst[:, i] = np.where(ok, target * q + i, nodes * q + opposite[i])
        cache[key] = dst
        return dst


# ---------------------------------------------------------------------------
# forces


def wind_coefficient(wind, air_density: float) -> float:
    speed = math.hypot(wind[0], wind[1])
    return air_density * (0.75 + 0.067 * speed) * 1e-3


def coriolis_parameter(latitude_deg: float, omega: float = EARTH_ROTATION) -> float:
    return 2 * omega * math.sin(math.radians(latitude_deg))


@dataclass
class ForceParams:
    """Source terms of the momentum equations.

    ``bed_friction`` is a constant C_b unless ``manning`` is given, in which
    case C_b = g n_b^2 / h^(1/3) (Chezy C_z = h^(1/6)/n_b).
    """

    gravity: float
    bed_elevation: np.ndarray | None = None
    water_density: float = 1000.0
    air_density: float = 1.2
    bed_friction: float = 0.0
    manning: float | None = None
    wind: tuple[float, float] = (0.0, 0.0)
    coriolis: float = 0.0
    bed_slope_on: bool = True
    friction_on: bool = True
    wind_on: bool = True
    coriolis_on: bool = True

    def __post_init__(self):
        if not self.water_density > 0:
            raise ValueError("water density must be positive")
        self.wind = (float(self.wind[0]), float(self.wind[1]))

    def wind_acceleration(self) -> tuple[float, float]:
        if not self.wind_on:
            return (0.0, 0.0)
        w1, w2 = self.wind
        cw = wind_coefficient(self.wind, self.air_density)
        speed = math.hypot(w1, w2)
        return (cw * w1 * speed / self.water_density, cw * w2 * speed / self.water_density)

    def friction_coefficient(self, h: float) -> float:
        if not self.friction_on:
            return 0.0
        if self.manning is not None:
            cz = h ** (1 / 6) / self.manning
            return self.gravity / cz**2
        return self.bed_friction

    @property
    def active(self) -> bool:
        has_bed = self.bed_slope_on and self.bed_elevation is not None and np.any(self.bed_elevation)
        has_fric = self.friction_on and (self.bed_friction != 0 or self.manning is not None)
        has_wind = self.wind_on and self.wind != (0.0, 0.0)
        has_cor = self.coriolis_on and self.coriolis != 0
        return bool(has_bed or has_fric or has_wind or has_cor)


def force_vector(state: MacroState, force: ForceParams, bed_grad=(0.0, 0.0)) -> np.ndarray:
    """Depth-integrated body force per unit density, ``F = (F_x, F_y)``."""
    h = state.h
    u1, u2 = state.u
    g = force.gravity
    fx = fy = 0.0
    if force.bed_slope_on:
        fx -= g * h * bed_grad[0]
        fy -= g * h * bed_grad[1]
    speed = math.hypot(u1, u2)
    cb = force.friction_coefficient(h)
    # T_b / rho0 = C_b u |u|
    fx -= cb * u1 * speed
    fy -= cb * u2 * speed
    wx, wy = force.wind_acceleration()
    fx += wx
    fy += wy
    if force.coriolis_on:
        fx -= force.coriolis * h * u2
        fy += force.coriolis * h * u1
    return np.array([fx, fy])


def bed_gradient(z: np.ndarray, dx: float, periodic_x=False, periodic_y=False):
    """Centered differences inside, one-sided at non-periodic edges."""
    z = np.asarray(z, dtype=float)
    out = []
    for axis, periodic in ((0, periodic_x), (1, periodic_y)):
        if z.shape[axis] < 2:
            out.append(np.zeros_like(z))
        elif periodic:
            out.append((np.roll(z, -1, axis) - np.roll(z, 1, axis)) / (2.0 * dx))
        else:
            out.append(np.gradient(z, dx, axis=axis))
    return out[0], out[1]


# ---------------------------------------------------------------------------
# boundary conditions

DepthValue = Union[float, Callable[[float], float]]


@dataclass
class DischargeInflow:
    """Unit discharge ``q`` (m^2/s) entering through the side; depth extrapolated."""

    q: float
    kind: str = field(default="discharge", init=False)


@dataclass
class DepthBoundary:
    """Imposed depth (constant or function of time); velocity extrapolated."""

    depth: DepthValue
    kind: str = field(default="depth", init=False)

    def value(self, t: float) -> float:
        return float(self.depth(t)) if callable(self.depth) else float(self.depth)


@dataclass
class VelocityBoundary:
    """Imposed velocity; depth extrapolated."""

    velocity: tuple[float, float] = (0.0, 0.0)
    kind: str = field(default="velocity", init=False)


@dataclass
class Wall:
    """Solid wall along the side: bounce-back (no-slip) or zero normal gradient (slip)."""

    slip: bool = False
    kind: str = field(default="wall", init=False)


@dataclass
class Periodic:
    kind: str = field(default="periodic", init=False)


BoundaryCondition = Union[DischargeInflow, DepthBoundary, VelocityBoundary, Wall, Periodic]


def _side_indices(grid: Grid, side: str):
    """(edge node flat indices, inward-neighbour flat indices, inward normal) along a side."""
    nx, ny = grid.nx, grid.ny
    if side == "west":
        edge = np.arange(ny) + 0 * ny
        inner = edge + ny
        normal = (1.0, 0.0)
    elif side == "east":
        edge = (nx - 1) * ny + np.arange(ny)
        inner = edge - ny
        normal = (-1.0, 0.0)
    elif side == "south":
        edge = np.arange(nx) * ny
        inner = edge + 1
        normal = (0.0, 1.0)
    elif side == "north":
        edge = np.arange(nx) * ny + ny - 1
        inner = edge - 1
        normal = (0.0, -1.0)
    else:
        raise ValueError(f"unknown side {side!r}")
    return edge.astype(np.intp), inner.astype(np.intp), normal


def equilibrium_field(coef, c, e, g, h, ux, uy) -> np.ndarray:
    """Vectorised equilibrium, shape (len(h), Q); same operation order as the kernels."""
    h = np.asarray(h, dtype=float)
    Ux = np.asarray(ux, dtype=float) / e
    Uy = np.asarray(uy, dtype=float) / e
    usq = Ux * Ux + Uy * Uy
    s = g * h / (e * e)
    A, B, C, D, E = coef
    cu = c[:, 0] * Ux[:, None] + c[:, 1] * Uy[:, None]
    t = A + B * s[:, None]
    t = t + C * cu
    t = t + D * (cu * cu)
    t = t + E * usq[:, None]
    return h[:, None] * t


# ---------------------------------------------------------------------------
# configuration and state


def lb_viscosity(tau_hat: float) -> float:
    if tau_hat < 0.5:
        raise ValueError(f"scaled relaxation time must be >= 1/2, got {tau_hat}")
    return (2 * tau_hat - 1) / 6


def physical_viscosity(nu_hat: float, e: float, dt: float) -> float:
    return nu_hat * e * e * dt


@dataclass
class SimulationConfig:
    spec: EquilibriumSpec
    grid: Grid
    force: ForceParams
    tau_hat: float
    boundaries: Mapping[str, BoundaryCondition]
    initial_depth: np.ndarray
    initial_velocity: tuple[np.ndarray, np.ndarray] | None = None
    threshold: float = 5e-6
    max_iterations: int = 200_000
    # R is only tested from this step on; a start-up state that is steady in
    # the interior gives R = 0 before boundary information has propagated
    min_iterations: int = 10
    output_every: int = 0
    threads: int = 1
    backend: str | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.spec.family.model is not Model.D2Q9:
            raise ValueError("the solver streams on a square lattice; use a D2Q9 family")
        if not self.tau_hat > 0.5:
            raise ValueError(f"tau_hat must exceed 1/2, got {self.tau_hat}")
        e = self.grid.e
        if not math.isclose(self.spec.e, e, rel_tol=1e-12):
            raise ValueError(f"lattice speed {self.spec.e} does not match dx/dt = {e}")
        if not math.isclose(self.spec.g, self.force.gravity, rel_tol=1e-12):
            raise ValueError("equilibrium gravity and force gravity differ")
        self.initial_depth = np.asarray(self.initial_depth, dtype=float)
        if self.initial_depth.shape != self.grid.shape:
            raise ValueError("initial depth has wrong shape")
        bcs = dict(self.boundaries)
        for side in SIDES:
            bcs.setdefault(side, Wall())
        self.boundaries = bcs
        self._check_boundaries()

    def _check_boundaries(self):
        g = self.grid
        for axis, (lo, hi), periodic in (
            ("x", ("west", "east"), g.periodic_x),
            ("y", ("south", "north"), g.periodic_y),
        ):
            kinds = {self.boundaries[lo].kind, self.boundaries[hi].kind}
            if periodic != ("periodic" in kinds):
                raise ValueError(f"periodicity in {axis} must match the {lo}/{hi} boundary specs")
            if "periodic" in kinds and kinds != {"periodic"}:
                raise ValueError(f"{lo} and {hi} must both be periodic")
        open_nodes = np.isin(g.mask, (CellType.INFLOW, CellType.OUTFLOW))
        covered = np.zeros_like(open_nodes)
        for side, bc in self.boundaries.items():
            if bc.kind in ("discharge", "depth", "velocity"):
                edge, _, _ = _side_indices(g, side)
                covered.ravel()[edge] = True
        uncovered = open_nodes & ~covered
        if np.any(uncovered):
            ix, iy = np.argwhere(uncovered)[0]
            raise ValueError(f"open-boundary node ({ix}, {iy}) is not covered by any boundary spec")

    @property
    def nu_hat(self) -> float:
        return lb_viscosity(self.tau_hat)


class DistributionField:
    """Populations on the grid, double-buffered, plus current moments."""

    def __init__(self, grid: Grid, spec: EquilibriumSpec):
        self.grid = grid
        self.spec = spec
        self.vs = spec.velocity_set
        n = grid.nx * grid.ny
        q = self.vs.n
        self.f = np.zeros((n, q))
        self.f_next = np.zeros((n, q))
        self.h = np.zeros(n)
        self.ux = np.zeros(n)
        self.uy = np.zeros(n)
        self.step = 0
        self.time = 0.0

    @classmethod
    def at_equilibrium(cls, grid, spec, h, ux=None, uy=None) -> "DistributionField":
        fld = cls(grid, spec)
        h = np.asarray(h, dtype=float).ravel()
        ux = np.zeros_like(h) if ux is None else np.asarray(ux, dtype=float).ravel()
        uy = np.zeros_like(h) if uy is None else np.asarray(uy, dtype=float).ravel()
        act = grid.active_nodes
        fld.f[act] = equilibrium_field(spec.coefficients(), fld.vs.c, spec.e, spec.g, h[act], ux[act], uy[act])
        fld.update_moments()
        return fld

    @property
    def populations(self) -> np.ndarray:
        return self.f.reshape(self.grid.nx, self.grid.ny, self.vs.n)

    def update_moments(self, backend=None, threads: int = 1) -> None:
        impl = backend or kernels
        impl.moments(self.f, self.grid.active_nodes, self.spec.e, self.h, self.ux, self.uy, threads)

    def depth(self) -> np.ndarray:
        return self.h.reshape(self.grid.shape).copy()

    def velocity(self) -> tuple[np.ndarray, np.ndarray]:
        return self.ux.reshape(self.grid.shape).copy(), self.uy.reshape(self.grid.shape).copy()

    def total_mass(self) -> float:
        return math.fsum(self.h[self.grid.active_nodes])

    def copy(self) -> "DistributionField":
        out = DistributionField(self.grid, self.spec)
        for name in ("f", "f_next", "h", "ux", "uy"):
            setattr(out, name, getattr(self, name).copy())
        out.step, out.time = self.step, self.time
        return out


# ---------------------------------------------------------------------------
# one step


class _ForceCache:
    def __init__(self, grid: Grid, force: ForceParams):
        n = grid.nx * grid.ny
        if force.bed_slope_on and force.bed_elevation is not None:
            gx, gy = bed_gradient(force.bed_elevation, grid.dx, grid.periodic_x, grid.periodic_y)
            self.dzdx = np.ascontiguousarray(gx.ravel())
            self.dzdy = np.ascontiguousarray(gy.ravel())
        else:
            self.dzdx = np.zeros(n)
            self.dzdy = np.zeros(n)
        self.wind = force.wind_acceleration()


def _force_cache(grid: Grid, force: ForceParams) -> _ForceCache:
    cache = force.__dict__.setdefault("_cache", {})
    key = id(grid)
    if key not in cache:
        cache[key] = _ForceCache(grid, force)
    return cache[key]


class _StepPlan:
    """Kernel arguments that stay fixed between steps."""

    def __init__(self, fld: DistributionField, spec: EquilibriumSpec, force: ForceParams, tau_hat: float):
        grid = fld.grid
        vs = fld.vs
        fc = _force_cache(grid, force)
        self.key = (spec, id(force), tau_hat)
        self.args = (
            grid.active_nodes,
            grid.stream_table(vs.c, vs.opposite),
            np.ascontiguousarray(spec.coefficients()),
            np.ascontiguousarray(vs.c),
            spec.e,
            spec.g,
            1.0 / tau_hat,
            np.ascontiguousarray(3.0 * vs.weights * grid.dt / spec.e),
            fc.dzdx,
            fc.dzdy,
            force.bed_friction if force.friction_on else 0.0,
            force.manning if (force.friction_on and force.manning is not None) else 0.0,
            fc.wind[0],
            fc.wind[1],
            force.coriolis if force.coriolis_on else 0.0,
            force.active,
        )


def collide_stream_step(
    fld: DistributionField,
    spec: EquilibriumSpec,
    force: ForceParams,
    tau_hat: float,
    *,
    backend=None,
    threads: int = 1,
) -> DistributionField:
    """Collide every non-solid node and push along the links; swaps the buffers.

    Boundary nodes are left for :func:`apply_boundaries`; moments are not
    refreshed here.
    """
    plan = fld.__dict__.get("_plan")
    if plan is None or plan.key != (spec, id(force), tau_hat):
        plan = fld._plan = _StepPlan(fld, spec, force, tau_hat)
    impl = backend or kernels
    impl.collide_stream(fld.f, fld.f_next, *plan.args, threads)
    fld.f, fld.f_next = fld.f_next, fld.f
    fld.step += 1
    fld.time = fld.step * fld.grid.dt
    return fld


def _edge_moments(fld: DistributionField, idx: np.ndarray):
    from ._pykernels import _moments9

    h, jx, jy = _moments9(fld.f[idx])
    e = fld.spec.e
    return h, jx / h * e, jy / h * e


def _side_plan(grid: Grid, side: str):
    cache = grid.__dict__.setdefault("_side_cache", {})
    if side not in cache:
        mask = grid.mask.ravel()
        edge, inner, normal = _side_indices(grid, side)
        wet = mask[edge] != CellType.SOLID
        is_open = np.isin(mask[edge], (CellType.INFLOW, CellType.OUTFLOW))
        cache[side] = (edge[wet], inner[wet], edge[is_open], inner[is_open], normal)
    return cache[side]


class _Closure:
    """Index sets for rebuilding the populations entering through a side.

    With inward normal n and tangent t: ``unknown`` have c.n > 0, their
    opposites ``known`` have c.n < 0, ``tang`` have c.n = 0.
    """

    def __init__(self, c: np.ndarray, opposite: np.ndarray, odd: np.ndarray, normal):
        n = np.asarray(normal)
        t = np.array([-n[1], n[0]])
        cn = c @ n
        ct = c @ t
        self.n, self.t = n, t
        self.unknown = np.flatnonzero(cn > 0.5)
        self.mirror = opposite[self.unknown]
        self.tang = np.flatnonzero(np.abs(cn) < 0.5)
        self.outgoing = np.flatnonzero(cn < -0.5)
        self.t_plus = int(np.flatnonzero((np.abs(cn) < 0.5) & (ct > 0.5))[0])
        self.t_minus = int(np.flatnonzero((np.abs(cn) < 0.5) & (ct < -0.5))[0])
        self.tcomp = ct[self.unknown]
        self.odd = odd[self.unknown]


def _closure(fld: DistributionField, normal) -> _Closure:
    cache = fld.__dict__.setdefault("_closures", {})
    key = tuple(normal)
    if key not in cache:
        coef = fld.spec.coefficients()
        cache[key] = _Closure(fld.vs.c, fld.vs.opposite, coef[2], normal)
    return cache[key]


def _rebuild(fld: DistributionField, edge, cl: _Closure, h, un, vt):
    """Set the entering populations so that depth h, normal and tangential
    velocities (scaled by e) un, vt hold exactly."""
    f = fld.f
    fe = f[edge]
    dt_ = fe[:, cl.t_plus] - fe[:, cl.t_minus]
    hu = h * un
    tcorr = 0.5 * (h * vt - dt_)
    for k, i in enumerate(cl.unknown):
        f[edge, i] = fe[:, cl.mirror[k]] + 2.0 * cl.odd[k] * hu + cl.tcomp[k] * tcorr


def apply_boundaries(fld: DistributionField, boundaries: Mapping[str, BoundaryCondition]) -> DistributionField:
    """Slip walls first, then open boundaries (which read the inward neighbours).

    Discharge inflow: equilibrium at the extrapolated depth with u = q/h.
    Depth: equilibrium at the imposed depth carrying the neighbour's unit
    discharge (extrapolating h u rather than u keeps the subcritical solution
    unique). Velocity: only the entering populations are rebuilt, from the
    mass and momentum balance at the edge node.
    """
    grid = fld.grid
    for side in SIDES:
        bc = boundaries.get(side)
        if isinstance(bc, Wall) and bc.slip:
            edge, inner, _, _, _ = _side_plan(grid, side)
            fld.f[edge] = fld.f[inner]
    spec = fld.spec
    e = spec.e
    coef = spec.coefficients()
    for side in SIDES:
        bc = boundaries.get(side)
        if bc is None or bc.kind not in ("discharge", "depth", "velocity"):
            continue
        _, _, edge, inner, normal = _side_plan(grid, side)
        if edge.size == 0:
            continue
        if bc.kind == "discharge":
            h_in, _, _ = _edge_moments(fld, inner)
            speed = bc.q / h_in
            fld.f[edge] = equilibrium_field(coef, fld.vs.c, e, spec.g, h_in, normal[0] * speed, normal[1] * speed)
        elif bc.kind == "depth":
            h_in, ux_in, uy_in = _edge_moments(fld, inner)
            hb = np.full(edge.size, bc.value(fld.time))
            fld.f[edge] = equilibrium_field(coef, fld.vs.c, e, spec.g, hb, h_in * ux_in / hb, h_in * uy_in / hb)
        else:
            cl = _closure(fld, normal)
            fe = fld.f[edge]
            # h (1 - u_n) = sum(tangential) + 2 sum(outgoing)
            known = fe[:, cl.tang].sum(axis=1) + 2.0 * fe[:, cl.outgoing].sum(axis=1)
            u = bc.velocity
            un = np.full(edge.size, (u[0] * cl.n[0] + u[1] * cl.n[1]) / e)
            vt = np.full(edge.size, (u[0] * cl.t[0] + u[1] * cl.t[1]) / e)
            _rebuild(fld, edge, cl, known / (1.0 - un), un, vt)
    return fld


# ---------------------------------------------------------------------------
# drivers


@dataclass
class SteadyResult:
    converged: bool
    iterations: int
    h: np.ndarray
    ux: np.ndarray
    uy: np.ndarray
    R_history: list[float]
    diverged: bool = False
    divergence: str = ""
    snapshots: list = field(default_factory=list)

    @property
    def status(self) -> str:
        if self.converged:
            return "converged"
        return "diverged" if self.diverged else "max_iterations"


@dataclass
class TransientResult:
    time: float
    steps: int
    h: np.ndarray
    ux: np.ndarray
    uy: np.ndarray
    truncated: bool = False
    snapshots: list = field(default_factory=list)


class Simulation:
    """Owns a field and advances it under a configuration."""

    def __init__(self, config: SimulationConfig):
        self.config = config
        grid = config.grid
        ux = uy = None
        if config.initial_velocity is not None:
            ux, uy = config.initial_velocity
        self.field = DistributionField.at_equilibrium(grid, config.spec, config.initial_depth, ux, uy)
        self.backend = kernels.get_backend(config.backend)
        self._act = grid.active_nodes

    def step(self) -> DistributionField:
        cfg = self.config
        fld = self.field
        collide_stream_step(fld, cfg.spec, cfg.force, cfg.tau_hat, backend=self.backend, threads=cfg.threads)
        apply_boundaries(fld, cfg.boundaries)
        fld.update_moments(self.backend, cfg.threads)
        self._check(fld)
        return fld

    def _check(self, fld: DistributionField) -> None:
        h = fld.h[self._act]
        # min() propagates NaN, so one reduction covers both failure modes
        hmin = h.min()
        if hmin > DRY_DEPTH and math.isfinite(h.sum()) and math.isfinite(fld.ux[self._act].sum() + fld.uy[self._act].sum()):
            return
        bad = ~(np.isfinite(h) & (h > DRY_DEPTH))
        bad |= ~np.isfinite(fld.ux[self._act]) | ~np.isfinite(fld.uy[self._act])
        k = int(np.flatnonzero(bad)[0])
        raise DivergenceDetected(fld.step, divmod(int(self._act[k]), fld.grid.ny), float(h[k]))

    def _snapshot(self):
        fld = self.field
        return {"step": fld.step, "time": fld.time, "h": fld.depth(), "ux": fld.velocity()[0], "uy": fld.velocity()[1]}

    def run_to_steady(self, progress: Callable[[int, float], None] | None = None) -> SteadyResult:
        cfg = self.config
        act = self._act
        history: list[float] = []
        snaps = []
        h_old = self.field.h[act].copy()
        converged = diverged = False
        reason = ""
        for _ in range(cfg.max_iterations):
            try:
                self.step()
            except DivergenceDetected as exc:
                diverged, reason = True, str(exc)
                break
            h_new = self.field.h[act]
            d = (h_new - h_old) / h_new
            r = math.sqrt(float(d @ d))
            history.append(r)
            h_old[:] = h_new
            if cfg.output_every and self.field.step % cfg.output_every == 0:
                snaps.append(self._snapshot())
                if progress:
                    progress(self.field.step, r)
            if r < cfg.threshold and self.field.step >= cfg.min_iterations:
                converged = True
                break
        fld = self.field
        ux, uy = fld.velocity()
        return SteadyResult(
            converged=converged,
            iterations=fld.step,
            h=fld.depth(),
            ux=ux,
            uy=uy,
            R_history=history,
            diverged=diverged,
            divergence=reason,
            snapshots=snaps,
        )

    def run_transient(self, t_end: float, snapshot_every: int = 0) -> TransientResult:
        dt = self.config.grid.dt
        ratio = t_end / dt
        steps = int(math.floor(ratio + 1e-9))
        truncated = abs(ratio - round(ratio)) > 1e-9
        if truncated:
            log.warning("t_end=%g is not a multiple of dt=%g; running %d steps", t_end, dt, steps)
        snaps = []
        for _ in range(steps):
            self.step()
            if snapshot_every and self.field.step % snapshot_every == 0:
                snaps.append(self._snapshot())
        fld = self.field
        ux, uy = fld.velocity()
        return TransientResult(fld.time, fld.step, fld.depth(), ux, uy, truncated, snaps)


def run_to_steady(config: SimulationConfig, progress=None) -> SteadyResult:
    return Simulation(config).run_to_steady(progress)


def run_transient(config: SimulationConfig, t_end: float, snapshot_every: int = 0) -> TransientResult:
    """Advance ``floor(t_end/dt)`` steps. Divergence propagates as DivergenceDetected."""
    return Simulation(config).run_transient(t_end, snapshot_every)
