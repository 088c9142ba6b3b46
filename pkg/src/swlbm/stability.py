"""Stability structures of the BGK collision operator at rest states.

A model is stable at ``f* = f^eq(hbar, 0)`` when there is an invertible P
with P^T P diagonal and ``P J_f(f*) = -diag(lam) P``, where ``lam`` has
three zeros (the conserved h, hu_x, hu_y) and positive entries otherwise.
The construction goes through a diagonal symmetriser: a positive-definite
diagonal matrix S such that ``S . J`` is symmetric, J being the equilibrium
Jacobian at rest.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .lattice import (
    EquilibriumSpec,
    Family,
    MacroState,
    equilibrium_jacobian,
    numerical_rank,
)

__all__ = [
    "Verdict",
    "SingularScalingError",
    "StabilityReport",
    "StabilityStructure",
    "Interval",
    "scaling_matrix",
    "verify_stability",
    "construct_structure",
    "stable_g_interval",
    "empirical_g_bound",
    "scan",
    "write_scan_csv",
    "DEFAULT_TOL",
]

DEFAULT_TOL = 1e-10
EIG_TOL = 1e-8
RANK_RTOL = 1e-9


class Verdict(str, Enum):
    STABLE = "Stable"
    UNSTABLE = "Unstable"
    INDETERMINATE = "Indeterminate"


class SingularScalingError(ZeroDivisionError):
    """A denominator of the diagonal symmetriser vanishes exactly."""


def _max_norm(m: np.ndarray) -> float:
    return float(np.max(np.abs(m))) if m.size else 0.0


def scaling_matrix(spec: EquilibriumSpec, hbar: float) -> np.ndarray:
    """Diagonal of the symmetriser (B0 for D2Q7, C0 for Salmon D2Q9, D0 for the lambda family).

    Entries may be negative when the parameters leave the admissible range.
    """
    if not hbar > 0:
        raise ValueError(f"hbar must be positive, got {hbar}")
    g, e = spec.g, spec.e
    gh, e2 = g * hbar, e * e
    fam = spec.family

    if fam is Family.D2Q7:
        den0 = e2 - 2 * gh
        if den0 == 0:
            raise SingularScalingError("e^2 - 2 g hbar = 0")
        return np.array([e2 / den0] + [3 * e2 / gh] * 6)

    if fam in (Family.D2Q9_SALMON, Family.D2Q9_STANDARD):
        den0 = 3 * e2 - 5 * gh
        if den0 == 0:
            raise SingularScalingError("3 e^2 - 5 g hbar = 0")
        pref = 3 * e2 / gh
        return pref * np.array([gh / den0] + [1.0] * 4 + [4.0] * 4)

    lam = spec.lam
    den0 = (8 + lam) * e2 - 3 * (4 + lam) * gh
    den_axis = (1 - lam) * e2 + 3 * (1 + lam) * gh
    den_diag = (lam - 1) * e2 + 3 * (2 - lam) * gh
    for name, den in (("rest", den0), ("axis", den_axis), ("diagonal", den_diag)):
        if den == 0:
            raise SingularScalingError(f"{name} denominator of D0 vanishes")
    return np.array([9 * e2 / den0] + [18 * e2 / den_axis] * 4 + [36 * e2 / den_diag] * 4)


@dataclass
class StabilityReport:
    projection_defect: float
    scaling_diag: np.ndarray
    scaling_positive_definite: bool
    symmetry_defect: float
    jacobian_rank: int
    collision_rank: int
    eigenvalues: np.ndarray
    verdict: Verdict
    reasons: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "projection_defect": self.projection_defect,
            "scaling_diag": [float(x) for x in self.scaling_diag],
            "scaling_positive_definite": self.scaling_positive_definite,
            "symmetry_defect": self.symmetry_defect,
            "jacobian_rank": self.jacobian_rank,
            "collision_rank": self.collision_rank,
            "eigenvalues": [float(x) for x in np.sort(np.real(self.eigenvalues))],
            "reasons": list(self.reasons),
        }


@dataclass
class StabilityStructure:
    P: np.ndarray
    a: np.ndarray
    lam: np.ndarray


def _rest_jacobian(spec: EquilibriumSpec, hbar: float) -> np.ndarray:
    return equilibrium_jacobian(spec, MacroState(hbar, (0.0, 0.0)))


def verify_stability(
    spec: EquilibriumSpec, hbar: float, tau: float, tol: float = DEFAULT_TOL
) -> StabilityReport:
    """Check the stability structure at the rest state ``(hbar, 0)``.

    Raises SingularScalingError when the symmetriser is undefined.
    """
    if not hbar > 0:
        raise ValueError(f"hbar must be positive, got {hbar}")
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")

    n = spec.velocity_set.n
    J = _rest_jacobian(spec, hbar)
    jnorm = _max_norm(J)
    projection_defect = _max_norm(J @ J - J) / jnorm

    d = scaling_matrix(spec, hbar)
    finite = bool(np.all(np.isfinite(d)))
    pd = finite and bool(np.all(d > 0))

    SJ = d[:, None] * J
    snorm = _max_norm(SJ)
    symmetry_defect = _max_norm(SJ - SJ.T) / snorm if snorm > 0 and finite else math.inf

    jf = (J - np.eye(n)) / tau
    eigenvalues = np.linalg.eigvals(jf)
    scaled = eigenvalues * tau
    n_zero = int(np.sum(np.abs(scaled) < EIG_TOL))
    n_minus_one = int(np.sum(np.abs(scaled + 1) < EIG_TOL))
    spectrum_ok = n_zero == 3 and n_minus_one == n - 3

    reasons: list[str] = []
    verdict = Verdict.STABLE
    if projection_defect >= tol:
        reasons.append(f"equilibrium Jacobian is not a projection (defect {projection_defect:.3e})")
        verdict = Verdict.UNSTABLE
    if not spectrum_ok:
        reasons.append(f"spectrum of tau*J_f has {n_zero} zeros and {n_minus_one} entries at -1")
        verdict = Verdict.UNSTABLE
    if not pd:
        reasons.append("symmetriser is not positive definite")
        verdict = Verdict.UNSTABLE
    if symmetry_defect >= 100 * tol:
        reasons.append(f"symmetriser does not symmetrise J (defect {symmetry_defect:.3e})")
        verdict = Verdict.UNSTABLE
    elif symmetry_defect >= tol and verdict is Verdict.STABLE:
        reasons.append(f"symmetry defect {symmetry_defect:.3e} inside guard band")
        verdict = Verdict.INDETERMINATE

    if verdict is Verdict.STABLE and finite:
        # entries of 1/d are the self-coupling coefficients of J; near zero the PD test is unreliable
        inv = 1.0 / d
        if np.min(np.abs(inv)) < 100 * tol * np.max(np.abs(inv)):
            reasons.append("symmetriser entry is near-singular")
            verdict = Verdict.INDETERMINATE

    return StabilityReport(
        projection_defect=projection_defect,
        scaling_diag=d,
        scaling_positive_definite=pd,
        symmetry_defect=symmetry_defect,
        jacobian_rank=numerical_rank(J, RANK_RTOL),
        collision_rank=numerical_rank(jf, RANK_RTOL),
        eigenvalues=eigenvalues,
        verdict=verdict,
        reasons=reasons,
    )


def construct_structure(
    spec: EquilibriumSpec, hbar: float, tau: float, tol: float = DEFAULT_TOL
) -> StabilityStructure:
    """Build ``(P, a, lam)`` from the symmetric eigendecomposition of
    ``B^{1/2} (-tau J_f) B^{-1/2}``; then ``P = Q^T B^{1/2}``.
    """
    report = verify_stability(spec, hbar, tau, tol)
    if report.verdict is not Verdict.STABLE:
        raise ValueError(f"no stability structure: verdict is {report.verdict.value}")
    n = spec.velocity_set.n
    J = _rest_jacobian(spec, hbar)
    b = report.scaling_diag
    root = np.sqrt(b)
    S = root[:, None] * (np.eye(n) - J) / root[None, :]
    S = 0.5 * (S + S.T)
    w, Q = np.linalg.eigh(S)
    order = np.argsort(w)
    w, Q = w[order], Q[:, order]
    w[np.abs(w) < EIG_TOL] = 0.0
    P = Q.T * root[None, :]
    return StabilityStructure(P=P, a=b.copy(), lam=w / tau)


@dataclass(frozen=True)
class Interval:
    """Admissible set for g: an open interval ``(lo, hi)`` or a single point."""

    lo: float
    hi: float
    point: bool = False

    def __contains__(self, g: float) -> bool:
        if self.point:
            return g == self.lo
        return self.lo < g < self.hi

    def distance_to_boundary(self, g: float) -> float:
        if self.point:
            return abs(g - self.lo)
        return min(abs(g - self.lo), abs(g - self.hi))

    def __str__(self) -> str:
        if self.point:
            return f"{{{self.lo:g}}}"
        return f"({self.lo:g}, {self.hi:g})"


def stable_g_interval(
    family: Family | str, hbar: float, e: float, lam: float | None = None
) -> Interval:
    """Closed-form admissible reduced gravity at the rest state.

    ``family`` also accepts ``"D2Q5"``, for which only the bound is known.
    """
    if not (hbar > 0 and e > 0):
        raise ValueError("hbar and e must be positive")
    e2 = e * e
    if str(family).upper() == "D2Q5":
        return Interval(0.0, e2 / (2 * hbar))
    family = Family(family)
    if family is Family.D2Q7:
        return Interval(0.0, e2 / (2 * hbar))
    if family is Family.D2Q9_LAMBDA and (lam if lam is not None else 1.0) != 1.0:
        return Interval(e2 / (3 * hbar), e2 / (3 * hbar), point=True)
    return Interval(0.0, 3 * e2 / (5 * hbar))


def empirical_g_bound(e: float) -> Interval:
    """The bound ``(0, 3/(5e))`` used when choosing the numerical g values of the hump runs."""
    return Interval(0.0, 3 / (5 * e))


@dataclass
class ScanCell:
    g: float
    lam: float | None
    verdict: str
    projection_defect: float
    symmetry_defect: float
    rank: int
    error: str = ""


def _scan_cell(family: Family, g: float, lam, e: float, hbar: float, tau: float, tol: float) -> ScanCell:
    try:
        spec = EquilibriumSpec(family, g, e, 1.0 if lam is None else lam)
        rep = verify_stability(spec, hbar, tau, tol)
    except (SingularScalingError, ValueError) as exc:
        return ScanCell(g, lam, "Error", math.nan, math.nan, -1, f"{type(exc).__name__}: {exc}")
    return ScanCell(
        g, lam, rep.verdict.value, rep.projection_defect, rep.symmetry_defect, rep.collision_rank
    )


def scan(
    family: Family | str,
    g_grid: Sequence[float],
    lambda_grid: Iterable[float] | None = None,
    *,
    e: float,
    hbar: float,
    tau: float,
    tol: float = DEFAULT_TOL,
    threads: int = 1,
) -> list[list[ScanCell]]:
    """Verdict map over ``lambda_grid x g_grid``.

    An empty ``lambda_grid`` yields a single row evaluated at the family's
    default lambda. Per-cell failures are recorded, never raised.
    """
    family = Family(family)
    g_grid = list(g_grid)
    if not g_grid:
        raise ValueError("g_grid must be nonempty")
    lams = list(lambda_grid) if lambda_grid is not None else []
    rows: list[float | None] = lams if lams else [None]
    jobs = [(g, lam) for lam in rows for g in g_grid]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            cells = list(pool.map(lambda gl: _scan_cell(family, gl[0], gl[1], e, hbar, tau, tol), jobs))
    else:
        cells = [_scan_cell(family, g, lam, e, hbar, tau, tol) for g, lam in jobs]
    ng = len(g_grid)
    return [cells[k * ng : (k + 1) * ng] for k in range(len(rows))]


SCAN_COLUMNS = ("g", "lambda", "verdict", "projection_defect", "symmetry_defect", "rank")


def write_scan_csv(grid: list[list[ScanCell]], fh) -> None:
    writer = csv.writer(fh, lineterminator="\r\n")
    writer.writerow(SCAN_COLUMNS)
    for row in grid:
        for c in row:
            writer.writerow(
                [
                    repr(c.g),
                    "" if c.lam is None else repr(c.lam),
                    c.verdict,
                    repr(c.projection_defect),
                    repr(c.symmetry_defect),
                    c.rank,
                ]
            )
