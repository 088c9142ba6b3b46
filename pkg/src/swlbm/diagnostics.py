"""Error norms, steady-state monitoring and discharge audits.

All reductions use compensated summation (``math.fsum``) and skip solid
nodes when a mask is supplied.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

__all__ = [
    "ErrorReport",
    "global_relative_error",
    "l2_error",
    "discharge_profile",
    "discharge_deviation",
]


def _select(a, mask):
    a = np.asarray(a, dtype=float)
    return a[mask] if mask is not None else a.ravel()


def global_relative_error(h_new, h_old, mask=None) -> float:
    """R = sqrt(sum(((h_new - h_old)/h_new)^2)); the denominator is the newer level."""
    hn = _select(h_new, mask)
    ho = _select(h_old, mask)
    if hn.shape != ho.shape:
        raise ValueError(f"shape mismatch {hn.shape} vs {ho.shape}")
    if np.any(hn <= 0):
        raise ValueError("h_new must be positive on counted nodes")
    d = (hn - ho) / hn
    return math.sqrt(math.fsum(d * d))


def l2_error(numeric, analytic, mask=None) -> float:
    """sqrt(sum|c - c~|^2 / sum|c~|^2)."""
    c = _select(numeric, mask)
    ref = _select(analytic, mask)
    if c.shape != ref.shape:
        raise ValueError(f"shape mismatch {c.shape} vs {ref.shape}")
    den = math.fsum(ref * ref)
    if not den > 0:
        raise ValueError("analytic field is identically zero")
    diff = c - ref
    return math.sqrt(math.fsum(diff * diff) / den)


def discharge_profile(h, u1, dy: float, width: float | None = None, mask=None) -> np.ndarray:
    """Per-column discharge q(x) = sum_y h u1 dy / width, fields shaped (nx, ny)."""
    h = np.asarray(h, dtype=float)
    u1 = np.asarray(u1, dtype=float)
    if h.shape != u1.shape or h.ndim != 2:
        raise ValueError("h and u1 must be matching (nx, ny) arrays")
    flux = h * u1 * dy
    if mask is not None:
        flux = np.where(mask, flux, 0.0)
    if width is None:
        width = h.shape[1] * dy
    return np.array([math.fsum(col) for col in flux]) / width


def discharge_deviation(q_profile, q_in: float) -> float:
    return float(np.max(np.abs(np.asarray(q_profile) - q_in)) / abs(q_in))


@dataclass
class ErrorReport:
    r_global: float
    l2_relative: float
    discharge_deviation: float
    step: int

    def __post_init__(self):
        for name in ("r_global", "l2_relative", "discharge_deviation"):
            v = getattr(self, name)
            if not (v >= 0 or math.isnan(v)):
                raise ValueError(f"{name} must be nonnegative, got {v}")
        if self.step < 0:
            raise ValueError("step must be nonnegative")

    def as_dict(self) -> dict:
        return asdict(self)
