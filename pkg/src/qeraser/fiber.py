"""Weakly guiding step-index fiber: LP dispersion roots and radial profiles.

The core/cladding parameters are the dimensionless ``u`` (Bessel argument
scale in the core) and ``w`` (modified Bessel scale in the cladding), stored
as ``beta`` and ``sigma`` per mode with ``beta**2 + sigma**2 == V**2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import jv, kv, kve

SCAN_POINTS = 4000


class FiberModeError(ValueError):
    pass


class BelowCutoffError(FiberModeError):
    pass


@dataclass(frozen=True)
class FiberGeometry:
    core_radius_um: float = 15.0
    n_core: float = 1.4607
    n_clad: float = 1.4570
    wavelength_nm: float = 633.0

    def __post_init__(self):
        if self.core_radius_um <= 0:
            raise ValueError("core radius must be positive")
        if self.n_core <= self.n_clad:
            raise ValueError("core index must exceed cladding index")
        if self.wavelength_nm <= 0:
            raise ValueError("wavelength must be positive")

    @property
    def numerical_aperture(self) -> float:
        return math.sqrt(self.n_core**2 - self.n_clad**2)

    @property
    def v_number(self) -> float:
        k = 2 * math.pi / (self.wavelength_nm * 1e-3)
        return k * self.core_radius_um * self.numerical_aperture


def _characteristic(u, v: float, l: int):
    # u J_{l+1}(u) K_l(w) - w K_{l+1}(w) J_l(u); pole-free, scaled K avoids overflow.
    w = np.sqrt(np.maximum(v * v - np.square(u), 0.0))
    return u * jv(l + 1, u) * kve(l, w) - w * kve(l + 1, w) * jv(l, u)


def dispersion_residual(beta: float, sigma: float, l: int) -> float:
    """Mismatch of the log-derivative continuity condition at the core edge."""
    return abs(beta * jv(l + 1, beta) / jv(l, beta) - sigma * kv(l + 1, sigma) / kv(l, sigma))


def solve_fiber_mode(geometry: FiberGeometry, ell: int, p: int) -> tuple[float, float]:
    """Return ``(beta, sigma)`` for the LP_{|ell| p} mode.

    Roots are bracketed by a sign-change scan of the characteristic function
    on (0, V) and refined with Brent's method.
    """
    if p < 1:
        raise FiberModeError(f"radial index p must be >= 1, got {p}")
    l = abs(int(ell))
    v = geometry.v_number
    upper = v * (1 - 1e-12)
    grid = np.linspace(1e-9 * v, upper, SCAN_POINTS)
    vals = _characteristic(grid, v, l)
    brackets = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
    if len(brackets) < p:
        raise BelowCutoffError(
            f"LP_{l}{p} is below cutoff at V={v:.4f} (only {len(brackets)} guided root(s))"
        )
    i = brackets[p - 1]
    beta = brentq(
        lambda u: float(_characteristic(u, v, l)), grid[i], grid[i + 1],
        xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500,
    )
    sigma = math.sqrt(v * v - beta * beta)
    return beta, sigma


@dataclass
class FiberSpec:
    """Fiber geometry plus solved ``(beta, sigma)`` per (|ell|, p) mode."""

    geometry: FiberGeometry = field(default_factory=FiberGeometry)
    modes: dict = field(default_factory=dict)

    @classmethod
    def solved(cls, geometry: FiberGeometry, mode_indices) -> "FiberSpec":
        spec = cls(geometry)
        for ell, p in mode_indices:
            spec.add_mode(ell, p)
        return spec

    @property
    def core_radius_um(self) -> float:
        return self.geometry.core_radius_um

    def add_mode(self, ell: int, p: int) -> tuple[float, float]:
        key = (abs(int(ell)), int(p))
        self.modes[key] = solve_fiber_mode(self.geometry, ell, p)
        return self.modes[key]

    def mode(self, ell: int, p: int) -> tuple[float, float]:
        try:
            return self.modes[(abs(int(ell)), int(p))]
        except KeyError:
            raise FiberModeError(f"mode (ell={ell}, p={p}) not present in fiber spec") from None


def radial_profile(fiber: FiberSpec, ell: int, p: int, r) -> np.ndarray | float:
    """Field amplitude normalized to 1 at the core boundary ``r == a`` (micrometers)."""
    beta, sigma = fiber.mode(ell, p)
    l = abs(int(ell))
    a = fiber.core_radius_um
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0):
        raise ValueError("radius must be non-negative")
    x = r_arr / a
    inside = jv(l, beta * x) / jv(l, beta)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        # kve(l, s x) / kve(l, s) * exp(-s (x - 1)) == kv(l, s x) / kv(l, s)
        outside = kve(l, sigma * np.maximum(x, 1.0)) / kve(l, sigma) * np.exp(-sigma * (np.maximum(x, 1.0) - 1.0))
    out = np.where(x < 1.0, inside, outside)
    return float(out) if np.ndim(out) == 0 else out
