"""Closed-form fit of A (1 + V cos(2 theta + phi)) to an azimuthal scan."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

MIN_SAMPLES = 8
DEGENERATE_REL = 1e-12


class VisibilityError(ValueError):
    """Visibility cannot be defined for the given samples."""


@dataclass(frozen=True)
class FringeFit:
    amplitude: float
    visibility: float
    phase: float
    residual_rms: float
    amplitude_err: float
    visibility_err: float
    phase_err: float
    degenerate: bool = False

    @property
    def p_max(self) -> float:
        return self.amplitude * (1 + self.visibility)

    @property
    def p_min(self) -> float:
        return self.amplitude * (1 - self.visibility)

    def model(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        return self.amplitude * (1 + self.visibility * np.cos(2 * theta + self.phase))


def _check_samples(theta: np.ndarray, y: np.ndarray) -> None:
    if theta.shape != y.shape or theta.ndim != 1:
        raise VisibilityError("theta and counts must be 1-D arrays of equal length")
    if theta.size < MIN_SAMPLES:
        raise VisibilityError(f"need at least {MIN_SAMPLES} theta samples, got {theta.size}")
    if np.ptp(theta) < math.pi / 2 - 1e-9:
        raise VisibilityError("theta samples must span at least half a fringe period (90 deg)")
    if not np.all(np.isfinite(y)) or np.any(y < 0):
        raise VisibilityError("counts must be finite and non-negative")
    if np.sum(y) <= 0:
        raise VisibilityError("all-zero counts: visibility undefined")


def fit_fringe(theta, counts) -> FringeFit:
    """Linear least squares in (A, A V cos phi, A V sin phi).

    The design matrix is [1, cos 2t, -sin 2t]; no starting point is needed.
    Standard errors come from the residual variance and are propagated to
    V and phi to first order.
    """
    theta = np.asarray(theta, dtype=float)
    y = np.asarray(counts, dtype=float)
    _check_samples(theta, y)

    X = np.column_stack([np.ones_like(theta), np.cos(2 * theta), -np.sin(2 * theta)])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    a, c, s = coef
    resid = y - X @ coef
    rms = float(np.sqrt(np.mean(resid**2)))
    dof = max(theta.size - 3, 1)
    cov = np.linalg.inv(X.T @ X) * (np.sum(resid**2) / dof)

    if a <= 0:
        raise VisibilityError("fitted mean level is not positive")
    amp_osc = math.hypot(c, s)
    if amp_osc <= DEGENERATE_REL * abs(a):
        return FringeFit(float(a), 0.0, 0.0, rms, float(math.sqrt(cov[0, 0])), 0.0, math.inf, True)

    vis = amp_osc / a
    phase = float(np.mod(math.atan2(s, c), 2 * math.pi))
    if phase >= 2 * math.pi:  # tiny negative angles round up to 2 pi
        phase = 0.0
    # gradients of V = |(c, s)| / a and phi = atan2(s, c)
    g_v = np.array([-vis / a, c / (amp_osc * a), s / (amp_osc * a)])
    g_p = np.array([0.0, -s / amp_osc**2, c / amp_osc**2])
    vis_err = float(math.sqrt(max(g_v @ cov @ g_v, 0.0)))
    phase_err = float(math.sqrt(max(g_p @ cov @ g_p, 0.0)))
    return FringeFit(
        amplitude=float(a),
        visibility=float(min(max(vis, 0.0), 1.0)),
        phase=phase,
        residual_rms=rms,
        amplitude_err=float(math.sqrt(cov[0, 0])),
        visibility_err=vis_err,
        phase_err=phase_err,
    )


def visibility_from_extrema(p_max: float, p_min: float) -> float:
    if p_max < 0 or p_min < 0:
        raise VisibilityError("extrema must be non-negative")
    if p_max + p_min <= 0:
        raise VisibilityError("all-zero counts: visibility undefined")
    return (p_max - p_min) / (p_max + p_min)


def visibility(theta, counts, raw: bool = False) -> float:
    """Fringe visibility of a scan; ``raw=True`` uses the sample extrema."""
    theta = np.asarray(theta, dtype=float)
    y = np.asarray(counts, dtype=float)
    _check_samples(theta, y)
    if raw:
        return visibility_from_extrema(float(y.max()), float(y.min()))
    return fit_fringe(theta, y).visibility
