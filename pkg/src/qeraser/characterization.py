"""Fringe fitting, visibility curves, channel calibration and channel reports."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .channels import FiberChannelParams, fiber_channel, free_space_channel
from .fringe import FringeFit, VisibilityError, fit_fringe  # noqa: F401  (re-exported)
from .measurement import (
    ComplementarityRecord,
    ScanResult,
    analyze_polarization,
    complementarity_check,
    distinguishability,
    fringe_visibility_exact,
    pipeline_output,
)
from .spinorbit import DEFAULT_LMAX

ERASED_ALPHA = math.pi / 4
MARKED_ALPHAS = (math.pi / 2, 0.0)
BOOTSTRAP_DRAWS = 200
BOOTSTRAP_KEY = 0x5EED  # keeps bootstrap streams apart from the count streams
CROSSTALK_THRESHOLD = 0.1
REPORT_COMPLEMENTARITY_TOL = 0.02
EPS_GRID = np.linspace(0.0, 0.5, 51)


class CalibrationError(ValueError):
    """Calibration targets violate the preconditions."""


class CalibrationInfeasible(CalibrationError):
    """No parameter within bounds reaches the target."""


class MissingSettingError(KeyError):
    pass


@dataclass(frozen=True)
class VisibilityPoint:
    alpha: float
    visibility: float
    sigma: float
    fit: FringeFit


def _bootstrap_sigma(theta: np.ndarray, counts: np.ndarray, draws: int, seed: int, index: int) -> float:
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(BOOTSTRAP_KEY, index)))
    vals = []
    for _ in range(draws):
        resampled = rng.poisson(counts)
        try:
            vals.append(fit_fringe(theta, resampled).visibility)
        except VisibilityError:
            continue
    return float(np.std(vals, ddof=1)) if len(vals) > 1 else math.inf


def visibility_curve(scan: ScanResult, draws: int = BOOTSTRAP_DRAWS, seed: Optional[int] = None) -> list[VisibilityPoint]:
    """Fitted visibility per alpha with a Poisson-bootstrap standard deviation."""
    if len(scan.alphas) < 2:
        raise ValueError("a visibility curve needs at least two alpha settings")
    seed = scan.seed if seed is None else seed
    seed = 0 if seed is None else seed
    points = []
    for i in np.argsort(scan.alphas, kind="stable"):
        fit = fit_fringe(scan.thetas, scan.counts[i])
        sigma = _bootstrap_sigma(scan.thetas, scan.counts[i], draws, seed, int(i)) if draws else math.nan
        points.append(VisibilityPoint(float(scan.alphas[i]), fit.visibility, sigma, fit))
    return points


# --- calibration -----------------------------------------------------------


def model_visibility(params: FiberChannelParams, alpha: float, ell: int = 1, lmax: int = DEFAULT_LMAX) -> float:
    """Noiseless fringe visibility after the fiber-like channel."""
    rho = pipeline_output(fiber_channel(params, lmax), ell, lmax)
    return fringe_visibility_exact(rho, alpha, ell)


def _with(params: FiberChannelParams, **changes) -> FiberChannelParams:
    d = dict(epsilon_xt=params.epsilon_xt, pol_rotation=params.pol_rotation,
             intermodal_phase=params.intermodal_phase, seed=params.seed)
    d.update(changes)
    return FiberChannelParams(**d)


def _bisect(f, lo: float, hi: float, target: float, tol: float = 1e-10, maxiter: int = 200) -> float:
    """Solve f(x) = target for f non-decreasing on [lo, hi]."""
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        if f(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    return 0.5 * (lo + hi)


def _solve_epsilon(base: FiberChannelParams, v_target: float, alpha_marked: float, tol: float) -> float:
    def v_of(eps):
        return model_visibility(_with(base, epsilon_xt=float(eps)), alpha_marked)

    curve = np.array([v_of(e) for e in EPS_GRID])
    if np.any(np.diff(curve) < -1e-12):
        raise CalibrationInfeasible("marked-setting visibility is not monotone in epsilon_xt; bisection invalid")
    if v_target <= curve[0] + tol:
        return 0.0
    if v_target > curve[-1] + tol:
        raise CalibrationInfeasible(
            f"V_min target {v_target:.4f} exceeds the largest reachable value {curve[-1]:.4f}"
        )
    k = int(np.searchsorted(curve, v_target))
    lo, hi = EPS_GRID[max(k - 1, 0)], EPS_GRID[min(k, len(EPS_GRID) - 1)]
    return float(_bisect(v_of, lo, hi, v_target))


def _solve_phase(base: FiberChannelParams, v_target: float, tol: float, n: int = 360) -> float:
    step = 2 * math.pi / n
    phases = np.arange(n) * step

    def v_of(chi):
        return model_visibility(_with(base, intermodal_phase=float(chi)), ERASED_ALPHA)

    vals = np.array([v_of(c) for c in phases])
    i_max, i_min = int(np.argmax(vals)), int(np.argmin(vals))
    if v_target >= vals[i_max]:
        return float(phases[i_max])
    if v_target <= vals[i_min]:
        if vals[i_min] - v_target > tol:
            raise CalibrationInfeasible(
                f"V_max target {v_target:.4f} below the lowest reachable value {vals[i_min]:.4f} "
                f"at this cross-talk level"
            )
        return float(phases[i_min])
    # first grid point past the maximum (cyclically) that drops to the target
    j = next(k for k in range(1, n + 1) if vals[(i_max + k) % n] <= v_target)
    a = phases[i_max] + (j - 1) * step
    chi = _bisect(lambda c: -v_of(c), a, a + step, -v_target)
    return float(np.mod(chi, 2 * math.pi))


def calibrate_channel(v_min: float, v_max: float, alpha_marked: float = math.pi / 2,
                      seed: int = 0, pol_rotation: float = 0.0,
                      v_min_tol: float = 1e-3, v_max_tol: float = 0.01, rounds: int = 4) -> FiberChannelParams:
    """Invert the fiber-like channel model for target visibilities.

    ``epsilon_xt`` is found by bisection so the marked-setting visibility hits
    ``v_min`` within ``v_min_tol``. The coupling phase is then tuned so the
    erased-setting (45 deg) visibility comes as close to ``v_max`` as the model
    allows; a miss larger than ``v_max_tol`` is infeasible.
    """
    for name, v in (("V_min", v_min), ("V_max", v_max)):
        if not (0.0 <= v <= 1.0):
            raise CalibrationError(f"{name} target must lie in [0, 1], got {v}")
    if v_min > v_max:
        raise CalibrationError(f"V_min target {v_min} exceeds V_max target {v_max}")

    params = FiberChannelParams(0.0, pol_rotation, 0.0, seed)
    for _ in range(rounds):
        eps = _solve_epsilon(params, v_min, alpha_marked, v_min_tol)
        params = _with(params, epsilon_xt=eps)
        if eps == 0.0:
            params = _with(params, intermodal_phase=0.0)
            break
        chi = _solve_phase(params, v_max, v_max_tol)
        params = _with(params, intermodal_phase=chi)
        if abs(model_visibility(params, alpha_marked) - v_min) <= v_min_tol:
            break

    achieved_min = model_visibility(params, alpha_marked)
    achieved_max = model_visibility(params, ERASED_ALPHA)
    if abs(achieved_min - v_min) > v_min_tol:
        raise CalibrationInfeasible(f"could not match V_min={v_min} (reached {achieved_min:.4f})")
    if abs(achieved_max - v_max) > v_max_tol:
        raise CalibrationInfeasible(f"could not match V_max={v_max} (reached {achieved_max:.4f})")
    return params


# --- reports ---------------------------------------------------------------


@dataclass
class AlphaRecord:
    alpha: float
    visibility: float
    visibility_err: float
    distinguishability: float
    complementarity: ComplementarityRecord


@dataclass
class ChannelReport:
    v_max: float
    v_max_err: float
    alpha_v_max: float
    v_min: float
    v_min_err: float
    alpha_v_min: float
    alpha_marked: float
    delta: float
    epsilon_xt: Optional[float]
    intermodal_phase: Optional[float]
    threshold: float
    verdict: str
    per_alpha: list = field(default_factory=list)
    channel_label: str = ""
    notes: list = field(default_factory=list)

    def __post_init__(self):
        if not (0.0 <= self.v_min <= self.v_max <= 1.0):
            raise ValueError(f"report ordering violated: V_min={self.v_min}, V_max={self.v_max}")

    def to_dict(self) -> dict:
        return {
            "channel_label": self.channel_label,
            "verdict": self.verdict,
            "crosstalk_threshold": self.threshold,
            "v_max": self.v_max,
            "v_max_err": self.v_max_err,
            "alpha_v_max_deg": math.degrees(self.alpha_v_max),
            "v_min": self.v_min,
            "v_min_err": self.v_min_err,
            "alpha_v_min_deg": math.degrees(self.alpha_v_min),
            "alpha_marked_deg": math.degrees(self.alpha_marked),
            "delta_rad": self.delta,
            "epsilon_xt": self.epsilon_xt,
            "intermodal_phase_deg": None if self.intermodal_phase is None else math.degrees(self.intermodal_phase),
            "per_alpha": [
                {
                    "alpha_deg": math.degrees(r.alpha),
                    "visibility": r.visibility,
                    "visibility_err": r.visibility_err,
                    "distinguishability": r.distinguishability,
                    "v2_plus_d2": r.complementarity.total,
                    "complementarity_satisfied": r.complementarity.satisfied,
                }
                for r in self.per_alpha
            ],
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def summary_line(self) -> str:
        return (
            f"V_max={self.v_max:.4f}+/-{self.v_max_err:.4f} (alpha={math.degrees(self.alpha_v_max):g} deg)  "
            f"V_min={self.v_min:.4f}+/-{self.v_min_err:.4f} (alpha={math.degrees(self.alpha_v_min):g} deg)  "
            f"verdict: {self.verdict}"
        )

    def to_text(self) -> str:
        lines = [f"Channel report: {self.channel_label or '(unlabelled)'}", self.summary_line()]
        lines.append(f"fringe phase delta = {math.degrees(self.delta):.2f} deg")
        if self.epsilon_xt is None:
            lines.append("cross-talk estimate: unavailable")
        else:
            lines.append(f"cross-talk estimate: epsilon_xt = {self.epsilon_xt:.6f}")
        lines.append("alpha[deg]  V        sigma_V  D        V^2+D^2  ok")
        for r in self.per_alpha:
            lines.append(
                f"{math.degrees(r.alpha):9.3f}  {r.visibility:.5f}  {r.visibility_err:.5f}  "
                f"{r.distinguishability:.5f}  {r.complementarity.total:.5f}  "
                f"{'yes' if r.complementarity.satisfied else 'NO'}"
            )
        lines.extend(f"note: {n}" for n in self.notes)
        return "\n".join(lines) + "\n"


def _find_marked(scan: ScanResult) -> float:
    for a in MARKED_ALPHAS:
        if scan.has_alpha(a):
            return a
    raise MissingSettingError("scan lacks a marked setting (alpha = 0 or 90 deg)")


def channel_report(scan: ScanResult, threshold: float = CROSSTALK_THRESHOLD,
                   draws: int = BOOTSTRAP_DRAWS, seed: Optional[int] = None,
                   complementarity_tol: float = REPORT_COMPLEMENTARITY_TOL) -> ChannelReport:
    """Summarize a scan: visibility extremes, delta, cross-talk estimate, verdict.

    Distinguishability is not observable from sector counts, so it is taken
    from the calibrated channel model (free space when calibration fails).
    """
    if not scan.has_alpha(ERASED_ALPHA):
        raise MissingSettingError("scan lacks the erased setting (alpha = 45 deg)")
    alpha_marked = _find_marked(scan)
    curve = visibility_curve(scan, draws, seed)
    by_alpha = {p.alpha: p for p in curve}

    erased = by_alpha[float(scan.alphas[scan.alpha_index(ERASED_ALPHA)])]
    marked = by_alpha[float(scan.alphas[scan.alpha_index(alpha_marked)])]
    notes = []
    eps = chi = None
    model = free_space_channel()
    try:
        params = calibrate_channel(min(marked.visibility, erased.visibility), erased.visibility, alpha_marked)
        eps, chi = params.epsilon_xt, params.intermodal_phase
        model = fiber_channel(params)
    except CalibrationError as exc:
        notes.append(f"cross-talk inversion failed: {exc}")

    rho = pipeline_output(model)
    per_alpha = []
    for p in curve:
        d = distinguishability(analyze_polarization(rho, p.alpha))
        rec = complementarity_check(p.visibility, d, complementarity_tol)
        per_alpha.append(AlphaRecord(p.alpha, p.visibility, p.sigma, d, rec))

    hi = max(curve, key=lambda p: p.visibility)
    lo = min(curve, key=lambda p: p.visibility)
    verdict = "cross-talk detected" if lo.visibility > threshold else "clean channel"
    return ChannelReport(
        v_max=hi.visibility, v_max_err=hi.sigma, alpha_v_max=hi.alpha,
        v_min=lo.visibility, v_min_err=lo.sigma, alpha_v_min=lo.alpha,
        alpha_marked=alpha_marked, delta=erased.fit.phase,
        epsilon_xt=eps, intermodal_phase=chi, threshold=threshold, verdict=verdict,
        per_alpha=per_alpha, channel_label=scan.channel_label, notes=notes,
    )
