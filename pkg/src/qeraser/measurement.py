"""Two-stage projective measurement: polarization analyzer, then sector scan.

Detection probabilities are conditional on the photon passing the analyzer:

    P(alpha, theta) = tr[(P_alpha (x) P_theta) rho] / tr[(P_alpha (x) 1) rho]

where ``rho`` is the state after the detection-side quarter-wave plate and
``P_theta`` projects onto (|l> + e^{2i theta}|-l>)/sqrt2. For the ideal
pipeline this equals (1 + sin 2 alpha cos(2 theta + delta)) / 2.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .channels import ChannelModel, apply_channel, as_density, free_space_channel
from .elements import (
    QWP_ANGLE,
    analyzer_vector,
    QPlateSpec,
    WaveplateKind,
    WaveplateSpec,
    apply_qplate,
    waveplate_operator,
)
from .fringe import VisibilityError, visibility
from .spinorbit import (
    DEFAULT_LMAX,
    SpinOrbitState,
    check_ell,
    embed_oam,
    make_linear_mode,
)

CSV_HEADER = ("alpha_deg", "theta_deg", "ideal_prob", "counts")
DEFAULT_PHOTONS = 100_000
DEFAULT_THETA_STEP_DEG = 5.0
COMPLEMENTARITY_TOL = 1e-6


class ScanSchemaError(ValueError):
    """A scan CSV does not match the documented layout."""


@dataclass(frozen=True)
class SectorSpec:
    theta: float
    ell: int = 1

    def __post_init__(self):
        if int(self.ell) != self.ell or self.ell < 1:
            raise ValueError(f"sector ell must be a positive integer, got {self.ell!r}")


def sector_vector(spec: SectorSpec, lmax: int = DEFAULT_LMAX) -> np.ndarray:
    ell = check_ell(spec.ell, lmax)
    v = np.zeros(2 * lmax + 1, dtype=complex)
    v[ell + lmax] = 1.0
    v[-ell + lmax] += np.exp(2j * spec.theta)
    return v / math.sqrt(2.0)


def sector_projector(spec: SectorSpec, lmax: int = DEFAULT_LMAX) -> np.ndarray:
    v = sector_vector(spec, lmax)
    return embed_oam(np.outer(v, v.conj()))


def prepare_hybrid_state(ell: int = 1, lmax: int = DEFAULT_LMAX) -> SpinOrbitState:
    """Horizontally polarized Gaussian through a q-plate with q = ell / 2."""
    return apply_qplate(make_linear_mode(1.0, 0.0, 0, lmax), QPlateSpec(ell / 2))


@lru_cache(maxsize=None)
def detection_qwp(lmax: int = DEFAULT_LMAX) -> np.ndarray:
    return waveplate_operator(WaveplateSpec(WaveplateKind.QUARTER, QWP_ANGLE), lmax)


def _lmax_of(rho: np.ndarray) -> int:
    return (rho.shape[0] // 2 - 1) // 2


def after_detection_qwp(state) -> np.ndarray:
    rho = as_density(state)
    q = detection_qwp(_lmax_of(rho))
    return q @ rho @ q.conj().T


def analyze_polarization(state, alpha: float, qwp: bool = True) -> np.ndarray:
    """OAM density operator (polarization traced out) after the analyzer.

    Sub-normalized: its trace is the analyzer pass probability.
    """
    rho = after_detection_qwp(state) if qwp else as_density(state)
    n = rho.shape[0] // 2
    v = analyzer_vector(alpha)
    # (<a| (x) 1) rho (|a> (x) 1): trace over polarization of the projected state
    return np.einsum("i,injm,j->nm", v.conj(), rho.reshape(2, n, 2, n), v)


def detection_probability(state, alpha: float, theta: float, ell: int = 1, qwp: bool = True) -> float:
    """Conditional detection probability for one (alpha, theta) setting.

    ``state`` is the photon after the channel (pure state or density matrix);
    the detection-side QWP is applied unless ``qwp`` is False.
    """
    sigma = analyze_polarization(state, alpha, qwp)
    lmax = (sigma.shape[0] - 1) // 2
    passed = float(np.real(np.trace(sigma)))
    if passed <= 1e-15:
        return 0.0
    s = sector_vector(SectorSpec(theta, ell), lmax)
    joint = float(np.real(np.vdot(s, sigma @ s)))
    return min(max(joint / passed, 0.0), 1.0)


def probability_grid(state, alphas, thetas, ell: int = 1, qwp: bool = True) -> np.ndarray:
    """``detection_probability`` over the outer product of settings."""
    alphas = np.atleast_1d(np.asarray(alphas, dtype=float))
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    rho = after_detection_qwp(state) if qwp else as_density(state)
    lmax = _lmax_of(rho)
    check_ell(ell, lmax)
    out = np.zeros((alphas.size, thetas.size))
    for i, a in enumerate(alphas):
        sigma = analyze_polarization(rho, a, qwp=False)
        passed = float(np.real(np.trace(sigma)))
        if passed <= 1e-15:
            continue
        s11 = sigma[ell + lmax, ell + lmax].real
        s22 = sigma[-ell + lmax, -ell + lmax].real
        s12 = sigma[ell + lmax, -ell + lmax]
        joint = 0.5 * (s11 + s22 + 2 * np.real(np.exp(2j * thetas) * s12))
        out[i] = np.clip(joint / passed, 0.0, 1.0)
    return out


def analytic_probability(alpha, theta, delta: float):
    """(1 + sin 2 alpha cos(2 theta + delta)) / 2."""
    return 0.5 * (1 + np.sin(2 * np.asarray(alpha)) * np.cos(2 * np.asarray(theta) + delta))


def fringe_visibility_exact(state, alpha: float, ell: int = 1, qwp: bool = True) -> float:
    """Visibility of the noiseless sector scan: 2|s12| / (s11 + s22)."""
    sigma = analyze_polarization(state, alpha, qwp)
    lmax = _lmax_of(as_density(state))
    s11 = sigma[ell + lmax, ell + lmax].real
    s22 = sigma[-ell + lmax, -ell + lmax].real
    if s11 + s22 <= 1e-15:
        raise VisibilityError("no weight in the analyzed OAM pair")
    return float(2 * abs(sigma[ell + lmax, -ell + lmax]) / (s11 + s22))


def distinguishability(projected, ell: int = 1) -> float:
    """|p(+l) - p(-l)| for the analyzed OAM pair of a polarization-projected photon.

    ``projected`` is either a spin-orbit state/density already through the
    analyzer, or the OAM density returned by :func:`analyze_polarization`.
    """
    rho = as_density(projected)
    n = rho.shape[0]
    if n % 2 == 0:  # spin-orbit operator; OAM-only operators have odd dimension
        half = n // 2
        rho = rho[:half, :half] + rho[half:, half:]
        n = half
    lmax = (n - 1) // 2
    check_ell(ell, lmax)
    w_plus = rho[ell + lmax, ell + lmax].real
    w_minus = rho[-ell + lmax, -ell + lmax].real
    total = w_plus + w_minus
    if total <= 1e-15:
        raise ValueError("projection has zero norm on the analyzed OAM pair")
    return float(abs(w_plus - w_minus) / total)


def oam_spectrum(state) -> dict[int, float]:
    """Marginal OAM distribution with polarization traced out, normalized to 1."""
    rho = as_density(state)
    n = rho.shape[0]
    if n % 2 == 0:
        half = n // 2
        diag = np.real(np.diag(rho[:half, :half]) + np.diag(rho[half:, half:]))
    else:
        diag = np.real(np.diag(rho))
    diag = np.clip(diag, 0.0, None)
    total = diag.sum()
    if total <= 0:
        raise ValueError("state has zero norm")
    lmax = (diag.size - 1) // 2
    return {ell: float(diag[ell + lmax] / total) for ell in range(-lmax, lmax + 1)}


@dataclass(frozen=True)
class ComplementarityRecord:
    visibility: float
    distinguishability: float
    satisfied: bool

    @property
    def total(self) -> float:
        return self.visibility**2 + self.distinguishability**2


def complementarity_check(v: float, d: float, tol: float = COMPLEMENTARITY_TOL) -> ComplementarityRecord:
    for name, x in (("V", v), ("D", d)):
        if not (0.0 <= x <= 1.0):
            raise ValueError(f"{name} must lie in [0, 1], got {x}")
    return ComplementarityRecord(float(v), float(d), v * v + d * d <= 1.0 + tol)


# --- scans -----------------------------------------------------------------


def default_theta_grid(step_deg: float = DEFAULT_THETA_STEP_DEG) -> np.ndarray:
    if step_deg <= 0:
        raise ValueError("theta step must be positive")
    n = int(math.ceil(360.0 / step_deg - 1e-9))
    return np.radians(np.arange(n) * step_deg)


@dataclass(frozen=True)
class ScanConfig:
    alphas: tuple = (0.0, math.pi / 4)
    thetas: tuple = field(default_factory=lambda: tuple(default_theta_grid()))
    photons: int = DEFAULT_PHOTONS
    seed: int = 0
    ell: int = 1
    lmax: int = DEFAULT_LMAX

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "thetas", tuple(float(t) for t in self.thetas))
        if not self.alphas or not self.thetas:
            raise ValueError("alpha and theta grids must be non-empty")
        if int(self.photons) != self.photons or self.photons < 1:
            raise ValueError(f"photons per setting must be a positive integer, got {self.photons!r}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValueError(f"seed must be a non-negative integer, got {self.seed!r}")


@dataclass(frozen=True, eq=False)
class ScanResult:
    alphas: np.ndarray
    thetas: np.ndarray
    ideal: np.ndarray
    counts: np.ndarray
    channel_label: str = ""
    seed: Optional[int] = None
    photons: Optional[int] = None

    def alpha_index(self, alpha: float, tol: float = 1e-9) -> int:
        hits = np.nonzero(np.abs(self.alphas - alpha) <= tol)[0]
        if not len(hits):
            raise KeyError(f"alpha={math.degrees(alpha):g} deg not present in scan")
        return int(hits[0])

    def has_alpha(self, alpha: float, tol: float = 1e-9) -> bool:
        return bool(np.any(np.abs(self.alphas - alpha) <= tol))

    def counts_at(self, alpha: float) -> np.ndarray:
        return self.counts[self.alpha_index(alpha)]

    def same_data(self, other: "ScanResult") -> bool:
        return (
            np.array_equal(self.alphas, other.alphas)
            and np.array_equal(self.thetas, other.thetas)
            and np.array_equal(self.ideal, other.ideal)
            and np.array_equal(self.counts, other.counts)
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        order = np.argsort(self.alphas, kind="stable")
        t_order = np.argsort(self.thetas, kind="stable")
        for i in order:
            for j in t_order:
                w.writerow([
                    f"{math.degrees(self.alphas[i]):.6f}",
                    f"{math.degrees(self.thetas[j]):.6f}",
                    f"{self.ideal[i, j]:.12f}",
                    str(int(self.counts[i, j])),
                ])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def from_csv(cls, text: str, label: str = "") -> "ScanResult":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise ScanSchemaError("empty CSV")
        header = tuple(h.strip() for h in rows[0])
        if header != CSV_HEADER:
            missing = [c for c in CSV_HEADER if c not in header]
            bad = missing[0] if missing else next(h for h, want in zip(header + ("",), CSV_HEADER + ("",)) if h != want)
            raise ScanSchemaError(f"header mismatch at column {bad!r}; expected {','.join(CSV_HEADER)}")
        records = []
        for lineno, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise ScanSchemaError(f"row {lineno}: expected {len(CSV_HEADER)} fields, got {len(row)}")
            try:
                a, t, p = float(row[0]), float(row[1]), float(row[2])
            except ValueError:
                raise ScanSchemaError(f"row {lineno}: non-numeric angle or ideal_prob") from None
            try:
                c = int(row[3])
            except ValueError:
                raise ScanSchemaError(f"row {lineno}: column 'counts' is not an integer") from None
            if c < 0:
                raise ScanSchemaError(f"row {lineno}: column 'counts' is negative")
            if not 0.0 <= p <= 1.0:
                raise ScanSchemaError(f"row {lineno}: column 'ideal_prob' outside [0, 1]")
            records.append((a, t, p, c, lineno))
        if not records:
            raise ScanSchemaError("CSV has a header but no data rows")
        alphas = sorted({r[0] for r in records})
        thetas = sorted({r[1] for r in records})
        ideal = np.full((len(alphas), len(thetas)), np.nan)
        counts = np.full((len(alphas), len(thetas)), -1, dtype=np.int64)
        a_idx = {a: i for i, a in enumerate(alphas)}
        t_idx = {t: j for j, t in enumerate(thetas)}
        for a, t, p, c, lineno in records:
            i, j = a_idx[a], t_idx[t]
            if counts[i, j] >= 0:
                raise ScanSchemaError(f"row {lineno}: duplicate setting alpha={a}, theta={t}")
            ideal[i, j] = p
            counts[i, j] = c
        missing = np.argwhere(counts < 0)
        if len(missing):
            i, j = missing[0]
            raise ScanSchemaError(
                f"incomplete grid: no row for alpha={alphas[i]:.6f}, theta={thetas[j]:.6f}"
            )
        return cls(np.radians(alphas), np.radians(thetas), ideal, counts, label)

    @classmethod
    def read_csv(cls, path) -> "ScanResult":
        return cls.from_csv(Path(path).read_text(), label=Path(path).stem)


def _setting_rng(seed: int, i: int, j: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(i, j)))


def _draw_row(seed: int, i: int, means: np.ndarray) -> np.ndarray:
    return np.array([_setting_rng(seed, i, j).poisson(m) for j, m in enumerate(means)], dtype=np.int64)


def simulate_counts(config: ScanConfig, channel: Optional[ChannelModel] = None,
                    state: Optional[SpinOrbitState] = None, workers: int = 1) -> ScanResult:
    """Poisson counts with mean ``photons * P(alpha, theta)`` per setting.

    Every setting draws from its own stream keyed on (seed, alpha index,
    theta index), so the result does not depend on ``workers``.
    """
    channel = channel or free_space_channel(config.lmax)
    if state is None:
        state = prepare_hybrid_state(config.ell, config.lmax)
    rho = apply_channel(state, channel)
    alphas = np.array(config.alphas)
    thetas = np.array(config.thetas)
    ideal = probability_grid(rho, alphas, thetas, config.ell)
    means = config.photons * ideal
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda i: _draw_row(config.seed, i, means[i]), range(len(alphas))))
    else:
        rows = [_draw_row(config.seed, i, means[i]) for i in range(len(alphas))]
    return ScanResult(alphas, thetas, ideal, np.vstack(rows), channel.label, config.seed, config.photons)


def pipeline_output(channel: Optional[ChannelModel] = None, ell: int = 1, lmax: int = DEFAULT_LMAX) -> np.ndarray:
    """Density matrix of the prepared hybrid state after ``channel``."""
    channel = channel or free_space_channel(lmax)
    return apply_channel(prepare_hybrid_state(ell, lmax), channel)


def scan_visibilities(scan: ScanResult, alphas: Sequence[float] | None = None) -> dict[float, float]:
    alphas = scan.alphas if alphas is None else alphas
    return {float(a): visibility(scan.thetas, scan.counts_at(a)) for a in alphas}
