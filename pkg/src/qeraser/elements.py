"""q-plate, waveplates and the polarization analyzer as spin-orbit operators.

Jones convention: a retarder with fast axis at angle ``t`` from horizontal is
``Rot(-t) @ diag(exp(-i G/2), exp(+i G/2)) @ Rot(t)`` in the {H, V} basis, with
``Rot(t) = [[cos t, sin t], [-sin t, cos t]]``. Matrices are moved to the
circular basis through :data:`~qeraser.spinorbit.LIN_TO_CIRC`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .spinorbit import (
    CIRC_TO_LIN,
    DEFAULT_LMAX,
    LIN_TO_CIRC,
    PolBasis,
    SpinOrbitState,
    TruncationError,
    apply_operator,
    embed_polarization,
)


class WaveplateKind(str, enum.Enum):
    QUARTER = "quarter"
    HALF = "half"


_RETARDANCE = {WaveplateKind.QUARTER: np.pi / 2, WaveplateKind.HALF: np.pi}


@dataclass(frozen=True)
class QPlateSpec:
    q: float = 0.5

    def __post_init__(self):
        twice = 2 * self.q
        if not np.isclose(twice, round(twice), atol=1e-12, rtol=0):
            raise ValueError(f"q-plate charge must be a half-integer, got q={self.q}")

    @property
    def shift(self) -> int:
        return int(round(2 * self.q))


@dataclass(frozen=True)
class WaveplateSpec:
    kind: WaveplateKind = WaveplateKind.QUARTER
    angle: float = np.pi / 4

    def __post_init__(self):
        object.__setattr__(self, "kind", WaveplateKind(self.kind))


@dataclass(frozen=True)
class AnalyzerSpec:
    alpha: float = 0.0


def _rot(t: float) -> np.ndarray:
    c, s = np.cos(t), np.sin(t)
    return np.array([[c, s], [-s, c]], dtype=complex)


def retarder_linear(retardance: float, angle: float) -> np.ndarray:
    """2x2 Jones matrix in the {H, V} basis."""
    core = np.diag([np.exp(-0.5j * retardance), np.exp(0.5j * retardance)])
    return _rot(-angle) @ core @ _rot(angle)


def to_circular(m_lin: np.ndarray) -> np.ndarray:
    return LIN_TO_CIRC @ m_lin @ CIRC_TO_LIN


def waveplate_matrix(spec: WaveplateSpec) -> np.ndarray:
    """Waveplate Jones matrix in the circular {R, L} basis."""
    return to_circular(retarder_linear(_RETARDANCE[spec.kind], spec.angle))


def rotator_matrix(angle: float) -> np.ndarray:
    """Polarization rotation by ``angle`` (circular basis); diagonal there."""
    return to_circular(_rot(-angle))


def waveplate_operator(spec: WaveplateSpec, lmax: int = DEFAULT_LMAX) -> np.ndarray:
    return embed_polarization(waveplate_matrix(spec), lmax)


def apply_waveplate(state: SpinOrbitState, spec: WaveplateSpec) -> SpinOrbitState:
    return apply_operator(waveplate_operator(spec, state.lmax), state)


def qplate_operator(spec: QPlateSpec, lmax: int = DEFAULT_LMAX) -> np.ndarray:
    """Matrix of |R>|l> -> |L>|l-2q>, |L>|l> -> |R>|l+2q>.

    Columns whose image leaves the truncated space are zero, so the matrix is a
    partial isometry; :func:`apply_qplate` refuses states that would need them.
    """
    n = 2 * lmax + 1
    k = spec.shift
    op = np.zeros((2 * n, 2 * n), dtype=complex)
    for ell in range(-lmax, lmax + 1):
        for src, dst, out in ((PolBasis.R, PolBasis.L, ell - k), (PolBasis.L, PolBasis.R, ell + k)):
            if abs(out) > lmax:
                continue
            op[dst.value * n + out + lmax, src.value * n + ell + lmax] = 1.0
    return op


def apply_qplate(state: SpinOrbitState, spec: QPlateSpec) -> SpinOrbitState:
    lmax = state.lmax
    k = spec.shift
    amps = state.amplitudes
    for ell in range(-lmax, lmax + 1):
        for pol, out in ((PolBasis.R, ell - k), (PolBasis.L, ell + k)):
            if abs(out) > lmax and abs(amps[pol.value, ell + lmax]) > 0:
                raise TruncationError(
                    f"q-plate (q={spec.q}) maps occupied ({pol.name}, {ell}) to ell={out}, "
                    f"outside |ell| <= {lmax}"
                )
    return apply_operator(qplate_operator(spec, lmax), state)


def analyzer_vector(alpha: float) -> np.ndarray:
    """cos(alpha)|H> + sin(alpha)|V> in the circular basis."""
    return LIN_TO_CIRC @ np.array([np.cos(alpha), np.sin(alpha)], dtype=complex)


def polarization_projector(spec: AnalyzerSpec, lmax: int = DEFAULT_LMAX) -> np.ndarray:
    v = analyzer_vector(spec.alpha)
    return embed_polarization(np.outer(v, v.conj()), lmax)


def project_polarization(state: SpinOrbitState, alpha: float) -> SpinOrbitState:
    """Sub-normalized state after the analyzer; norm**2 is the pass probability."""
    return apply_operator(polarization_projector(AnalyzerSpec(alpha), state.lmax), state)


QWP_ANGLE = np.pi / 4


@lru_cache(maxsize=None)
def predict_delta() -> float:
    """Fringe phase offset implied by the Jones convention, in [0, 2pi).

    This is the ``delta`` for which the ideal pipeline (q-plate on |H>|0>,
    then a QWP at 45 deg) gives P = (1 + sin 2a cos(2 theta + delta)) / 2.
    It depends on the chosen matrices; other conventions shift it.
    """
    m_lin = CIRC_TO_LIN @ waveplate_matrix(WaveplateSpec(WaveplateKind.QUARTER, QWP_ANGLE))
    # Column 0 is where R lands (paired with +ell), column 1 where L lands (-ell).
    a = m_lin[0, 0]
    b = m_lin[1, 1]
    return float(np.mod(-np.angle(b / a), 2 * np.pi))
