"""Truncated polarization x OAM state space.

Amplitudes are stored as a dense ``(2, 2*lmax + 1)`` complex array. Row 0 is
right circular, row 1 left circular; column ``ell + lmax`` holds OAM ``ell``.
Flattened vectors (used for operators and density matrices) follow the same
row-major order, i.e. index ``pol * (2*lmax + 1) + ell + lmax``.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np

DEFAULT_LMAX = 3
GLOBAL_PHASE_TOL = 1e-9

SQRT2 = np.sqrt(2.0)

# Circular-basis components of the linear states: H=(R+L)/sqrt2, V=(R-L)/(i sqrt2).
H_CIRC = np.array([1.0, 1.0], dtype=complex) / SQRT2
V_CIRC = np.array([1.0, -1.0], dtype=complex) / (1j * SQRT2)

# Columns are H and V written in the circular basis, so
# circular = LIN_TO_CIRC @ linear and linear = LIN_TO_CIRC.conj().T @ circular.
LIN_TO_CIRC = np.column_stack([H_CIRC, V_CIRC])
CIRC_TO_LIN = LIN_TO_CIRC.conj().T


class TruncationError(ValueError):
    """An OAM index falls outside the truncated space."""


class PolBasis(enum.Enum):
    R = 0
    L = 1


class ModeFamily(str, enum.Enum):
    TM01 = "TM01"
    TE01 = "TE01"
    HE21_EVEN = "HE21_even"
    HE21_ODD = "HE21_odd"
    CUSTOM = "custom"


_FAMILY_PARAMS = {
    ModeFamily.TM01: (1, 0.0),
    ModeFamily.TE01: (1, np.pi),
    ModeFamily.HE21_EVEN: (-1, 0.0),
    ModeFamily.HE21_ODD: (-1, np.pi),
}


def check_ell(ell: int, lmax: int) -> int:
    if int(ell) != ell:
        raise TruncationError(f"OAM index must be an integer, got {ell!r}")
    ell = int(ell)
    if abs(ell) > lmax:
        raise TruncationError(f"OAM index {ell} outside truncation |ell| <= {lmax}")
    return ell


@dataclass(frozen=True)
class VectorModeSpec:
    family: ModeFamily = ModeFamily.CUSTOM
    ell: int = 1
    zeta: float = 0.0

    def __post_init__(self):
        family = ModeFamily(self.family)
        object.__setattr__(self, "family", family)
        if family is not ModeFamily.CUSTOM:
            ell, zeta = _FAMILY_PARAMS[family]
            object.__setattr__(self, "ell", ell)
            object.__setattr__(self, "zeta", zeta)

    @classmethod
    def named(cls, name: str) -> "VectorModeSpec":
        return cls(family=ModeFamily(name))


@dataclass(frozen=True, eq=False)
class SpinOrbitState:
    """Immutable pure state on the truncated spin-orbit space."""

    amplitudes: np.ndarray
    lmax: int = field(default=DEFAULT_LMAX)

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex)
        if amps.shape != (2, 2 * self.lmax + 1):
            raise ValueError(
                f"amplitude table must have shape (2, {2 * self.lmax + 1}), got {amps.shape}"
            )
        if self.lmax < 1:
            raise ValueError("lmax must be >= 1")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_vector(cls, vec, lmax: int = DEFAULT_LMAX) -> "SpinOrbitState":
        return cls(np.asarray(vec, dtype=complex).reshape(2, 2 * lmax + 1), lmax)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    @property
    def vector(self) -> np.ndarray:
        return self.amplitudes.reshape(-1)

    @property
    def ells(self) -> np.ndarray:
        return np.arange(-self.lmax, self.lmax + 1)

    def amplitude(self, pol: PolBasis, ell: int) -> complex:
        ell = check_ell(ell, self.lmax)
        return complex(self.amplitudes[PolBasis(pol).value, ell + self.lmax])

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "SpinOrbitState":
        n = self.norm()
        if n == 0:
            raise ValueError("cannot normalize the zero vector")
        return SpinOrbitState(self.amplitudes / n, self.lmax)

    def linear_amplitudes(self) -> np.ndarray:
        """Amplitude table in the {H, V} polarization basis."""
        return CIRC_TO_LIN @ self.amplitudes

    def density_matrix(self) -> np.ndarray:
        v = self.vector
        return np.outer(v, v.conj())

    def equals_up_to_phase(self, other: "SpinOrbitState", tol: float = GLOBAL_PHASE_TOL) -> bool:
        if self.lmax != other.lmax:
            return False
        overlap = inner_product(self, other)
        n2 = self.norm() * other.norm()
        if n2 == 0:
            return self.norm() == other.norm()
        return abs(abs(overlap) - n2) <= tol and abs(self.norm() - other.norm()) <= tol

    def to_json(self) -> str:
        return json.dumps(state_to_records(self))


def state_to_records(state: SpinOrbitState) -> list[dict]:
    records = []
    for pol in PolBasis:
        for ell in state.ells:
            a = state.amplitudes[pol.value, ell + state.lmax]
            records.append({"pol": pol.name, "ell": int(ell), "re": float(a.real), "im": float(a.imag)})
    return records


def state_from_records(records: list[dict], lmax: int = DEFAULT_LMAX) -> SpinOrbitState:
    amps = np.zeros((2, 2 * lmax + 1), dtype=complex)
    for rec in records:
        ell = check_ell(rec["ell"], lmax)
        amps[PolBasis[rec["pol"]].value, ell + lmax] = complex(rec["re"], rec["im"])
    return SpinOrbitState(amps, lmax)


def _empty(lmax: int) -> np.ndarray:
    return np.zeros((2, 2 * lmax + 1), dtype=complex)


def make_scalar_mode(pol: PolBasis, ell: int, lmax: int = DEFAULT_LMAX) -> SpinOrbitState:
    ell = check_ell(ell, lmax)
    amps = _empty(lmax)
    amps[PolBasis(pol).value, ell + lmax] = 1.0
    return SpinOrbitState(amps, lmax)


def make_vector_mode(spec: VectorModeSpec, lmax: int = DEFAULT_LMAX) -> SpinOrbitState:
    """(|R>|ell> + e^{i zeta}|L>|-ell>) / sqrt2 for the given family or custom pair."""
    ell = check_ell(spec.ell, lmax)
    amps = _empty(lmax)
    amps[PolBasis.R.value, ell + lmax] += 1.0 / SQRT2
    amps[PolBasis.L.value, -ell + lmax] += np.exp(1j * spec.zeta) / SQRT2
    return SpinOrbitState(amps, lmax)


def make_linear_mode(h: complex, v: complex, ell: int = 0, lmax: int = DEFAULT_LMAX) -> SpinOrbitState:
    """Product state (h|H> + v|V>) |ell>, normalized."""
    ell = check_ell(ell, lmax)
    pol = h * H_CIRC + v * V_CIRC
    amps = _empty(lmax)
    amps[:, ell + lmax] = pol
    return SpinOrbitState(amps, lmax).normalized()


def inner_product(a: SpinOrbitState, b: SpinOrbitState) -> complex:
    """<a|b>, conjugate-linear in ``a``."""
    if a.amplitudes.shape != b.amplitudes.shape:
        raise ValueError(f"dimension mismatch: lmax {a.lmax} vs {b.lmax}")
    return complex(np.vdot(a.vector, b.vector))


def embed_polarization(op2: np.ndarray, lmax: int) -> np.ndarray:
    """op2 (circular basis) tensor identity on OAM."""
    return np.kron(np.asarray(op2, dtype=complex), np.eye(2 * lmax + 1))


def embed_oam(op_oam: np.ndarray) -> np.ndarray:
    return np.kron(np.eye(2), np.asarray(op_oam, dtype=complex))


def apply_operator(op: np.ndarray, state: SpinOrbitState) -> SpinOrbitState:
    if op.shape != (state.dim, state.dim):
        raise ValueError(f"operator shape {op.shape} does not match state dimension {state.dim}")
    return SpinOrbitState.from_vector(op @ state.vector, state.lmax)
