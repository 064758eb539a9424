"""Channel maps on the spin-orbit space, given as operator (Kraus) terms.

The fiber-like channel is unitary: ``U_pol(rotation) (x) U_oam``, where
``U_oam = U_leak @ U_pair``. ``U_pair`` mixes each ``|l>`` with ``|-l>`` by the
angle ``arcsin(sqrt(epsilon_xt))`` with coupling phase ``intermodal_phase``.
``U_leak`` couples ``|l>`` to its outward neighbour ``|l + sign(l)>`` by the same
angle. The leak chains for ``+l`` and ``-l`` mirror each other (the seed only
draws gauge phases on the links), so leakage rescales the ``{+l, -l}`` block
uniformly and the marked-setting visibility is ``sin(2 * angle)`` exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
from scipy.linalg import expm

from .elements import rotator_matrix
from .spinorbit import DEFAULT_LMAX, SpinOrbitState, embed_oam, embed_polarization

TP_TOL = 1e-9


class ChannelSpecError(ValueError):
    """Channel parameters or channel spec document are invalid."""


@dataclass(frozen=True)
class FiberChannelParams:
    epsilon_xt: float = 0.0
    pol_rotation: float = 0.0
    intermodal_phase: float = 0.0
    seed: int = 0

    def __post_init__(self):
        eps = self.epsilon_xt
        if not (isinstance(eps, (int, float)) and math.isfinite(eps) and 0.0 <= eps <= 1.0):
            raise ChannelSpecError(f"epsilon_xt must lie in [0, 1], got {eps!r}")
        for name in ("pol_rotation", "intermodal_phase"):
            if not math.isfinite(getattr(self, name)):
                raise ChannelSpecError(f"{name} must be finite")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ChannelSpecError(f"seed must be a non-negative integer, got {self.seed!r}")

    @property
    def mixing_angle(self) -> float:
        return math.asin(math.sqrt(self.epsilon_xt))

    def is_identity(self) -> bool:
        return self.epsilon_xt == 0 and self.pol_rotation == 0 and self.intermodal_phase == 0


@dataclass(frozen=True, eq=False)
class ChannelModel:
    kraus: tuple
    label: str = "channel"
    params: FiberChannelParams | None = None
    lmax: int = DEFAULT_LMAX

    def __post_init__(self):
        dim = 2 * (2 * self.lmax + 1)
        ops = []
        for k in self.kraus:
            k = np.array(k, dtype=complex)
            if k.shape != (dim, dim):
                raise ValueError(f"operator term has shape {k.shape}, expected {(dim, dim)}")
            k.setflags(write=False)
            ops.append(k)
        if not ops:
            raise ValueError("a channel needs at least one operator term")
        object.__setattr__(self, "kraus", tuple(ops))

    @property
    def dim(self) -> int:
        return 2 * (2 * self.lmax + 1)

    def completeness(self) -> np.ndarray:
        return sum(k.conj().T @ k for k in self.kraus)

    def trace_preservation_error(self) -> float:
        return float(np.max(np.abs(self.completeness() - np.eye(self.dim))))

    def is_trace_preserving(self, tol: float = TP_TOL) -> bool:
        return self.trace_preservation_error() <= tol

    def then(self, other: "ChannelModel") -> "ChannelModel":
        """Channel that applies ``self`` first, then ``other``."""
        if other.lmax != self.lmax:
            raise ValueError("cannot compose channels with different truncation")
        terms = tuple(b @ a for b in other.kraus for a in self.kraus)
        return ChannelModel(terms, f"{self.label}+{other.label}", other.params or self.params, self.lmax)


def free_space_channel(lmax: int = DEFAULT_LMAX) -> ChannelModel:
    dim = 2 * (2 * lmax + 1)
    return ChannelModel((np.eye(dim),), "free-space", FiberChannelParams(), lmax)


def _pair_generator(lmax: int, phase: float) -> np.ndarray:
    n = 2 * lmax + 1
    g = np.zeros((n, n), dtype=complex)
    for ell in range(1, lmax + 1):
        g[-ell + lmax, ell + lmax] = np.exp(1j * phase)
        g[ell + lmax, -ell + lmax] = np.exp(-1j * phase)
    return g


def _leak_generator(lmax: int, seed: int) -> np.ndarray:
    n = 2 * lmax + 1
    g = np.zeros((n, n), dtype=complex)
    link_phases = np.random.default_rng(seed).uniform(0.0, 2 * np.pi, size=(2, max(lmax - 1, 0)))
    for side, sign in enumerate((1, -1)):
        for i, mag in enumerate(range(1, lmax)):
            a = sign * mag + lmax
            b = sign * (mag + 1) + lmax
            c = np.exp(1j * link_phases[side, i])
            g[b, a] = c
            g[a, b] = np.conj(c)
    return g


def oam_crosstalk_unitary(params: FiberChannelParams, lmax: int = DEFAULT_LMAX) -> np.ndarray:
    angle = params.mixing_angle
    u_pair = expm(-1j * angle * _pair_generator(lmax, params.intermodal_phase))
    u_leak = expm(-1j * angle * _leak_generator(lmax, params.seed))
    return u_leak @ u_pair


def fiber_channel(params: FiberChannelParams, lmax: int = DEFAULT_LMAX, label: str = "fiber") -> ChannelModel:
    u_pol = embed_polarization(rotator_matrix(params.pol_rotation), lmax)
    u = u_pol @ embed_oam(oam_crosstalk_unitary(params, lmax))
    return ChannelModel((u,), label, params, lmax)


def unitary_channel(u: np.ndarray, lmax: int = DEFAULT_LMAX, label: str = "unitary") -> ChannelModel:
    return ChannelModel((u,), label, None, lmax)


def dephasing_channel(ell: int, phase: float, lmax: int = DEFAULT_LMAX) -> ChannelModel:
    """Equal-weight mixture of +/-``phase`` applied to the ``|-ell>`` component."""
    terms = []
    for sign in (1, -1):
        d = np.ones(2 * lmax + 1, dtype=complex)
        d[-ell + lmax] = np.exp(1j * sign * phase)
        terms.append(embed_oam(np.diag(d)) / math.sqrt(2.0))
    return ChannelModel(tuple(terms), f"dephasing({phase:g})", None, lmax)


StateLike = Union[SpinOrbitState, np.ndarray]


def as_density(state: StateLike) -> np.ndarray:
    if isinstance(state, SpinOrbitState):
        return state.density_matrix()
    rho = np.asarray(state, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"expected a square density matrix, got shape {rho.shape}")
    return rho


def apply_channel(state: StateLike, ch: ChannelModel) -> np.ndarray:
    """rho' = sum_i K_i rho K_i^dagger."""
    rho = as_density(state)
    if rho.shape != (ch.dim, ch.dim):
        raise ValueError(f"dimension mismatch: state {rho.shape[0]} vs channel {ch.dim}")
    out = np.zeros_like(rho)
    for k in ch.kraus:
        out += k @ rho @ k.conj().T
    return 0.5 * (out + out.conj().T)


# --- channel spec documents -------------------------------------------------

_SPEC_KEYS = ("label", "epsilon_xt", "pol_rotation_deg", "intermodal_phase_deg", "seed")


def params_to_spec(params: FiberChannelParams, label: str = "fiber") -> dict:
    return {
        "label": label,
        "epsilon_xt": params.epsilon_xt,
        "pol_rotation_deg": math.degrees(params.pol_rotation),
        "intermodal_phase_deg": math.degrees(params.intermodal_phase),
        "seed": int(params.seed),
    }


def params_from_spec(doc: dict) -> tuple[FiberChannelParams, str]:
    if not isinstance(doc, dict):
        raise ChannelSpecError("channel spec must be a JSON object")
    unknown = sorted(set(doc) - set(_SPEC_KEYS))
    if unknown:
        raise ChannelSpecError(f"unknown channel spec keys: {', '.join(unknown)}")
    try:
        eps = float(doc.get("epsilon_xt", 0.0))
        rot = math.radians(float(doc.get("pol_rotation_deg", 0.0)))
        phase = math.radians(float(doc.get("intermodal_phase_deg", 0.0)))
        seed = doc.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int):
            raise ChannelSpecError(f"seed must be an integer, got {seed!r}")
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ChannelSpecError):
            raise
        raise ChannelSpecError(f"bad channel spec value: {exc}") from exc
    label = str(doc.get("label", "fiber"))
    return FiberChannelParams(eps, rot, phase, seed), label


def load_channel_spec(path: Union[str, Path], lmax: int = DEFAULT_LMAX) -> ChannelModel:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ChannelSpecError(f"{path}: not valid JSON ({exc})") from exc
    params, label = params_from_spec(doc)
    if params.is_identity():
        ch = free_space_channel(lmax)
        return ChannelModel(ch.kraus, label, params, lmax)
    return fiber_channel(params, lmax, label)


def dump_channel_spec(params: FiberChannelParams, path: Union[str, Path], label: str = "fiber") -> None:
    Path(path).write_text(json.dumps(params_to_spec(params, label), indent=2) + "\n")
