"""Transverse intensity rasters of spin-orbit modes and azimuthal fringe analysis."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.ndimage import map_coordinates

from .fiber import FiberSpec, radial_profile
from .spinorbit import SpinOrbitState

MIN_GRID = 64
PGM_MAXVAL = 65535
LOBE_THRESHOLD = 0.5
ANGULAR_SAMPLES = 4096


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Square raster of ``size`` pixels spanning ``[-half_width, half_width]``.

    ``half_width`` is in beam waists for the free-space profile and in
    micrometers when a fiber is supplied. ``None`` picks a width that keeps
    the outermost ring well inside the frame.
    """

    size: int = 256
    half_width: Optional[float] = None

    def __post_init__(self):
        if self.size < MIN_GRID:
            raise GridError(f"grid resolution must be at least {MIN_GRID}x{MIN_GRID}, got {self.size}")


def lg_amplitude(ell: int, r: np.ndarray, waist: float = 1.0) -> np.ndarray:
    """Radial amplitude of the p=0 Laguerre-Gauss donut, unnormalized."""
    rho = np.sqrt(2.0) * r / waist
    return rho ** abs(ell) * np.exp(-(r / waist) ** 2)


def _occupied_ells(state: SpinOrbitState, tol: float = 1e-12) -> np.ndarray:
    weight = np.sum(np.abs(state.amplitudes) ** 2, axis=0)
    return state.ells[weight > tol]


def _auto_half_width(state: SpinOrbitState, fiber: Optional[FiberSpec]) -> float:
    if fiber is not None:
        return 1.5 * fiber.core_radius_um
    ells = _occupied_ells(state)
    top = int(np.max(np.abs(ells))) if len(ells) else 0
    return 1.6 * np.sqrt(max(top, 1) / 2.0) + 1.2


def coordinates(grid: GridSpec, half_width: float) -> tuple[np.ndarray, np.ndarray]:
    axis = np.linspace(-half_width, half_width, grid.size)
    x, y = np.meshgrid(axis, -axis)
    return np.hypot(x, y), np.arctan2(y, x)


def field_components(state: SpinOrbitState, r: np.ndarray, phi: np.ndarray,
                     fiber: Optional[FiberSpec] = None, p: int = 1) -> np.ndarray:
    """Complex field of each circular polarization component, shape (2, *r.shape)."""
    out = np.zeros((2,) + np.shape(r), dtype=complex)
    for ell in _occupied_ells(state):
        if fiber is not None:
            radial = radial_profile(fiber, ell, p, r)
        else:
            radial = lg_amplitude(ell, r)
        mode = radial * np.exp(1j * ell * phi)
        for pol in range(2):
            out[pol] += state.amplitudes[pol, ell + state.lmax] * mode
    return out


def render_intensity(state: SpinOrbitState, grid: GridSpec = GridSpec(),
                     fiber: Optional[FiberSpec] = None, p: int = 1) -> np.ndarray:
    """Total intensity |E_R|^2 + |E_L|^2 on the grid (row 0 is the top edge)."""
    half_width = grid.half_width or _auto_half_width(state, fiber)
    r, phi = coordinates(grid, half_width)
    comps = field_components(state, r, phi, fiber, p)
    return np.sum(np.abs(comps) ** 2, axis=0)


def sample_ring(raster: np.ndarray, radius_px: float, n: int = ANGULAR_SAMPLES) -> tuple[np.ndarray, np.ndarray]:
    """Cubic-interpolated intensity on a circle centred on the raster."""
    c = (np.array(raster.shape) - 1) / 2.0
    angles = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
    rows = c[0] - radius_px * np.sin(angles)
    cols = c[1] + radius_px * np.cos(angles)
    vals = map_coordinates(raster, [rows, cols], order=3, mode="nearest")
    return angles, vals


def ring_radius(raster: np.ndarray, n_radii: int = 400) -> float:
    """Radius (pixels) whose ring carries the largest mean intensity."""
    r_max = (min(raster.shape) - 1) / 2.0
    radii = np.linspace(1.0, r_max - 1.0, n_radii)
    means = [sample_ring(raster, r, 512)[1].mean() for r in radii]
    i = int(np.argmax(means))
    # refine on a finer bracket around the coarse maximum
    lo, hi = radii[max(i - 1, 0)], radii[min(i + 1, n_radii - 1)]
    fine = np.linspace(lo, hi, 81)
    means = [sample_ring(raster, r, 512)[1].mean() for r in fine]
    return float(fine[int(np.argmax(means))])


def count_lobes(raster: np.ndarray, radius_px: Optional[float] = None,
                threshold: float = LOBE_THRESHOLD) -> int:
    """Number of contiguous angular runs above ``threshold * max`` on the ring."""
    if radius_px is None:
        radius_px = ring_radius(raster)
    _, vals = sample_ring(raster, radius_px)
    above = vals >= threshold * vals.max()
    if above.all():
        return 0
    # rising edges on the periodic sequence
    return int(np.count_nonzero(above & ~np.roll(above, 1)))


def angular_variance_ratio(raster: np.ndarray, radius_px: Optional[float] = None) -> float:
    """Variance of the ring intensity divided by its squared mean."""
    if radius_px is None:
        radius_px = ring_radius(raster)
    _, vals = sample_ring(raster, radius_px)
    return float(np.var(vals) / np.mean(vals) ** 2)


def to_gray(raster: np.ndarray, maxval: int = PGM_MAXVAL) -> np.ndarray:
    peak = float(np.max(raster))
    if peak <= 0:
        return np.zeros(raster.shape, dtype=np.int64)
    return np.rint(np.clip(raster, 0, None) / peak * maxval).astype(np.int64)


def write_pgm(raster: np.ndarray, path, maxval: int = PGM_MAXVAL) -> None:
    """ASCII (P2) portable graymap, scaled so the brightest pixel is ``maxval``."""
    gray = to_gray(raster, maxval)
    h, w = gray.shape
    lines = ["P2", f"{w} {h}", str(maxval)]
    lines += [" ".join(str(v) for v in row) for row in gray]
    Path(path).write_text("\n".join(lines) + "\n")


def read_pgm(path) -> np.ndarray:
    tokens = []
    for line in Path(path).read_text().splitlines():
        tokens.extend(line.split("#", 1)[0].split())
    if not tokens or tokens[0] != "P2":
        raise ValueError(f"{path}: not an ASCII PGM file")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    data = np.array([int(t) for t in tokens[4:]], dtype=np.int64)
    if data.size != w * h:
        raise ValueError(f"{path}: expected {w * h} pixels, found {data.size}")
    if data.max(initial=0) > maxval:
        raise ValueError(f"{path}: pixel value exceeds maxval {maxval}")
    return data.reshape(h, w)
