"""Spin-orbit quantum eraser simulator: scan, fit, report, render, calibrate.

Exit codes: 0 ok, 2 input error, 3 I/O error, 4 infeasible calibration.
Angles are given in degrees on the command line.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .channels import ChannelSpecError, dump_channel_spec, free_space_channel, load_channel_spec
from .characterization import (
    CalibrationError,
    CalibrationInfeasible,
    MissingSettingError,
    calibrate_channel,
    channel_report,
)
from .fringe import VisibilityError
from .manifest import RunManifest, manifest_path
from .measurement import ScanConfig, ScanResult, ScanSchemaError, default_theta_grid, simulate_counts
from .render import GridError, GridSpec, count_lobes, render_intensity, write_pgm
from .spinorbit import (
    DEFAULT_LMAX,
    ModeFamily,
    SpinOrbitState,
    TruncationError,
    VectorModeSpec,
    make_vector_mode,
)
from .elements import project_polarization

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_IO = 3
EXIT_INFEASIBLE = 4
SEED_ENV = "SOE_DEFAULT_SEED"
MAX_SEED = 2**64 - 1


class InputError(Exception):
    pass


def _seed(value):
    if value is None:
        value = os.environ.get(SEED_ENV, "0")
    try:
        seed = int(value)
    except ValueError:
        raise InputError(f"seed must be an integer, got {value!r}") from None
    if not 0 <= seed <= MAX_SEED:
        raise InputError(f"seed must be in [0, 2^64 - 1], got {seed}")
    return seed


def _alpha_list(text: str) -> list[float]:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise InputError(f"bad --alpha list {text!r}") from None
    if not vals:
        raise InputError("--alpha needs at least one angle")
    return vals


def _write_text(path: Path, text: str) -> None:
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _finish(command: str, params: dict, seed, outputs: list[Path]) -> None:
    out = outputs[0]
    mpath = manifest_path(out)
    manifest = RunManifest(command, params, seed, [str(p) for p in outputs] + [str(mpath)])
    try:
        manifest.write(mpath)
    except OSError as exc:
        raise OSError(f"cannot write {mpath}: {exc.strerror or exc}") from exc


# --- commands --------------------------------------------------------------


def cmd_scan(args) -> int:
    seed = _seed(args.seed)
    alphas_deg = _alpha_list(args.alpha)
    if args.photons < 1:
        raise InputError("--photons must be >= 1")
    if not (0 < args.theta_step <= 180):
        raise InputError("--theta-step must be in (0, 180] degrees")
    if args.workers < 1:
        raise InputError("--workers must be >= 1")
    if args.channel:
        try:
            channel = load_channel_spec(args.channel)
        except FileNotFoundError:
            raise InputError(f"channel spec {args.channel} not found") from None
    else:
        channel = free_space_channel()
    thetas = default_theta_grid(args.theta_step)
    config = ScanConfig(np.radians(alphas_deg), thetas, args.photons, seed)
    scan = simulate_counts(config, channel, workers=args.workers)
    out = Path(args.out)
    _write_text(out, scan.to_csv())
    params = {
        "channel": args.channel,
        "channel_label": channel.label,
        "alpha_deg": alphas_deg,
        "theta_step_deg": args.theta_step,
        "photons": args.photons,
    }
    _finish("scan", params, seed, [out])
    print(f"wrote {len(scan.alphas) * len(scan.thetas)} settings to {out}")
    return EXIT_OK


def _load_scan(path: str) -> ScanResult:
    try:
        return ScanResult.read_csv(path)
    except FileNotFoundError:
        raise InputError(f"scan CSV {path} not found") from None


def cmd_fit(args) -> int:
    seed = _seed(args.seed)
    scan = _load_scan(args.scan)
    report = channel_report(scan, threshold=args.threshold, seed=seed)
    out = Path(args.out)
    _write_text(out, report.to_json())
    _finish("fit", {"scan": args.scan, "threshold": args.threshold}, seed, [out])
    print(report.summary_line())
    return EXIT_OK


def cmd_report(args) -> int:
    seed = _seed(args.seed)
    scan = _load_scan(args.scan)
    report = channel_report(scan, threshold=args.threshold, seed=seed)
    text = report.to_text()
    out = Path(args.out) if args.out else Path(args.scan).with_suffix(".report.txt")
    _write_text(out, text)
    _finish("report", {"scan": args.scan, "threshold": args.threshold}, seed, [out])
    sys.stdout.write(text)
    return EXIT_OK


def _render_state(args) -> tuple[SpinOrbitState, bool]:
    mode = args.mode
    if mode == "superposition":
        ell = abs(args.ell)
        lmax = max(DEFAULT_LMAX, ell)
        amps = np.zeros((2, 2 * lmax + 1), dtype=complex)
        amps[0, ell + lmax] += 1.0
        amps[0, -ell + lmax] += np.exp(1j * math.radians(args.phase_deg))
        if ell == 0:
            raise InputError("superposition needs ell != 0")
        return SpinOrbitState(amps / math.sqrt(2.0), lmax), True
    family = ModeFamily(mode)
    ell = args.ell if family is ModeFamily.CUSTOM else 1
    lmax = max(DEFAULT_LMAX, abs(ell))
    spec = VectorModeSpec(family, ell, math.radians(args.zeta_deg))
    state = make_vector_mode(spec, lmax)
    if args.analyzer is not None:
        return project_polarization(state, math.radians(args.analyzer)), True
    return state, False


def cmd_render(args) -> int:
    if args.grid < 1:
        raise InputError(f"grid size must be positive, got {args.grid}")
    try:
        grid = GridSpec(args.grid)
        state, fringes = _render_state(args)
    except (GridError, TruncationError, ValueError) as exc:
        raise InputError(str(exc)) from None
    raster = render_intensity(state, grid)
    out = Path(args.out)
    try:
        write_pgm(raster, out)
    except OSError as exc:
        raise OSError(f"cannot write {out}: {exc.strerror or exc}") from exc
    params = {"mode": args.mode, "ell": args.ell, "zeta_deg": args.zeta_deg,
              "phase_deg": args.phase_deg, "analyzer_deg": args.analyzer, "grid": args.grid}
    _finish("render", params, None, [out])
    msg = f"wrote {args.grid}x{args.grid} raster to {out}"
    if fringes:
        msg += f"; azimuthal lobes: {count_lobes(raster)}"
    print(msg)
    return EXIT_OK


def cmd_calibrate(args) -> int:
    seed = _seed(args.seed)
    params = calibrate_channel(args.v_min, args.v_max, math.radians(args.alpha_marked), seed=seed)
    out = Path(args.out)
    try:
        dump_channel_spec(params, out, label=args.label)
    except OSError as exc:
        raise OSError(f"cannot write {out}: {exc.strerror or exc}") from exc
    _finish("calibrate", {"v_min": args.v_min, "v_max": args.v_max,
                          "alpha_marked_deg": args.alpha_marked, "label": args.label}, seed, [out])
    print(f"epsilon_xt={params.epsilon_xt:.8f} intermodal_phase_deg={math.degrees(params.intermodal_phase):.6f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qeraser", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("scan", help="simulate a two-projection scan and write CSV")
    s.add_argument("--channel", help="channel spec JSON (default: free space)")
    s.add_argument("--alpha", default="0,45", help="analyzer angles in degrees, comma separated")
    s.add_argument("--theta-step", type=float, default=5.0, help="sector scan step in degrees")
    s.add_argument("--photons", type=int, default=100_000, help="photons per setting")
    s.add_argument("--seed", help=f"RNG seed (default: ${SEED_ENV} or 0)")
    s.add_argument("--workers", type=int, default=1, help="threads used to draw counts")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_scan)

    for name, func, helptext in (("fit", cmd_fit, "fit a scan CSV and write a report JSON"),
                                 ("report", cmd_report, "print and save a human-readable channel report")):
        f = sub.add_parser(name, help=helptext)
        f.add_argument("scan", help="scan CSV")
        if name == "fit":
            f.add_argument("--out", required=True, help="report JSON")
        else:
            f.add_argument("--out", help="report text file (default: <scan>.report.txt)")
        f.add_argument("--threshold", type=float, default=0.1, help="cross-talk verdict threshold on V_min")
        f.add_argument("--seed", help="bootstrap seed")
        f.set_defaults(func=func)

    r = sub.add_parser("render", help="render a mode intensity profile as ASCII PGM")
    r.add_argument("--mode", default="TM01",
                   choices=[m.value for m in ModeFamily] + ["superposition"])
    r.add_argument("--ell", type=int, default=1)
    r.add_argument("--zeta-deg", type=float, default=0.0)
    r.add_argument("--phase-deg", type=float, default=0.0, help="relative phase of the superposition")
    r.add_argument("--analyzer", type=float, help="project onto linear polarization at this angle (deg)")
    r.add_argument("--grid", type=int, default=256, help="raster size in pixels")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_render)

    c = sub.add_parser("calibrate", help="fit channel parameters to target visibilities")
    c.add_argument("--v-min", type=float, required=True)
    c.add_argument("--v-max", type=float, required=True)
    c.add_argument("--alpha-marked", type=float, default=90.0, help="marked analyzer angle (0 or 90 deg)")
    c.add_argument("--label", default="calibrated-fiber")
    c.add_argument("--seed", help="seed stored in the channel spec")
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_calibrate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CalibrationInfeasible as exc:
        print(f"error: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except CalibrationError as exc:
        # ordering/range violations of the targets are also unreachable requests
        print(f"error: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (InputError, ChannelSpecError, ScanSchemaError, MissingSettingError, VisibilityError, ValueError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
