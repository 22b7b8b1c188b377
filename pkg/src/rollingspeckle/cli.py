"""Command-line pipeline: psf, simulate, reconstruct, evaluate, sweep.

Every command accepts ``--config FILE`` pointing at a JSON dict (or a
sidecar written by a previous run); explicit flags win over config
values. All randomness flows from explicit seeds, and each command
writes a sidecar JSON next to its primary output recording every
resolved parameter, so any run can be reproduced byte-for-byte from its
sidecar alone (wall-clock timings live in reports, not sidecars).

Exit codes: 0 success, 1 numerical failure, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time

import numpy as np

from . import io
from .core import (
    ConfigurationError,
    DegenerateOperatorError,
    DimensionError,
    DivergenceError,
    GenerationError,
    NoDominantFrequencyError,
    PsfImage,
    SensorFrame,
    ShutterSchedule,
    effective_fps,
)
from .forward import ForwardOperator, apply_forward
from .metrics import dominant_frequency, phase_transition_sweep, psnr, relative_error
from .psf import PupilSpec, check_coverage, load_psf, synthesize_speckle_psf
from .scenes import add_gaussian_noise, gen_blinking_sources, gen_moving_glyphs
from .solver import SolverConfig, SparsityTransform, solve

__all__ = ["main", "period_bins_for_frequency"]


def period_bins_for_frequency(schedule: ShutterSchedule, f_hz: float) -> int:
    """Blink period in time bins for a physical modulation frequency.

    One time bin lasts one row period, so a source modulated at f_hz
    completes a cycle every effective_fps / f_hz bins; the square-wave
    generator needs an integer period, hence the rounding.
    """
    period = round(effective_fps(schedule) / f_hz)
    if period < 2:
        raise ConfigurationError(
            f"frequency {f_hz} Hz needs a period of {period} bins; "
            "the shutter cannot sample faster than 2 bins per cycle"
        )
    return period


def _resolve(args: argparse.Namespace, defaults: dict) -> dict:
    """Merge explicit flags over config-file values over hard defaults."""
    config = {}
    if getattr(args, "config", None):
        payload = io.read_json(args.config)
        config = payload.get("params", payload)
    params = {}
    for key, default in defaults.items():
        flag = getattr(args, key, None)
        if flag is not None:
            params[key] = flag
        elif key in config and config[key] is not None:
            params[key] = config[key]
        else:
            params[key] = default
    return params


def _read_psf_file(path, center=None) -> PsfImage:
    """Read a PSF: RCS1 files are trusted as clean, PGMs get load cleanup."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == io.MAGIC:
        data = io.read_array(path)
        if data.ndim != 2:
            raise DimensionError(f"PSF file {path} holds a {data.ndim}D array, need 2D")
        total = data.sum()
        if total <= 0:
            raise ConfigurationError(f"PSF file {path} sums to {total}; not a PSF")
        return PsfImage(data / total, center=center, normalized=True)
    return load_psf(path, center=center)


def _parse_center(value):
    if value is None:
        return None
    return (int(value[0]), int(value[1]))


def _schedule_from_params(n_rows: int, params: dict) -> ShutterSchedule:
    return ShutterSchedule.default(
        n_rows,
        rows_per_bin=int(params["rows_per_bin"]),
        row_period_s=float(params["row_period"]),
        exposure_s=None if params["exposure"] is None else float(params["exposure"]),
    )


# ---------------------------------------------------------------- psf ----

_PSF_DEFAULTS = {
    "synth": False,
    "load": None,
    "size": 108,
    "pupil_frac": 0.25,
    "seed": 0,
    "center": None,
    "rows_per_bin": 2,
    "coverage_threshold": 0.1,
    "out": None,
}


def cmd_psf(args: argparse.Namespace) -> int:
    params = _resolve(args, _PSF_DEFAULTS)
    if params["out"] is None:
        raise ConfigurationError("psf requires --out")
    if bool(params["synth"]) == bool(params["load"]):
        raise ConfigurationError("psf requires exactly one of --synth or --load")
    if params["synth"]:
        spec = PupilSpec(
            (int(params["size"]), int(params["size"])),
            float(params["pupil_frac"]),
            rng_seed=int(params["seed"]),
        )
        psf = synthesize_speckle_psf(spec)
    else:
        psf = load_psf(params["load"], center=_parse_center(params["center"]))
    schedule = ShutterSchedule.default(psf.dims[0], rows_per_bin=int(params["rows_per_bin"]))
    report = check_coverage(psf, schedule, float(params["coverage_threshold"]))
    io.write_array(params["out"], psf.data)
    sidecar = {
        "command": "psf",
        "params": params,
        "psf_center": list(psf.center),
        "coverage": {
            "passed": report.passed,
            "threshold_frac": report.threshold_frac,
            "bottom_rows_above_threshold": report.bottom_rows_above_threshold,
            "top_rows_above_threshold": report.top_rows_above_threshold,
            "bottom_min_row_fraction": report.bottom_min_row_fraction,
            "top_min_row_fraction": report.top_min_row_fraction,
        },
    }
    io.write_json(str(params["out"]) + ".json", sidecar)
    status = "PASS" if report.passed else "FAIL"
    print(f"wrote PSF {params['out']} ({psf.dims[0]}x{psf.dims[1]})")
    print(
        f"coverage {status}: rows above {report.threshold_frac:.3g} of mean energy: "
        f"bottom {report.bottom_rows_above_threshold:.3f}, "
        f"top {report.top_rows_above_threshold:.3f}"
    )
    return 0


# ----------------------------------------------------------- simulate ----

_SIMULATE_DEFAULTS = {
    "psf": None,
    "psf_center": None,
    "scene": None,
    "bins": None,
    "rows_per_bin": 2,
    "row_period": 1.0,
    "exposure": None,
    "n_glyphs": None,
    "glyph_size": 9,
    "source": None,
    "source_freq": None,
    "snr": None,
    "seed": 0,
    "magnification": 1.0,
    "out_frame": None,
    "out_truth": None,
}


def cmd_simulate(args: argparse.Namespace) -> int:
    params = _resolve(args, _SIMULATE_DEFAULTS)
    for required in ("psf", "scene", "out_frame", "out_truth"):
        if params[required] is None:
            raise ConfigurationError(f"simulate requires --{required.replace('_', '-')}")
    psf = _read_psf_file(params["psf"], center=_parse_center(params["psf_center"]))
    n_y, n_x = psf.dims
    schedule = _schedule_from_params(n_y, params)
    if params["bins"] is not None and int(params["bins"]) != schedule.n_t:
        raise ConfigurationError(
            f"--bins {params['bins']} inconsistent with {n_y} rows at "
            f"{schedule.rows_per_bin} rows per bin (gives {schedule.n_t} bins)"
        )
    dims = (n_y, n_x, schedule.n_t)
    op = ForwardOperator(psf, schedule, dims)  # rejects exposure > row period

    seed = int(params["seed"])
    if params["scene"] == "glyphs":
        n_glyphs = schedule.n_t if params["n_glyphs"] is None else int(params["n_glyphs"])
        params["n_glyphs"] = n_glyphs
        truth = gen_moving_glyphs(dims, n_glyphs, int(params["glyph_size"]), seed=seed)
    elif params["scene"] == "blinking":
        sources = [
            [int(s[0]), int(s[1]), int(s[2]), int(s[3]), float(s[4])]
            for s in _parse_sources(params["source"])
        ]
        for spec in _parse_sources(params["source_freq"]):
            row, col, f_hz, phase, amp = spec
            period = period_bins_for_frequency(schedule, float(f_hz))
            sources.append([int(row), int(col), period, int(phase), float(amp)])
        if not sources:
            raise ConfigurationError(
                "blinking scene requires at least one --source or --source-freq"
            )
        params["source"] = sources
        params["source_freq"] = None  # already converted to bin periods
        truth = gen_blinking_sources(dims, [tuple(s) for s in sources])
    else:
        raise ConfigurationError(f"unknown scene {params['scene']!r}")

    frame = apply_forward(op, truth)
    if params["snr"] is not None:
        # noise seed is derived from --seed so one flag drives all randomness
        frame = add_gaussian_noise(frame, float(params["snr"]), seed=seed + 1)
    io.write_array(params["out_frame"], frame.data)
    io.write_video(params["out_truth"], truth)
    sidecar = {
        "command": "simulate",
        "params": params,
        "dims": list(dims),
        "effective_fps": effective_fps(schedule),
    }
    io.write_json(str(params["out_frame"]) + ".json", sidecar)
    print(f"wrote frame {params['out_frame']} ({n_y}x{n_x}) and truth "
          f"{params['out_truth']} ({n_y}x{n_x}x{schedule.n_t})")
    return 0


def _parse_sources(entries):
    if not entries:
        return []
    parsed = []
    for entry in entries:
        if isinstance(entry, str):
            fields = entry.split(",")
        else:
            fields = list(entry)
        if len(fields) != 5:
            raise ConfigurationError(
                f"source spec needs 5 comma-separated fields, got {entry!r}"
            )
        parsed.append([float(f) for f in fields])
    return parsed


# -------------------------------------------------------- reconstruct ----

_RECONSTRUCT_DEFAULTS = {
    "frame": None,
    "psf": None,
    "psf_center": None,
    "rows_per_bin": None,
    "row_period": None,
    "exposure": None,
    "tau": None,
    "transform": "identity",
    "max_iters": 500,
    "rel_tol": 1e-6,
    "lipschitz": "auto",
    "nonneg": True,
    "out": None,
    "frames_dir": None,
    "report": None,
}


def cmd_reconstruct(args: argparse.Namespace) -> int:
    params = _resolve(args, _RECONSTRUCT_DEFAULTS)
    for required in ("frame", "psf", "tau", "out"):
        if params[required] is None:
            raise ConfigurationError(f"reconstruct requires --{required.replace('_', '-')}")
    # schedule parameters fall back to the simulate sidecar when present
    sidecar_defaults = {"rows_per_bin": 2, "row_period": 1.0, "exposure": None}
    try:
        frame_sidecar = io.read_json(str(params["frame"]) + ".json")
        for key in sidecar_defaults:
            value = frame_sidecar.get("params", {}).get(key)
            if value is not None:
                sidecar_defaults[key] = value
    except FileNotFoundError:
        pass
    for key, value in sidecar_defaults.items():
        if params[key] is None:
            params[key] = value

    frame_data = io.read_array(params["frame"])
    if frame_data.ndim != 2:
        raise DimensionError(
            f"frame file {params['frame']} holds a {frame_data.ndim}D array, need 2D"
        )
    frame = SensorFrame(frame_data)
    psf = _read_psf_file(params["psf"], center=_parse_center(params["psf_center"]))
    schedule = _schedule_from_params(frame.dims[0], params)
    dims = (frame.dims[0], frame.dims[1], schedule.n_t)
    try:
        op = ForwardOperator(psf, schedule, dims)
    except DimensionError as exc:
        raise DimensionError(
            f"inconsistent inputs: frame file {params['frame']} has dims "
            f"{frame.dims}, PSF file {params['psf']} has dims {psf.dims}, "
            f"schedule expects {schedule.n_rows} rows in {schedule.n_t} bins "
            f"({exc})"
        ) from exc

    lipschitz = params["lipschitz"]
    if isinstance(lipschitz, str) and lipschitz != "auto":
        lipschitz = float(lipschitz)
    cfg = SolverConfig(
        tau=float(params["tau"]),
        max_iters=int(params["max_iters"]),
        rel_tol=float(params["rel_tol"]),
        transform=SparsityTransform(params["transform"]),
        lipschitz=lipschitz,
        nonneg=bool(params["nonneg"]),
    )
    started = time.perf_counter()
    report = solve(op, frame, cfg)
    wall_time = time.perf_counter() - started

    io.write_video(params["out"], report.solution)
    solution = report.solution.data
    peak = solution.max()
    occupancy = float(np.mean(solution > 0.01 * peak)) if peak > 0 else 0.0
    report_payload = {
        "command": "reconstruct",
        "objective_trace": [float(v) for v in report.objective_trace],
        "iterations_run": report.iterations_run,
        "converged": report.converged,
        "wall_time_s": wall_time,
        "solution_occupancy": occupancy,
        "non_sparse_warning": occupancy > 0.5,
    }
    if params["frames_dir"] is not None:
        report_payload["pgm_scale"] = io.export_frame_pgms(
            params["frames_dir"], report.solution
        )
    report_path = params["report"] or str(params["out"]) + ".report.json"
    io.write_json(report_path, report_payload)
    io.write_json(str(params["out"]) + ".json", {"command": "reconstruct", "params": params})
    print(
        f"wrote video {params['out']} ({dims[0]}x{dims[1]}x{dims[2]}), "
        f"{report.iterations_run} iterations, converged={report.converged}"
    )
    if report_payload["non_sparse_warning"]:
        print(
            f"warning: solution is not sparse ({occupancy:.0%} of entries above "
            "1% of max); consider a larger --tau"
        )
    return 0


# ----------------------------------------------------------- evaluate ----

_EVALUATE_DEFAULTS = {
    "truth": None,
    "est": None,
    "sidecar": None,
    "out": None,
}


def cmd_evaluate(args: argparse.Namespace) -> int:
    params = _resolve(args, _EVALUATE_DEFAULTS)
    for required in ("truth", "est"):
        if params[required] is None:
            raise ConfigurationError(f"evaluate requires --{required}")
    truth = io.read_video(params["truth"])
    est = io.read_video(params["est"])
    if truth.dims != est.dims:
        raise DimensionError(
            f"inconsistent inputs: truth file {params['truth']} has dims "
            f"{truth.dims}, estimate file {params['est']} has dims {est.dims}"
        )
    payload = {
        "command": "evaluate",
        "params": params,
        "psnr_db": psnr(truth, est),
        "relative_error": relative_error(truth, est),
    }
    if params["sidecar"] is not None:
        sidecar = io.read_json(params["sidecar"])
        sources = sidecar.get("params", {}).get("source") or []
        table = []
        for row, col, period, phase, amp in sources:
            row, col = int(row), int(col)
            truth_bin = dominant_frequency(truth.data[row, col, :])
            try:
                est_bin = dominant_frequency(est.data[row, col, :])
            except NoDominantFrequencyError:
                est_bin = None
            table.append({
                "row": row,
                "col": col,
                "period_bins": int(period),
                "truth_bin": truth_bin,
                "est_bin": est_bin,
                "match": est_bin == truth_bin,
            })
        payload["source_frequencies"] = table
    if params["out"] is not None:
        io.write_json(params["out"], payload)
    print(f"psnr_db={payload['psnr_db']:.3f} relative_error={payload['relative_error']:.6g}")
    for entry in payload.get("source_frequencies", []):
        print(
            f"source ({entry['row']},{entry['col']}): truth bin {entry['truth_bin']}, "
            f"estimate bin {entry['est_bin']}, match={entry['match']}"
        )
    return 0


# -------------------------------------------------------------- sweep ----

_SWEEP_DEFAULTS = {
    "size": 32,
    "bins": 8,
    "k_list": "1,4,16,64",
    "snr": None,
    "trials": 10,
    "tau": 0.01,
    "max_iters": 300,
    "rel_tol": 1e-6,
    "seed": 0,
    "pupil_frac": 0.25,
    "success_threshold": 0.1,
    "out_csv": None,
    "out_json": None,
}


def cmd_sweep(args: argparse.Namespace) -> int:
    params = _resolve(args, _SWEEP_DEFAULTS)
    if params["out_csv"] is None:
        raise ConfigurationError("sweep requires --out-csv")
    k_list = [int(k) for k in str(params["k_list"]).split(",") if k != ""]
    size = int(params["size"])
    bins = int(params["bins"])
    cfg = SolverConfig(
        tau=float(params["tau"]),
        max_iters=int(params["max_iters"]),
        rel_tol=float(params["rel_tol"]),
    )
    cells = phase_transition_sweep(
        (size, size, bins),
        k_list,
        None if params["snr"] is None else float(params["snr"]),
        int(params["trials"]),
        cfg,
        seed=int(params["seed"]),
        pupil_radius_frac=float(params["pupil_frac"]),
        success_threshold=float(params["success_threshold"]),
    )
    with open(params["out_csv"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "m", "n", "trials", "success_rate"])
        for cell in cells:
            writer.writerow([cell.k, cell.m, cell.n, cell.trials, cell.success_rate])
    summary = {
        "command": "sweep",
        "params": params,
        "cells": [
            {"k": c.k, "m": c.m, "n": c.n, "trials": c.trials,
             "success_rate": c.success_rate}
            for c in cells
        ],
    }
    json_path = params["out_json"] or str(params["out_csv"]) + ".json"
    io.write_json(json_path, summary)
    for cell in cells:
        print(f"k={cell.k}: success_rate={cell.success_rate:.2f} "
              f"(m={cell.m}, n={cell.n}, trials={cell.trials})")
    return 0


# ------------------------------------------------------------- parser ----

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rollingspeckle",
        description="Compressive high-speed video from one rolling-shutter "
                    "frame encoded by a pupil-plane speckle PSF.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("psf", help="synthesize or ingest a speckle PSF")
    p.add_argument("--config", help="JSON config or sidecar; flags win")
    p.add_argument("--synth", action="store_const", const=True, default=None,
                   help="synthesize from a random phase screen")
    p.add_argument("--load", help="ingest a measured PSF (RCS1 or PGM)")
    p.add_argument("--size", type=int, help="square grid size (synth)")
    p.add_argument("--pupil-frac", type=float, dest="pupil_frac",
                   help="pupil radius as a fraction of the half grid (synth)")
    p.add_argument("--seed", type=int, help="phase screen seed (synth)")
    p.add_argument("--center", type=int, nargs=2, metavar=("ROW", "COL"),
                   help="PSF center pixel (load)")
    p.add_argument("--rows-per-bin", type=int, dest="rows_per_bin",
                   help="rows per time bin for the coverage check")
    p.add_argument("--coverage-threshold", type=float, dest="coverage_threshold",
                   help="row-energy fraction of the mean used in the report")
    p.add_argument("--out", help="output PSF file (RCS1)")
    p.set_defaults(handler=cmd_psf)

    p = sub.add_parser("simulate", help="encode a generated scene into one frame")
    p.add_argument("--config", help="JSON config or sidecar; flags win")
    p.add_argument("--psf", help="PSF file (RCS1 or PGM)")
    p.add_argument("--psf-center", type=int, nargs=2, dest="psf_center",
                   metavar=("ROW", "COL"))
    p.add_argument("--scene", choices=["glyphs", "blinking"])
    p.add_argument("--bins", type=int, help="expected bin count (consistency check)")
    p.add_argument("--rows-per-bin", type=int, dest="rows_per_bin")
    p.add_argument("--row-period", type=float, dest="row_period",
                   help="seconds per row group")
    p.add_argument("--exposure", type=float,
                   help="exposure seconds; must not exceed the row period")
    p.add_argument("--n-glyphs", type=int, dest="n_glyphs")
    p.add_argument("--glyph-size", type=int, dest="glyph_size")
    p.add_argument("--source", action="append",
                   help="ROW,COL,PERIOD_BINS,PHASE_BINS,AMPLITUDE (repeatable)")
    p.add_argument("--source-freq", action="append", dest="source_freq",
                   help="ROW,COL,FREQ_HZ,PHASE_BINS,AMPLITUDE; the period in "
                        "bins is round(effective_fps / FREQ_HZ)")
    p.add_argument("--snr", type=float, help="omit for a noiseless frame")
    p.add_argument("--seed", type=int)
    p.add_argument("--magnification", type=float, help="bookkeeping only")
    p.add_argument("--out-frame", dest="out_frame")
    p.add_argument("--out-truth", dest="out_truth")
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("reconstruct", help="recover the video from one frame")
    p.add_argument("--config", help="JSON config or sidecar; flags win")
    p.add_argument("--frame", help="captured frame (RCS1)")
    p.add_argument("--psf", help="PSF file (RCS1 or PGM)")
    p.add_argument("--psf-center", type=int, nargs=2, dest="psf_center",
                   metavar=("ROW", "COL"))
    p.add_argument("--rows-per-bin", type=int, dest="rows_per_bin",
                   help="defaults to the frame sidecar value")
    p.add_argument("--row-period", type=float, dest="row_period")
    p.add_argument("--exposure", type=float)
    p.add_argument("--tau", type=float, help="l1 regularization weight")
    p.add_argument("--transform", choices=["identity", "dct3", "temporal_difference"])
    p.add_argument("--max-iters", type=int, dest="max_iters")
    p.add_argument("--rel-tol", type=float, dest="rel_tol")
    p.add_argument("--lipschitz", help='"auto" or a positive number')
    p.add_argument("--nonneg", action=argparse.BooleanOptionalAction, default=None,
                   help="enforce a nonnegative solution (default on)")
    p.add_argument("--out", help="output video (RCS1)")
    p.add_argument("--frames-dir", dest="frames_dir",
                   help="also export one PGM per time bin")
    p.add_argument("--report", help="report JSON path (default OUT.report.json)")
    p.set_defaults(handler=cmd_reconstruct)

    p = sub.add_parser("evaluate", help="score a reconstruction against truth")
    p.add_argument("--config", help="JSON config or sidecar; flags win")
    p.add_argument("--truth", help="ground-truth video (RCS1)")
    p.add_argument("--est", help="reconstructed video (RCS1)")
    p.add_argument("--sidecar", help="simulate sidecar; enables the per-source "
                                     "frequency table for blinking scenes")
    p.add_argument("--out", help="metrics JSON path")
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("sweep", help="success-rate table over scene sparsity")
    p.add_argument("--config", help="JSON config or sidecar; flags win")
    p.add_argument("--size", type=int, help="square sensor size")
    p.add_argument("--bins", type=int, help="time bins (must divide size)")
    p.add_argument("--k-list", dest="k_list", help="comma-separated sparsities")
    p.add_argument("--snr", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--tau", type=float)
    p.add_argument("--max-iters", type=int, dest="max_iters")
    p.add_argument("--rel-tol", type=float, dest="rel_tol")
    p.add_argument("--seed", type=int)
    p.add_argument("--pupil-frac", type=float, dest="pupil_frac")
    p.add_argument("--success-threshold", type=float, dest="success_threshold")
    p.add_argument("--out-csv", dest="out_csv")
    p.add_argument("--out-json", dest="out_json")
    p.set_defaults(handler=cmd_sweep)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except FileNotFoundError as exc:
        name = exc.filename if exc.filename else exc
        print(f"error: file not found: {name}", file=sys.stderr)
        return 2
    except (ConfigurationError, DimensionError, GenerationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DivergenceError, DegenerateOperatorError, NoDominantFrequencyError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
