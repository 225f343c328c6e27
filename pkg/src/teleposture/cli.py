"""Command-line entry point.

Subcommands: simulate, calibrate-camera, fit-lengths, estimate, evaluate,
run-experiment, rula. Every command takes --config (defaulting to the
TELEPOSTURE_CONFIG environment variable).

Exit codes: 0 success, 1 usage error, 2 config/data error, 3 numerical
failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from . import particle_filter as pf
from . import traces
from .anthropometry import CalibrationSample, fit_lengths_keypoints, fit_lengths_robot
from .camera import calibrate_extrinsics
from .config import (
    default_config_path,
    load_session,
    save_session,
    session_to_dict,
)
from .ergonomics import RulaContext, max_rula, rula
from .errors import (
    AllParticlesInvalid,
    ConfigError,
    DegenerateConfiguration,
    DegenerateProjection,
    EmptyOverlap,
    EmptyTrace,
    LengthMismatch,
    LimitsViolated,
    NonPositiveLength,
    RankDeficient,
    TelepostureError,
    TraceError,
)
from .harness import evaluate, run_experiment, sync_traces
from .sim import apply_occlusion, generate_task, synthesize_sensors

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3

_DATA_ERRORS = (
    ConfigError,
    TraceError,
    EmptyOverlap,
    LengthMismatch,
    EmptyTrace,
    FileNotFoundError,
)
_NUMERICAL_ERRORS = (
    DegenerateProjection,
    DegenerateConfiguration,
    RankDeficient,
    NonPositiveLength,
    AllParticlesInvalid,
    LimitsViolated,
)


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage problems; this tool reserves 2 for data errors
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="teleposture", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, mode_flag=False):
        p.add_argument(
            "--config",
            default=default_config_path(),
            help="session config file (default: $TELEPOSTURE_CONFIG)",
        )
        p.add_argument("--seed", type=int, default=None, help="override the configured seed")
        p.add_argument("--out", default=None, help="output directory")
        if mode_flag:
            p.add_argument(
                "--mode",
                choices=pf.MODES,
                default=None,
                help="which sensor channels the filter uses",
            )

    p = sub.add_parser("simulate", help="generate ground truth and sensor traces")
    common(p)
    p.add_argument(
        "--occlusion",
        choices=("none", "dropout", "displace"),
        default=None,
        help="override the configured occlusion mode ('none' disables it)",
    )

    p = sub.add_parser("calibrate-camera", help="fit extrinsics from configured correspondences")
    common(p)

    p = sub.add_parser("fit-lengths", help="estimate segment lengths from a calibration run")
    common(p)
    p.add_argument("--traces", required=True, help="directory with truth + sensor traces")
    p.add_argument(
        "--sensor",
        choices=("robot", "keypoints"),
        default="robot",
        help="which channel the fit uses",
    )

    p = sub.add_parser("estimate", help="run the particle filter over recorded traces")
    common(p, mode_flag=True)
    p.add_argument("--traces", required=True, help="directory with robot/keypoint traces")

    p = sub.add_parser("evaluate", help="deviation report of estimates against ground truth")
    common(p)
    p.add_argument("--estimates", required=True)
    p.add_argument("--truth", required=True)

    p = sub.add_parser("run-experiment", help="full mode-comparison experiment grid")
    common(p)

    p = sub.add_parser("rula", help="posture risk scores for an estimate trace")
    common(p)
    p.add_argument("--estimates", required=True)

    return parser


def _require_config(args) -> object:
    if not args.config:
        raise ConfigError("no config file: pass --config or set TELEPOSTURE_CONFIG")
    return load_session(args.config)


def _out_dir(args, session) -> str:
    out = args.out or session.output_dir
    os.makedirs(out, exist_ok=True)
    return out


def _cmd_simulate(args) -> int:
    session = _require_config(args)
    task = session.task
    if args.seed is not None:
        task = replace(task, seed=args.seed)
    out = _out_dir(args, session)
    gt = generate_task(task, session.model)
    robot, kps = synthesize_sensors(
        gt, session.filter.noise, session.camera, seed=task.seed
    )
    occ = session.occlusion
    if args.occlusion == "none":
        occ = None
    elif args.occlusion is not None:
        if occ is None:
            raise ConfigError("--occlusion given but the config has no occlusion block")
        occ = replace(occ, mode=args.occlusion)
    if occ is not None:
        kps = apply_occlusion(kps, occ)
    traces.save_truth_trace(os.path.join(out, "truth.jsonl"), gt)
    traces.save_robot_trace(os.path.join(out, "robot.jsonl"), robot)
    traces.save_keypoint_trace(os.path.join(out, "keypoints.jsonl"), kps)
    print(f"wrote {len(gt.times)} steps to {out}")
    return EXIT_OK


def _cmd_calibrate_camera(args) -> int:
    if not args.config:
        raise ConfigError("no config file: pass --config or set TELEPOSTURE_CONFIG")
    import yaml

    with open(args.config, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh) or {}
    cam = raw.get("camera", {})
    if "correspondences" not in cam:
        raise ConfigError("camera block has no correspondences to calibrate from")
    session = load_session(args.config)  # performs the calibration
    result = calibrate_extrinsics(
        session.camera.intrinsics,
        np.array([c["point_m"] for c in cam["correspondences"]], dtype=float),
        np.array([c["pixel_px"] for c in cam["correspondences"]], dtype=float),
    )
    out = _out_dir(args, session)
    path = os.path.join(out, "extrinsics.yaml")
    import yaml as _yaml

    with open(path, "w", encoding="utf-8") as fh:
        _yaml.safe_dump(
            {
                "extrinsics": {
                    "rotation_wxyz": [float(x) for x in result.extrinsics.rotation],
                    "translation_m": [float(x) for x in result.extrinsics.translation],
                },
                "rms_px": result.rms_px,
                "converged": result.converged,
            },
            fh,
            sort_keys=True,
        )
    print(f"calibrated extrinsics (rms {result.rms_px:.4g} px) -> {path}")
    return EXIT_OK


def _cmd_fit_lengths(args) -> int:
    session = _require_config(args)
    t, q, _ = traces.load_truth_arrays(os.path.join(args.traces, "truth.jsonl"))
    if args.sensor == "robot":
        robot = traces.load_robot_trace(os.path.join(args.traces, "robot.jsonl"))
        samples = [CalibrationSample(q=q[i], robot=robot[i]) for i in range(len(t))]
        result = fit_lengths_robot(samples, session.model)
    else:
        kps = traces.load_keypoint_trace(os.path.join(args.traces, "keypoints.jsonl"))
        samples = [CalibrationSample(q=q[i], keypoints=kps[i]) for i in range(len(t))]
        result = fit_lengths_keypoints(samples, session.model, session.camera.projection)
    out = _out_dir(args, session)
    path = os.path.join(out, "lengths.json")
    with open(path, "w") as fh:
        json.dump(
            {
                "segment_lengths_m": {
                    k: float(getattr(result.lengths, k))
                    for k in ("torso", "shoulder", "upper_arm", "lower_arm", "hand")
                },
                "residual_rms": result.residual_rms,
            },
            fh,
            sort_keys=True,
            indent=1,
        )
    print(f"fit lengths (residual rms {result.residual_rms:.4g}) -> {path}")
    return EXIT_OK


def _cmd_estimate(args) -> int:
    session = _require_config(args)
    cfg = session.filter
    if args.mode is not None:
        cfg = replace(cfg, mode=args.mode)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    robot = None
    kps = None
    if cfg.mode in ("robot", "fused"):
        robot = traces.load_robot_trace(os.path.join(args.traces, "robot.jsonl"))
    if cfg.mode in ("keypoints", "fused"):
        kps = traces.load_keypoint_trace(os.path.join(args.traces, "keypoints.jsonl"))
    steps = sync_traces(robot, kps, cfg.dt)
    estimates = pf.run(
        steps, model=session.model, config=cfg, projection=session.camera.projection
    )
    out = _out_dir(args, session)
    path = os.path.join(out, "estimates.jsonl")
    traces.save_estimates(path, estimates)
    print(f"wrote {len(estimates)} estimates -> {path}")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    session = _require_config(args)
    estimates = traces.load_estimates(args.estimates)
    t, q, _ = traces.load_truth_arrays(args.truth)
    est_t = np.array([e.t for e in estimates])
    rows = np.stack([q[int(np.argmin(np.abs(t - et)))] for et in est_t]) if len(estimates) else q[:0]
    report = evaluate(estimates, rows)
    out = _out_dir(args, session)
    path = os.path.join(out, "deviation.json")
    with open(path, "w") as fh:
        json.dump(report.to_dict(), fh, sort_keys=True, indent=1)
    print(
        "median deviation "
        f"{report.overall['median']:.2f} deg (q75 {report.overall['q75']:.2f}) -> {path}"
    )
    return EXIT_OK


def _cmd_run_experiment(args) -> int:
    session = _require_config(args)
    out = _out_dir(args, session)
    comparison = run_experiment(session, out_dir=out, seed=args.seed)
    print(f"wrote {len(comparison['rows'])} runs -> {out}/comparison.json")
    return EXIT_OK


def _cmd_rula(args) -> int:
    session = _require_config(args)
    estimates = traces.load_estimates(args.estimates)
    ctx = RulaContext()
    scores = [rula(e.q, ctx) for e in estimates]
    worst, band = max_rula(estimates, ctx)
    out = _out_dir(args, session)
    path = os.path.join(out, "rula.json")
    with open(path, "w") as fh:
        json.dump(
            {
                "max_grand": worst,
                "interpretation": band.value,
                "per_step": [
                    {"t": float(e.t), "grand": s.grand, "interpretation": s.interpretation.value}
                    for e, s in zip(estimates, scores)
                ],
            },
            fh,
            sort_keys=True,
            indent=1,
        )
    print(f"max RULA {worst} ({band.value}) -> {path}")
    return EXIT_OK


_COMMANDS = {
    "simulate": _cmd_simulate,
    "calibrate-camera": _cmd_calibrate_camera,
    "fit-lengths": _cmd_fit_lengths,
    "estimate": _cmd_estimate,
    "evaluate": _cmd_evaluate,
    "run-experiment": _cmd_run_experiment,
    "rula": _cmd_rula,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except _NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TelepostureError as exc:  # anything else package-specific is a data problem
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
