"""YAML session configuration.

One file describes a whole session: the kinematic model, the camera, filter
settings, and (optionally) a synthetic task, an occlusion stage, and the
experiment grid. Angles are degrees in the file and radians in memory;
lengths are meters; key names carry their unit suffix. Unknown keys are
rejected so unit mistakes cannot pass silently.

The environment variable TELEPOSTURE_CONFIG supplies a default path for the
CLI's --config flag.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import yaml

from .camera import (
    CameraExtrinsics,
    CameraIntrinsics,
    CameraModel,
    calibrate_extrinsics,
)
from .errors import ConfigError
from .kinematics import (
    JointLimits,
    KinematicModel,
    N_JOINTS,
    Pose,
    SEGMENT_NAMES,
    SegmentLengths,
)
from .observation import NoiseConfig
from .particle_filter import MODES, FilterConfig
from .rotations import quat_normalize
from .sim import OcclusionSpec, TaskSpec, default_camera

ENV_CONFIG = "TELEPOSTURE_CONFIG"


@dataclass(frozen=True)
class ExperimentSpec:
    repetitions: int = 1
    modes: tuple = MODES
    with_occlusion: bool = False
    # Ergonomic (RULA) trial scoring starts after this many seconds, so the
    # filter's convergence window after its uniform initialization does not
    # dominate the worst-posture statistic. Deviation metrics are unaffected.
    rula_warmup_s: float = 10.0

    def __post_init__(self):
        if self.repetitions < 0:
            raise ConfigError("repetitions must be >= 0")
        for m in self.modes:
            if m not in MODES:
                raise ConfigError(f"unknown experiment mode {m!r}")
        if self.rula_warmup_s < 0:
            raise ConfigError("rula_warmup_s must be >= 0")


@dataclass
class SessionConfig:
    model: KinematicModel = field(default_factory=KinematicModel)
    camera: CameraModel = field(default_factory=default_camera)
    filter: FilterConfig = field(default_factory=FilterConfig)
    task: TaskSpec = field(default_factory=TaskSpec)
    occlusion: OcclusionSpec | None = None
    experiment: ExperimentSpec = field(default_factory=ExperimentSpec)
    output_dir: str = "out"


def _check_keys(block: dict, allowed: set, where: str) -> None:
    unknown = set(block) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")


def _vec(block, key, n, where):
    if key not in block:
        raise ConfigError(f"{where}.{key} is required")
    try:
        v = np.asarray(block[key], dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}.{key} must be a numeric list") from exc
    if v.shape != (n,):
        raise ConfigError(f"{where}.{key} must have {n} entries")
    return v


def _pose_from(block: dict, where: str) -> Pose:
    _check_keys(block, {"position_m", "orientation_wxyz"}, where)
    pos = _vec(block, "position_m", 3, where) if "position_m" in block else np.zeros(3)
    if "orientation_wxyz" in block:
        quat = quat_normalize(_vec(block, "orientation_wxyz", 4, where))
    else:
        quat = np.array([1.0, 0.0, 0.0, 0.0])
    return Pose(pos, quat)


def _pose_to(pose: Pose) -> dict:
    return {
        "position_m": [float(x) for x in pose.position],
        "orientation_wxyz": [float(x) for x in pose.orientation],
    }


def _model_from(block: dict) -> KinematicModel:
    _check_keys(
        block,
        {"segment_lengths_m", "base_pose", "hand_to_stylus", "joint_limits_deg"},
        "model",
    )
    lengths = SegmentLengths()
    if "segment_lengths_m" in block:
        lb = block["segment_lengths_m"]
        _check_keys(lb, set(SEGMENT_NAMES), "model.segment_lengths_m")
        try:
            lengths = SegmentLengths(**{k: float(v) for k, v in lb.items()})
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    base = _pose_from(block.get("base_pose", {}), "model.base_pose")
    h2s = _pose_from(block.get("hand_to_stylus", {}), "model.hand_to_stylus")
    limits = JointLimits.default()
    if "joint_limits_deg" in block:
        jb = block["joint_limits_deg"]
        _check_keys(jb, {"lower", "upper"}, "model.joint_limits_deg")
        try:
            limits = JointLimits(
                np.deg2rad(_vec(jb, "lower", N_JOINTS, "model.joint_limits_deg")),
                np.deg2rad(_vec(jb, "upper", N_JOINTS, "model.joint_limits_deg")),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    return KinematicModel(lengths=lengths, base_pose=base, hand_to_stylus=h2s, joint_limits=limits)


def _model_to(m: KinematicModel) -> dict:
    return {
        "segment_lengths_m": {k: float(getattr(m.lengths, k)) for k in SEGMENT_NAMES},
        "base_pose": _pose_to(m.base_pose),
        "hand_to_stylus": _pose_to(m.hand_to_stylus),
        "joint_limits_deg": {
            "lower": [float(x) for x in np.rad2deg(m.joint_limits.lower)],
            "upper": [float(x) for x in np.rad2deg(m.joint_limits.upper)],
        },
    }


def _camera_from(block: dict) -> CameraModel:
    _check_keys(block, {"intrinsics", "extrinsics", "correspondences"}, "camera")
    if "intrinsics" not in block:
        raise ConfigError("camera block needs intrinsics")
    ib = block["intrinsics"]
    _check_keys(
        ib, {"fx_px", "fy_px", "cx_px", "cy_px", "width_px", "height_px"}, "camera.intrinsics"
    )
    try:
        intr = CameraIntrinsics(
            fx=float(ib["fx_px"]),
            fy=float(ib["fy_px"]),
            cx=float(ib["cx_px"]),
            cy=float(ib["cy_px"]),
            width=int(ib.get("width_px", 640)),
            height=int(ib.get("height_px", 480)),
        )
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad camera intrinsics: {exc}") from exc

    has_ext = "extrinsics" in block
    has_corr = "correspondences" in block
    if has_ext == has_corr:
        raise ConfigError("camera block needs exactly one of extrinsics or correspondences")
    if has_ext:
        eb = block["extrinsics"]
        _check_keys(eb, {"rotation_wxyz", "translation_m"}, "camera.extrinsics")
        try:
            extr = CameraExtrinsics(
                quat_normalize(_vec(eb, "rotation_wxyz", 4, "camera.extrinsics")),
                _vec(eb, "translation_m", 3, "camera.extrinsics"),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    else:
        pts, pixels = [], []
        for i, c in enumerate(block["correspondences"]):
            _check_keys(c, {"point_m", "pixel_px"}, f"camera.correspondences[{i}]")
            pts.append(_vec(c, "point_m", 3, f"camera.correspondences[{i}]"))
            pixels.append(_vec(c, "pixel_px", 2, f"camera.correspondences[{i}]"))
        extr = calibrate_extrinsics(intr, np.array(pts), np.array(pixels)).extrinsics
    return CameraModel(intr, extr)


def _camera_to(c: CameraModel) -> dict:
    return {
        "intrinsics": {
            "fx_px": float(c.intrinsics.fx),
            "fy_px": float(c.intrinsics.fy),
            "cx_px": float(c.intrinsics.cx),
            "cy_px": float(c.intrinsics.cy),
            "width_px": int(c.intrinsics.width),
            "height_px": int(c.intrinsics.height),
        },
        "extrinsics": {
            "rotation_wxyz": [float(x) for x in c.extrinsics.rotation],
            "translation_m": [float(x) for x in c.extrinsics.translation],
        },
    }


def _noise_from(block: dict) -> NoiseConfig:
    _check_keys(
        block,
        {"stylus_sigma", "pixel_sigma_px", "accel_sigma_degps"},
        "filter.noise",
    )
    default = NoiseConfig.default()
    stylus = default.stylus_sigma
    if "stylus_sigma" in block:
        sb = block["stylus_sigma"]
        _check_keys(
            sb,
            {"position_m", "orientation_rad", "linear_vel_mps", "angular_vel_radps"},
            "filter.noise.stylus_sigma",
        )
        stylus = np.concatenate(
            [
                _vec(sb, "position_m", 3, "stylus_sigma"),
                _vec(sb, "orientation_rad", 3, "stylus_sigma"),
                _vec(sb, "linear_vel_mps", 3, "stylus_sigma"),
                _vec(sb, "angular_vel_radps", 3, "stylus_sigma"),
            ]
        )
    pixel = (
        _vec(block, "pixel_sigma_px", 5, "filter.noise")
        if "pixel_sigma_px" in block
        else default.pixel_sigma
    )
    accel = (
        _vec(block, "accel_sigma_degps", 10, "filter.noise")
        if "accel_sigma_degps" in block
        else default.accel_sigma_degps
    )
    try:
        return NoiseConfig(stylus_sigma=stylus, pixel_sigma=pixel, accel_sigma_degps=accel)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _noise_to(n: NoiseConfig) -> dict:
    s = n.stylus_sigma
    return {
        "stylus_sigma": {
            "position_m": [float(x) for x in s[0:3]],
            "orientation_rad": [float(x) for x in s[3:6]],
            "linear_vel_mps": [float(x) for x in s[6:9]],
            "angular_vel_radps": [float(x) for x in s[9:12]],
        },
        "pixel_sigma_px": [float(x) for x in n.pixel_sigma],
        "accel_sigma_degps": [float(x) for x in n.accel_sigma_degps],
    }


def _filter_from(block: dict) -> FilterConfig:
    _check_keys(
        block,
        {"n_particles", "mode", "dt_s", "seed", "resample_threshold", "noise"},
        "filter",
    )
    try:
        return FilterConfig(
            n_particles=int(block.get("n_particles", 500)),
            mode=str(block.get("mode", "fused")),
            dt=float(block.get("dt_s", 0.1)),
            seed=int(block.get("seed", 0)),
            resample_threshold=float(block.get("resample_threshold", 0.5)),
            noise=_noise_from(block.get("noise", {})),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _filter_to(f: FilterConfig) -> dict:
    return {
        "n_particles": int(f.n_particles),
        "mode": f.mode,
        "dt_s": float(f.dt),
        "seed": int(f.seed),
        "resample_threshold": float(f.resample_threshold),
        "noise": _noise_to(f.noise),
    }


def _task_from(block: dict) -> TaskSpec:
    _check_keys(
        block, {"kind", "duration_s", "rate_hz", "amplitude_scale", "seed"}, "task"
    )
    try:
        return TaskSpec(
            kind=str(block.get("kind", "circle")),
            duration_s=float(block.get("duration_s", 60.0)),
            rate_hz=float(block.get("rate_hz", 10.0)),
            amplitude_scale=float(block.get("amplitude_scale", 1.0)),
            seed=int(block.get("seed", 0)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _task_to(t: TaskSpec) -> dict:
    return {
        "kind": t.kind,
        "duration_s": float(t.duration_s),
        "rate_hz": float(t.rate_hz),
        "amplitude_scale": float(t.amplitude_scale),
        "seed": int(t.seed),
    }


def _occlusion_from(block: dict) -> OcclusionSpec:
    _check_keys(
        block,
        {"mode", "keypoint_ids", "windows_s", "displacement_px", "seed"},
        "occlusion",
    )
    try:
        return OcclusionSpec(
            mode=str(block.get("mode", "dropout")),
            keypoint_ids=tuple(block.get("keypoint_ids", (3, 4))),
            windows_s=tuple(tuple(w) for w in block.get("windows_s", ((10.0, 28.0),))),
            displacement_px=float(block.get("displacement_px", 50.0)),
            seed=int(block.get("seed", 0)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _occlusion_to(o: OcclusionSpec) -> dict:
    return {
        "mode": o.mode,
        "keypoint_ids": [int(k) for k in o.keypoint_ids],
        "windows_s": [[float(a), float(b)] for a, b in o.windows_s],
        "displacement_px": float(o.displacement_px),
        "seed": int(o.seed),
    }


def _experiment_from(block: dict) -> ExperimentSpec:
    _check_keys(
        block, {"repetitions", "modes", "with_occlusion", "rula_warmup_s"}, "experiment"
    )
    return ExperimentSpec(
        repetitions=int(block.get("repetitions", 1)),
        modes=tuple(block.get("modes", MODES)),
        with_occlusion=bool(block.get("with_occlusion", False)),
        rula_warmup_s=float(block.get("rula_warmup_s", 10.0)),
    )


def _experiment_to(e: ExperimentSpec) -> dict:
    return {
        "repetitions": int(e.repetitions),
        "modes": list(e.modes),
        "with_occlusion": bool(e.with_occlusion),
        "rula_warmup_s": float(e.rula_warmup_s),
    }


_TOP_KEYS = {"model", "camera", "filter", "task", "occlusion", "experiment", "output_dir"}


def session_from_dict(data: dict) -> SessionConfig:
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    _check_keys(data, _TOP_KEYS, "config")
    return SessionConfig(
        model=_model_from(data.get("model", {})),
        camera=_camera_from(data["camera"]) if "camera" in data else default_camera(),
        filter=_filter_from(data.get("filter", {})),
        task=_task_from(data.get("task", {})),
        occlusion=_occlusion_from(data["occlusion"]) if data.get("occlusion") else None,
        experiment=_experiment_from(data.get("experiment", {})),
        output_dir=str(data.get("output_dir", "out")),
    )


def session_to_dict(cfg: SessionConfig) -> dict:
    out = {
        "model": _model_to(cfg.model),
        "camera": _camera_to(cfg.camera),
        "filter": _filter_to(cfg.filter),
        "task": _task_to(cfg.task),
        "experiment": _experiment_to(cfg.experiment),
        "output_dir": cfg.output_dir,
    }
    if cfg.occlusion is not None:
        out["occlusion"] = _occlusion_to(cfg.occlusion)
    return out


def load_session(path) -> SessionConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file is not valid YAML: {exc}") from exc
    return session_from_dict(data or {})


def save_session(cfg: SessionConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(session_to_dict(cfg), fh, sort_keys=True)


def default_config_path() -> str | None:
    return os.environ.get(ENV_CONFIG)
