"""Synthetic seated-teleoperation scenarios and sensor synthesis.

Tasks are generated directly in joint space as sums of low-frequency
sinusoids (or smoothed random set-point changes) around a seated working
posture with the elbow near ninety degrees; no inverse kinematics is
involved. Sensor traces are the exact forward kinematics plus Gaussian noise
shaped by a NoiseConfig, and an occlusion stage can drop or displace selected
keypoints inside time windows.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import CameraIntrinsics, CameraModel, look_at_extrinsics, project_with_depth
from .errors import LimitsViolated
from .kinematics import (
    LANDMARK_KEYPOINT_IDS,
    N_JOINTS,
    KinematicModel,
    chain_state,
    landmark_positions,
    stylus_twist,
)
from .observation import (
    KeypointDetection,
    KeypointObservation,
    NoiseConfig,
    RobotObservation,
)
from .rotations import matrix_to_quat, quat_from_rotvec, quat_multiply

TASK_KINDS = ("line_x", "line_y", "circle", "random_blocks")

# Seated working posture: slight forward lean, arm slightly raised and
# reaching forward, elbow bent so the forearm points at the work surface.
WORKING_POSTURE = np.array(
    [0.05, 0.0, 0.0, 0.12, 0.25, 0.0, 1.45, 0.0, 0.0, 0.0]
)

_RAMP_SECONDS = 12.0

# Joint-space direction combos for the arm triple (shoulder flexion,
# shoulder abduction, elbow), in rad per metre of hand travel along each
# world axis, solved from the hand-position Jacobian at WORKING_POSTURE.
# Using all three joints makes the off-axis residual vanish at the
# linearization point, which keeps each trace aligned with its named axis.
_ARM_JOINTS = (3, 4, 6)
_COMBO_X = (0.02, 3.35, -3.95)
_COMBO_Y = (-4.00, 0.05, 0.30)
_COMBO_Z = (0.48, 0.26, 2.71)

# Wrist articulation drags the stylus tip off the nominal path (the tip sits
# a hand's length past the wrist), so the arm counter-rotates to keep the tip
# where the task recipe put it. Per rad of wrist flexion / deviation, in rad
# on the arm triple above, again from the Jacobian at WORKING_POSTURE.
_WRIST_COMP_FLEX = (0.322, 0.0, 0.0)
_WRIST_COMP_DEV = (0.0, 0.0, -0.243)


@dataclass(frozen=True)
class TaskSpec:
    kind: str = "circle"
    duration_s: float = 60.0
    rate_hz: float = 10.0
    amplitude_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ValueError(f"task kind must be one of {TASK_KINDS}")
        if self.duration_s <= 0 or self.rate_hz <= 0:
            raise ValueError("duration and rate must be positive")
        if int(round(self.duration_s * self.rate_hz)) < 1:
            raise ValueError("duration times rate must yield at least two samples")
        if self.amplitude_scale <= 0:
            raise ValueError("amplitude_scale must be positive")


@dataclass(frozen=True)
class OcclusionSpec:
    """Keypoint corruption: 'dropout' removes, 'displace' shifts persistently."""

    mode: str = "dropout"
    keypoint_ids: tuple = (3, 4)
    windows_s: tuple = ((10.0, 28.0),)
    displacement_px: float = 50.0
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("dropout", "displace"):
            raise ValueError("occlusion mode must be 'dropout' or 'displace'")
        object.__setattr__(self, "keypoint_ids", tuple(int(k) for k in self.keypoint_ids))
        wins = tuple((float(a), float(b)) for a, b in self.windows_s)
        for a, b in wins:
            if a < 0.0 or b <= a:
                raise ValueError("occlusion windows must satisfy 0 <= start < end")
        object.__setattr__(self, "windows_s", wins)


@dataclass(frozen=True)
class GroundTruthTrace:
    times: np.ndarray
    q: np.ndarray      # (T, 10)
    qdot: np.ndarray   # (T, 10)
    model: KinematicModel


def default_camera() -> CameraModel:
    """Camera ahead and to the person's left; all landmarks visible."""
    intr = CameraIntrinsics(fx=300.0, fy=300.0, cx=320.0, cy=240.0, width=640, height=480)
    extr = look_at_extrinsics(
        position=(1.95, 1.36, 0.84), target=(0.15, -0.15, 0.34)
    )
    return CameraModel(intr, extr)


def _smoothstep(x: np.ndarray) -> np.ndarray:
    u = np.clip(x, 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u)


def _block_levels(t: np.ndarray, duration: float, rng: np.random.Generator) -> np.ndarray:
    """Smooth alternation between -1 and +1 at random switch times."""
    lev = np.full_like(t, -1.0)
    tk = float(rng.uniform(3.0, 6.0))
    sign = 1.0
    while tk < duration:
        lev += sign * 2.0 * _smoothstep((t - tk) / 1.5)
        sign = -sign
        tk += float(rng.uniform(4.0, 8.0))
    return lev


def generate_task(spec: TaskSpec, model: KinematicModel) -> GroundTruthTrace:
    """Joint trajectory for one task; raises LimitsViolated if out of range."""
    dt = 1.0 / spec.rate_hz
    n = int(round(spec.duration_s * spec.rate_hz)) + 1
    t = np.arange(n) * dt
    rng = np.random.default_rng(spec.seed)

    a = spec.amplitude_scale
    ramp = _smoothstep(t / _RAMP_SECONDS)
    dq = np.zeros((n, N_JOINTS))

    # small torso sway, common to all tasks
    dq[:, 0] = 0.03 * np.sin(2 * np.pi * 0.025 * t)
    dq[:, 2] = 0.02 * np.sin(2 * np.pi * 0.018 * t + 1.0)

    # slow wrist articulation, common to all tasks: flexion and deviation
    # peak together past the 15-degree mark, as when rolling the stylus
    # against the work surface
    wr = np.sin(2 * np.pi * 0.021 * t + 1.3)
    dq[:, 7] = 0.30 * a * wr
    dq[:, 8] = 0.29 * a * wr

    if spec.kind == "line_x":
        # 5 cm hand sweep along world X
        s = 0.05 * a * np.sin(2 * np.pi * 0.03 * t)
        for j, cx in zip(_ARM_JOINTS, _COMBO_X):
            dq[:, j] += cx * s
    elif spec.kind == "line_y":
        # 5 cm hand sweep along world Y
        s = 0.05 * a * np.sin(2 * np.pi * 0.03 * t)
        for j, cy in zip(_ARM_JOINTS, _COMBO_Y):
            dq[:, j] += cy * s
    elif spec.kind == "circle":
        # quadrature pair closes a 4 cm hand loop in the horizontal plane
        s = 0.04 * a * np.sin(2 * np.pi * 0.03 * t)
        c = 0.04 * a * np.cos(2 * np.pi * 0.03 * t)
        for j, cx, cy in zip(_ARM_JOINTS, _COMBO_X, _COMBO_Y):
            dq[:, j] += cx * s + cy * c
    else:  # random_blocks
        # hand alternates between two levels 6 cm apart, wrist wanders
        lev = 0.03 * a * _block_levels(t, spec.duration_s, rng)
        for j, cz in zip(_ARM_JOINTS, _COMBO_Z):
            dq[:, j] += cz * lev
        # randomized hand rotation on top of the common wrist pattern
        f9 = rng.uniform(0.02, 0.035)
        ph9 = rng.uniform(0.0, 2 * np.pi)
        dq[:, 9] = 0.25 * a * np.sin(2 * np.pi * f9 * t + ph9)

    for j, c7, c8 in zip(_ARM_JOINTS, _WRIST_COMP_FLEX, _WRIST_COMP_DEV):
        dq[:, j] += c7 * dq[:, 7] + c8 * dq[:, 8]

    q = WORKING_POSTURE + ramp[:, None] * dq

    limits = model.joint_limits
    if not np.all(limits.contains(q)):
        raise LimitsViolated("generated trajectory leaves the joint limits")

    # qdot as the exact central difference of the sampled q, one-sided at the
    # ends, so the stored pair (q, qdot) is self-consistent at the trace rate.
    qdot = np.empty_like(q)
    qdot[1:-1] = (q[2:] - q[:-2]) / (2.0 * dt)
    qdot[0] = (q[1] - q[0]) / dt
    qdot[-1] = (q[-1] - q[-2]) / dt

    return GroundTruthTrace(times=t, q=q, qdot=qdot, model=model)


def synthesize_sensors(
    gt: GroundTruthTrace,
    noise: NoiseConfig | None,
    camera: CameraModel,
    seed: int = 0,
) -> tuple[list[RobotObservation], list[KeypointObservation]]:
    """Sensor traces from ground truth: exact FK plus Gaussian noise.

    noise=None produces exact, noiseless traces. Synthesized detections carry
    confidence 1.0; detections falling outside the image are dropped.
    """
    rng = np.random.default_rng(seed)
    model = gt.model
    cs = chain_state(model, gt.q)
    lin, ang = stylus_twist(cs, gt.qdot)
    quat = matrix_to_quat(cs.R_stylus)
    landmarks = landmark_positions(model, gt.q)
    uv, w = project_with_depth(camera.projection, landmarks)

    n = len(gt.times)
    pos = cs.p_stylus.copy()
    if noise is not None:
        s = noise.stylus_sigma
        pos += rng.normal(0.0, 1.0, (n, 3)) * s[0:3]
        rot_noise = quat_from_rotvec(rng.normal(0.0, 1.0, (n, 3)) * s[3:6])
        quat = quat_multiply(quat, rot_noise)
        lin = lin + rng.normal(0.0, 1.0, (n, 3)) * s[6:9]
        ang = ang + rng.normal(0.0, 1.0, (n, 3)) * s[9:12]
        uv = uv + rng.normal(0.0, 1.0, uv.shape) * noise.pixel_sigma[None, :, None]

    robot = [
        RobotObservation(
            t=float(gt.times[i]),
            position=pos[i],
            orientation=quat[i],
            linear_vel=lin[i],
            angular_vel=ang[i],
        )
        for i in range(n)
    ]

    width, height = camera.intrinsics.width, camera.intrinsics.height
    keypoints = []
    for i in range(n):
        dets = {}
        for m, kp_id in enumerate(LANDMARK_KEYPOINT_IDS):
            u, v = uv[i, m]
            if w[i, m] <= 0.0 or not (0.0 <= u < width and 0.0 <= v < height):
                continue
            dets[kp_id] = KeypointDetection(u=float(u), v=float(v), confidence=1.0)
        keypoints.append(KeypointObservation(t=float(gt.times[i]), keypoints=dets))
    return robot, keypoints


def apply_occlusion(
    trace: list[KeypointObservation], spec: OcclusionSpec
) -> list[KeypointObservation]:
    """Corrupted copy of a keypoint trace; the input is left untouched."""
    rng = np.random.default_rng(spec.seed)
    # one persistent offset per (window, keypoint), drawn in a fixed order
    offsets = {}
    for wi, _ in enumerate(spec.windows_s):
        for kp_id in spec.keypoint_ids:
            theta = rng.uniform(0.0, 2.0 * np.pi)
            offsets[(wi, kp_id)] = spec.displacement_px * np.array(
                [np.cos(theta), np.sin(theta)]
            )

    out = []
    for obs in trace:
        win = None
        for wi, (a, b) in enumerate(spec.windows_s):
            if a <= obs.t <= b:
                win = wi
                break
        if win is None:
            out.append(obs)
            continue
        dets = dict(obs.keypoints)
        for kp_id in spec.keypoint_ids:
            if kp_id not in dets:
                continue
            if spec.mode == "dropout":
                del dets[kp_id]
            else:
                d = dets[kp_id]
                du, dv = offsets[(win, kp_id)]
                dets[kp_id] = KeypointDetection(
                    u=d.u + float(du), v=d.v + float(dv), confidence=d.confidence
                )
        out.append(KeypointObservation(t=obs.t, keypoints=dets))
    return out
