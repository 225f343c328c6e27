"""Seated upper-body kinematic chain: 10 DOF from mid-hip to a held stylus.

Frame and joint conventions (canonical table, referenced by all tests and docs)
===============================================================================

World frame: right-handed, Z up, X the direction the seated person faces,
Y to the person's left. The chain base sits at the mid-hip and is fixed
(``base_pose``); the chair does not move.

Zero posture: torso vertical (+Z), right arm hanging straight down (-Z) from a
shoulder offset to the right (-Y), palm facing the body. Segments, in order:

====  ==============  ===========================  =======================
idx   segment         from -> to                   direction at zero
====  ==============  ===========================  =======================
0     torso           mid-hip -> neck              +Z
1     shoulder        neck -> right shoulder       -Y
2     upper_arm       shoulder -> elbow            -Z
3     lower_arm       elbow -> wrist               -Z
4     hand            wrist -> grasp point         -Z
====  ==============  ===========================  =======================

Joints, in order (axis is fixed in the parent frame; positive sense by the
right-hand rule):

====  ========================  ==========  =============================
j     joint                     axis        positive motion at zero
====  ========================  ==========  =============================
0     torso flexion             +Y          lean forward (+X)
1     torso lateral bend        +X          lean left (+Y)
2     torso axial rotation      +Z          turn left
3     shoulder abduction        -X          raise arm sideways (-Y)
4     shoulder flexion          -Y          swing arm forward (+X)
5     shoulder internal rot.    -Z          rotate about the upper arm
6     elbow flexion             -Y          bring forearm forward (+X)
7     wrist flexion             +X          bend palm toward body (+Y)
8     wrist deviation           -Y          bend hand forward (+X)
9     forearm rotation          -Z          rotate about the hand axis
====  ========================  ==========  =============================

Anatomical landmarks and the 2D-pose keypoint ids they map to:

====  ==============  =================  ==========================
id    landmark        chain point        depends on joints
====  ==============  =================  ==========================
1     neck            top of torso       0-2
2     right shoulder  shoulder point     0-2
3     right elbow     elbow point        0-5
4     right wrist     wrist point        0-6
8     mid-hip         base               (none)
====  ==============  =================  ==========================

All angle state is radians internally; config files use degrees.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rotations import (
    IDENTITY_QUAT,
    axis_angle_matrix,
    matrix_to_quat,
    quat_rotate,
    quat_to_matrix,
)

N_JOINTS = 10

JOINT_NAMES = (
    "torso_flexion",
    "torso_lateral",
    "torso_rotation",
    "shoulder_abduction",
    "shoulder_flexion",
    "shoulder_rotation",
    "elbow_flexion",
    "wrist_flexion",
    "wrist_deviation",
    "forearm_rotation",
)

JOINT_AXES = np.array(
    [
        [0.0, 1.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0],
        [-1.0, 0.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, -1.0],
        [0.0, -1.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, -1.0],
    ]
)

SEGMENT_NAMES = ("torso", "shoulder", "upper_arm", "lower_arm", "hand")

# Unit offset of each segment in its parent frame at zero posture.
SEGMENT_DIRECTIONS = np.array(
    [
        [0.0, 0.0, 1.0],   # torso
        [0.0, -1.0, 0.0],  # shoulder
        [0.0, 0.0, -1.0],  # upper_arm
        [0.0, 0.0, -1.0],  # lower_arm
        [0.0, 0.0, -1.0],  # hand
    ]
)

# Keypoint ids of the tracked landmarks, in the row order used by
# landmark_positions(): neck, right shoulder, right elbow, right wrist, mid-hip.
LANDMARK_KEYPOINT_IDS = (1, 2, 3, 4, 8)
LANDMARK_NAMES = ("neck", "r_shoulder", "r_elbow", "r_wrist", "mid_hip")

# Default range of motion per joint, degrees (flexion-positive conventions above).
DEFAULT_JOINT_LIMITS_DEG = (
    (-30.0, 75.0),   # torso flexion
    (-35.0, 35.0),   # torso lateral bend
    (-45.0, 45.0),   # torso axial rotation
    (-30.0, 150.0),  # shoulder abduction
    (-60.0, 170.0),  # shoulder flexion
    (-90.0, 90.0),   # shoulder internal rotation
    (0.0, 145.0),    # elbow flexion
    (-70.0, 75.0),   # wrist flexion
    (-20.0, 35.0),   # wrist deviation
    (-85.0, 90.0),   # forearm rotation
)


def _as_vec(x, n, name):
    a = np.asarray(x, dtype=float)
    if a.shape != (n,):
        raise ValueError(f"{name} must have shape ({n},), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} must be finite")
    return a


@dataclass(frozen=True)
class JointState:
    """Joint angles and velocities of the 10-DOF chain (radians, rad/s)."""

    q: np.ndarray
    qdot: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", _as_vec(self.q, N_JOINTS, "q"))
        object.__setattr__(self, "qdot", _as_vec(self.qdot, N_JOINTS, "qdot"))

    @classmethod
    def zero(cls) -> "JointState":
        return cls(np.zeros(N_JOINTS), np.zeros(N_JOINTS))


@dataclass(frozen=True)
class Pose:
    """Rigid pose: position (m) and unit quaternion (w, x, y, z)."""

    position: np.ndarray
    orientation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", _as_vec(self.position, 3, "position"))
        quat = _as_vec(self.orientation, 4, "orientation")
        if abs(np.linalg.norm(quat) - 1.0) > 1e-9:
            raise ValueError("orientation quaternion must be unit norm")
        object.__setattr__(self, "orientation", quat)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.zeros(3), IDENTITY_QUAT.copy())

    def rotation_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.orientation)

    def transform_point(self, p: np.ndarray) -> np.ndarray:
        return self.position + quat_rotate(self.orientation, np.asarray(p, dtype=float))


@dataclass(frozen=True)
class Twist:
    """Spatial velocity at a reference point: linear (m/s) and angular (rad/s)."""

    linear: np.ndarray
    angular: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "linear", _as_vec(self.linear, 3, "linear"))
        object.__setattr__(self, "angular", _as_vec(self.angular, 3, "angular"))


@dataclass(frozen=True)
class SegmentLengths:
    """Body segment lengths in meters; see the module table for directions."""

    torso: float = 0.50
    shoulder: float = 0.20
    upper_arm: float = 0.30
    lower_arm: float = 0.25
    hand: float = 0.08

    def __post_init__(self):
        for name in SEGMENT_NAMES:
            if not getattr(self, name) > 0.0:
                raise ValueError(f"segment length {name} must be positive")

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in SEGMENT_NAMES])

    @classmethod
    def from_array(cls, a) -> "SegmentLengths":
        a = _as_vec(a, 5, "lengths")
        return cls(*a.tolist())


@dataclass(frozen=True)
class JointLimits:
    """Box limits per joint, radians. lower < upper elementwise."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lower", _as_vec(self.lower, N_JOINTS, "lower"))
        object.__setattr__(self, "upper", _as_vec(self.upper, N_JOINTS, "upper"))
        if not np.all(self.lower < self.upper):
            raise ValueError("joint limits must satisfy lower < upper")

    @classmethod
    def default(cls) -> "JointLimits":
        lims = np.deg2rad(np.array(DEFAULT_JOINT_LIMITS_DEG))
        return cls(lims[:, 0], lims[:, 1])

    def contains(self, q: np.ndarray) -> np.ndarray:
        """Elementwise-all inside test; broadcasts over leading dims of q."""
        q = np.asarray(q, dtype=float)
        return np.all((q >= self.lower) & (q <= self.upper), axis=-1)


@dataclass(frozen=True)
class KinematicModel:
    """Segment lengths, fixed base pose, stylus grasp offset, joint limits."""

    lengths: SegmentLengths = field(default_factory=SegmentLengths)
    base_pose: Pose = field(default_factory=Pose.identity)
    hand_to_stylus: Pose = field(default_factory=Pose.identity)
    joint_limits: JointLimits = field(default_factory=JointLimits.default)


@dataclass(frozen=True)
class ChainState:
    """World-frame frames and joint geometry for one (batch of) q.

    Leading batch dimensions of q are preserved on every field. Rotations are
    matrices; ``joint_axes`` and ``joint_origins`` feed the geometric Jacobian.
    """

    p_hip: np.ndarray
    p_neck: np.ndarray
    p_shoulder: np.ndarray
    p_elbow: np.ndarray
    p_wrist: np.ndarray
    p_grasp: np.ndarray
    p_stylus: np.ndarray
    R_torso: np.ndarray
    R_upper: np.ndarray
    R_fore: np.ndarray
    R_hand: np.ndarray
    R_stylus: np.ndarray
    joint_axes: np.ndarray    # (..., 10, 3) world-frame rotation axes
    joint_origins: np.ndarray  # (..., 10, 3) world-frame joint positions


def chain_state(model: KinematicModel, q: np.ndarray) -> ChainState:
    """Forward pass through the chain; q may carry leading batch dims."""
    q = np.asarray(q, dtype=float)
    if q.shape[-1] != N_JOINTS:
        raise ValueError(f"q must have {N_JOINTS} entries on the last axis")
    batch = q.shape[:-1]

    L = model.lengths
    offsets = SEGMENT_DIRECTIONS * L.as_array()[:, None]

    R_base = quat_to_matrix(model.base_pose.orientation)
    p_base = model.base_pose.position
    R = np.broadcast_to(R_base, batch + (3, 3))

    axes = np.empty(batch + (N_JOINTS, 3))
    origins = np.empty(batch + (N_JOINTS, 3))

    def advance(R, js):
        # compose the revolute joints js onto R, recording world axes
        for j in js:
            axes[..., j, :] = (R @ JOINT_AXES[j])
            R = R @ axis_angle_matrix(JOINT_AXES[j], q[..., j])
        return R

    p_hip = np.broadcast_to(p_base, batch + (3,))
    origins[..., 0:3, :] = p_hip[..., None, :]
    R_torso = advance(R, (0, 1, 2))
    p_neck = p_hip + R_torso @ offsets[0]
    p_shoulder = p_neck + R_torso @ offsets[1]

    origins[..., 3:6, :] = p_shoulder[..., None, :]
    R_upper = advance(R_torso, (3, 4, 5))
    p_elbow = p_shoulder + R_upper @ offsets[2]

    origins[..., 6, :] = p_elbow
    R_fore = advance(R_upper, (6,))
    p_wrist = p_elbow + R_fore @ offsets[3]

    origins[..., 7:10, :] = p_wrist[..., None, :]
    R_hand = advance(R_fore, (7, 8, 9))
    p_grasp = p_wrist + R_hand @ offsets[4]

    R_h2s = quat_to_matrix(model.hand_to_stylus.orientation)
    p_stylus = p_grasp + R_hand @ model.hand_to_stylus.position
    R_stylus = R_hand @ R_h2s

    return ChainState(
        p_hip=np.ascontiguousarray(p_hip),
        p_neck=p_neck,
        p_shoulder=p_shoulder,
        p_elbow=p_elbow,
        p_wrist=p_wrist,
        p_grasp=p_grasp,
        p_stylus=p_stylus,
        R_torso=np.ascontiguousarray(R_torso),
        R_upper=R_upper,
        R_fore=R_fore,
        R_hand=R_hand,
        R_stylus=R_stylus,
        joint_axes=axes,
        joint_origins=origins,
    )


def stylus_twist(cs: ChainState, qdot: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Geometric-Jacobian twist of the stylus point: (linear, angular)."""
    qdot = np.asarray(qdot, dtype=float)
    lever = cs.p_stylus[..., None, :] - cs.joint_origins
    lin = np.sum(qdot[..., None] * np.cross(cs.joint_axes, lever), axis=-2)
    ang = np.sum(qdot[..., None] * cs.joint_axes, axis=-2)
    return lin, ang


def forward_kinematics(model: KinematicModel, state: JointState) -> tuple[Pose, Twist]:
    """Stylus pose and twist for one joint state."""
    cs = chain_state(model, state.q)
    lin, ang = stylus_twist(cs, state.qdot)
    pose = Pose(cs.p_stylus, matrix_to_quat(cs.R_stylus))
    return pose, Twist(lin, ang)


def landmark_positions(model: KinematicModel, q: np.ndarray) -> np.ndarray:
    """World positions of the 5 landmarks, rows in LANDMARK_KEYPOINT_IDS order."""
    cs = chain_state(model, q)
    return np.stack([cs.p_neck, cs.p_shoulder, cs.p_elbow, cs.p_wrist, cs.p_hip], axis=-2)


def propagate(state: JointState, qddot: np.ndarray, dt: float) -> JointState:
    """Constant-velocity step: q += qdot*dt, then qdot += qddot*dt."""
    qddot = _as_vec(qddot, N_JOINTS, "qddot")
    return JointState(state.q + state.qdot * dt, state.qdot + qddot * dt)


def sample_acceleration(
    sigma: np.ndarray, rng: np.random.Generator, size: int | None = None
) -> np.ndarray:
    """Draw joint accelerations from N(0, diag(sigma^2)); sigma in rad/s units."""
    sigma = np.asarray(sigma, dtype=float)
    if size is None:
        return rng.normal(0.0, 1.0, N_JOINTS) * sigma
    return rng.normal(0.0, 1.0, (size, N_JOINTS)) * sigma


@dataclass(frozen=True)
class ValidityModel:
    """Particle validity v(q) in [0, 1].

    mode "box": indicator of the joint-limit box. mode "custom": a user
    callable q -> score, clamped to [0, 1].
    """

    mode: str = "box"
    custom_fn: object = None

    def __post_init__(self):
        if self.mode not in ("box", "custom"):
            raise ValueError("validity mode must be 'box' or 'custom'")
        if self.mode == "custom" and not callable(self.custom_fn):
            raise ValueError("custom validity requires a callable")


def validity_scores(
    vm: ValidityModel, limits: JointLimits, q: np.ndarray
) -> np.ndarray:
    """Validity per state; broadcasts over leading dims of q."""
    q = np.asarray(q, dtype=float)
    if vm.mode == "box":
        return limits.contains(q).astype(float)
    flat = q.reshape(-1, N_JOINTS)
    out = np.array([float(vm.custom_fn(row)) for row in flat])
    return np.clip(out, 0.0, 1.0).reshape(q.shape[:-1])


def check_validity(vm: ValidityModel, limits: JointLimits, q: np.ndarray) -> float:
    return float(validity_scores(vm, limits, q))
