"""Observation types and log-domain measurement likelihoods.

Two sensor channels weight the particles:

* stylus channel: the interacting robot reports the stylus pose and twist;
  the residual is 12-dimensional (position, geodesic orientation rotation
  vector, linear velocity, angular velocity) with a diagonal Gaussian.
* keypoint channel: a single calibrated camera reports 2D landmark
  detections; each present keypoint contributes an isotropic 2D Gaussian on
  the pixel residual. Missing keypoints are marginalized out (no term).

All likelihoods are evaluated in the log domain, normalization constants
included, so the fused log-likelihood is exactly the sum of the two channels.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .camera import DEGENERACY_EPS, ProjectionMatrix, project_with_depth
from .kinematics import (
    LANDMARK_KEYPOINT_IDS,
    JointState,
    KinematicModel,
    chain_state,
    landmark_positions,
    stylus_twist,
)
from .rotations import matrix_to_quat, rotation_between

# Detections below this confidence are treated as absent.
CONFIDENCE_FLOOR = 0.05

_LOG_2PI = float(np.log(2.0 * np.pi))

# Paper-default sensor covariance diagonals, interpreted as variances; the
# config stores standard deviations, hence the square roots in default().
_DEFAULT_STYLUS_VARIANCES = 0.01 * np.array(
    [0.01, 0.01, 0.01, 0.01, 0.01, 0.05, 0.1, 0.1, 0.1, 10.0, 10.0, 10.0]
)
_DEFAULT_PIXEL_VARIANCES = 0.01 * np.array([3.0, 3.0, 3.0, 3.0, 3.0])
_DEFAULT_ACCEL_VARIANCES_DEG = np.array(
    [2.0, 2.0, 2.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0, 5.0]
)


@dataclass(frozen=True)
class KeypointDetection:
    u: float
    v: float
    confidence: float = 1.0


@dataclass(frozen=True)
class RobotObservation:
    """Stylus pose and twist in the world frame at time t."""

    t: float
    position: np.ndarray
    orientation: np.ndarray  # unit quaternion (w, x, y, z)
    linear_vel: np.ndarray
    angular_vel: np.ndarray

    def __post_init__(self):
        for name in ("position", "linear_vel", "angular_vel"):
            a = np.asarray(getattr(self, name), dtype=float)
            if a.shape != (3,) or not np.all(np.isfinite(a)):
                raise ValueError(f"{name} must be a finite 3-vector")
            object.__setattr__(self, name, a)
        quat = np.asarray(self.orientation, dtype=float)
        if quat.shape != (4,) or abs(np.linalg.norm(quat) - 1.0) > 1e-9:
            raise ValueError("orientation must be a unit quaternion")
        object.__setattr__(self, "orientation", quat)


@dataclass(frozen=True)
class KeypointObservation:
    """Detected 2D keypoints at time t, keyed by keypoint id."""

    t: float
    keypoints: dict = field(default_factory=dict)

    def present_ids(self) -> list:
        return [
            k
            for k, d in sorted(self.keypoints.items())
            if d.confidence >= CONFIDENCE_FLOOR
        ]


@dataclass(frozen=True)
class NoiseConfig:
    """Standard deviations for both sensor channels and the process noise.

    stylus_sigma: 12 entries (position m, orientation rad, linear m/s,
    angular rad/s). pixel_sigma: 5 entries, px, one per landmark in
    LANDMARK_KEYPOINT_IDS order. accel_sigma_degps: 10 entries, deg/s,
    converted to radians internally.
    """

    stylus_sigma: np.ndarray
    pixel_sigma: np.ndarray
    accel_sigma_degps: np.ndarray

    def __post_init__(self):
        for name, n in (("stylus_sigma", 12), ("pixel_sigma", 5), ("accel_sigma_degps", 10)):
            a = np.asarray(getattr(self, name), dtype=float)
            if a.shape != (n,):
                raise ValueError(f"{name} must have {n} entries")
            if not np.all(a > 0.0):
                raise ValueError(f"{name} entries must be positive")
            object.__setattr__(self, name, a)

    @classmethod
    def default(cls) -> "NoiseConfig":
        return cls(
            stylus_sigma=np.sqrt(_DEFAULT_STYLUS_VARIANCES),
            pixel_sigma=np.sqrt(_DEFAULT_PIXEL_VARIANCES),
            accel_sigma_degps=np.sqrt(_DEFAULT_ACCEL_VARIANCES_DEG),
        )

    @property
    def accel_sigma_radps(self) -> np.ndarray:
        return np.deg2rad(self.accel_sigma_degps)


def stylus_residual(
    model: KinematicModel, state: JointState, obs: RobotObservation
) -> np.ndarray:
    """12-vector [position, rotation-vector, linear vel, angular vel] residual."""
    cs = chain_state(model, state.q)
    lin, ang = stylus_twist(cs, state.qdot)
    q_fk = matrix_to_quat(cs.R_stylus)
    return np.concatenate(
        [
            obs.position - cs.p_stylus,
            rotation_between(q_fk, obs.orientation),
            obs.linear_vel - lin,
            obs.angular_vel - ang,
        ]
    )


def _diag_gaussian_loglik(residuals: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    z = residuals / sigma
    const = -0.5 * residuals.shape[-1] * _LOG_2PI - np.sum(np.log(sigma))
    return const - 0.5 * np.sum(z * z, axis=-1)


def loglik_robot_arrays(
    model: KinematicModel,
    q: np.ndarray,
    qdot: np.ndarray,
    obs: RobotObservation,
    sigma: np.ndarray,
) -> np.ndarray:
    """Stylus-channel log-likelihood; q, qdot may carry leading batch dims."""
    cs = chain_state(model, q)
    lin, ang = stylus_twist(cs, qdot)
    q_fk = matrix_to_quat(cs.R_stylus)
    res = np.concatenate(
        [
            obs.position - cs.p_stylus,
            rotation_between(q_fk, np.broadcast_to(obs.orientation, q_fk.shape)),
            obs.linear_vel - lin,
            obs.angular_vel - ang,
        ],
        axis=-1,
    )
    return _diag_gaussian_loglik(res, np.asarray(sigma, dtype=float))


def loglik_keypoints_arrays(
    model: KinematicModel,
    projection: ProjectionMatrix,
    q: np.ndarray,
    obs: KeypointObservation,
    pixel_sigma: np.ndarray,
) -> np.ndarray:
    """Keypoint-channel log-likelihood over present detections only."""
    q = np.asarray(q, dtype=float)
    out = np.zeros(q.shape[:-1])
    present = obs.present_ids()
    if not present:
        return out
    landmarks = landmark_positions(model, q)  # (..., 5, 3)
    uv, w = project_with_depth(projection, landmarks)
    pixel_sigma = np.asarray(pixel_sigma, dtype=float)
    for kp_id in present:
        if kp_id not in LANDMARK_KEYPOINT_IDS:
            continue  # untracked detection, carries no information here
        idx = LANDMARK_KEYPOINT_IDS.index(kp_id)
        det = obs.keypoints[kp_id]
        s = pixel_sigma[idx]
        du = uv[..., idx, 0] - det.u
        dv = uv[..., idx, 1] - det.v
        term = -np.log(2.0 * np.pi * s * s) - 0.5 * (du * du + dv * dv) / (s * s)
        # a landmark on the principal plane cannot be projected: veto the state
        out = out + np.where(np.abs(w[..., idx]) < DEGENERACY_EPS, -np.inf, term)
    return out


def log_likelihood_robot(
    model: KinematicModel,
    state: JointState,
    obs: RobotObservation,
    sigma: np.ndarray,
) -> float:
    return float(loglik_robot_arrays(model, state.q, state.qdot, obs, sigma))


def log_likelihood_keypoints(
    model: KinematicModel,
    projection: ProjectionMatrix,
    state: JointState,
    obs: KeypointObservation,
    pixel_sigma: np.ndarray,
) -> float:
    return float(
        loglik_keypoints_arrays(model, projection, state.q, obs, pixel_sigma)
    )


def log_likelihood_fused(
    model: KinematicModel,
    projection: ProjectionMatrix,
    state: JointState,
    robot_obs: RobotObservation,
    kp_obs: KeypointObservation,
    noise: NoiseConfig,
) -> float:
    """Exact sum of the two channels (block-diagonal joint covariance)."""
    return log_likelihood_robot(
        model, state, robot_obs, noise.stylus_sigma
    ) + log_likelihood_keypoints(model, projection, state, kp_obs, noise.pixel_sigma)
