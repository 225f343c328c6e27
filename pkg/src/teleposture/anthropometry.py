"""Segment-length estimation from calibration motions with known joint angles.

For fixed joint angles the chain's point positions are affine in the five
segment lengths: each segment contributes (cumulative rotation @ segment
direction) * length. The stylus-position fit is therefore a direct linear
least-squares solve; the keypoint fit stays nonlinear only because of the
perspective division and uses damped Gauss-Newton with analytic Jacobians.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import DEGENERACY_EPS, ProjectionMatrix
from .errors import DegenerateProjection, NonPositiveLength, RankDeficient
from .kinematics import (
    LANDMARK_KEYPOINT_IDS,
    SEGMENT_DIRECTIONS,
    KinematicModel,
    SegmentLengths,
    chain_state,
)
from .observation import CONFIDENCE_FLOOR, KeypointObservation, RobotObservation
from .optim import levenberg_marquardt

MIN_SAMPLES = 20
_RANK_TOL = 1e-8

# Landmark row -> number of leading segments its position depends on
# (neck: torso; shoulder: +shoulder; elbow: +upper arm; wrist: +lower arm;
# mid-hip: none). Same row order as LANDMARK_KEYPOINT_IDS.
_LANDMARK_SEGMENT_COUNT = (1, 2, 3, 4, 0)


@dataclass(frozen=True)
class CalibrationSample:
    """One calibration record: known joint angles plus sensor readings."""

    q: np.ndarray
    robot: RobotObservation | None = None
    keypoints: KeypointObservation | None = None


@dataclass(frozen=True)
class LengthFitResult:
    lengths: SegmentLengths
    residual_rms: float
    cost_history: list


def _length_columns(model: KinematicModel, q_all: np.ndarray) -> np.ndarray:
    """(T, 3, 5) matrices mapping segment lengths to chain-point offsets."""
    cs = chain_state(model, q_all)
    cols = [
        cs.R_torso @ SEGMENT_DIRECTIONS[0],
        cs.R_torso @ SEGMENT_DIRECTIONS[1],
        cs.R_upper @ SEGMENT_DIRECTIONS[2],
        cs.R_fore @ SEGMENT_DIRECTIONS[3],
        cs.R_hand @ SEGMENT_DIRECTIONS[4],
    ]
    return np.stack(cols, axis=-1), cs


def _require_samples(samples, attr):
    kept = [s for s in samples if getattr(s, attr) is not None]
    if len(kept) < MIN_SAMPLES:
        raise ValueError(
            f"need at least {MIN_SAMPLES} calibration samples with {attr} data, got {len(kept)}"
        )
    return kept


def fit_lengths_robot(samples, model: KinematicModel) -> LengthFitResult:
    """Lengths from stylus positions; direct linear least squares.

    The stylus orientation does not depend on the lengths, so only the
    position residuals enter the objective.
    """
    samples = _require_samples(samples, "robot")
    q_all = np.stack([np.asarray(s.q, dtype=float) for s in samples])
    A_blocks, cs = _length_columns(model, q_all)

    # stylus offset beyond the grasp point is length-independent
    grip = cs.R_hand @ model.hand_to_stylus.position
    targets = np.stack([s.robot.position for s in samples])
    b = (targets - model.base_pose.position - grip).reshape(-1)
    A = A_blocks.reshape(-1, 5)

    sv = np.linalg.svd(A, compute_uv=False)
    if sv[-1] < _RANK_TOL * sv[0]:
        raise RankDeficient("calibration motion does not excite all segment lengths")
    psi, *_ = np.linalg.lstsq(A, b, rcond=None)
    if np.any(psi <= 0.0):
        raise NonPositiveLength(f"fit produced non-positive lengths: {psi}")

    resid = A @ psi - b
    rms = float(np.sqrt(np.mean(np.sum(resid.reshape(-1, 3) ** 2, axis=1))))
    cost = 0.5 * float(resid @ resid)
    return LengthFitResult(SegmentLengths.from_array(psi), rms, [cost])


def fit_lengths_keypoints(
    samples,
    model: KinematicModel,
    projection: ProjectionMatrix,
    x0: np.ndarray | None = None,
) -> LengthFitResult:
    """Lengths from projected landmark detections; damped Gauss-Newton.

    Only segments that move an observed landmark are identifiable from
    pixels. The tracked landmarks stop at the wrist, so the hand length (and
    any other unexcited segment) is returned unchanged from the start value
    instead of entering the solve as a null direction.
    """
    samples = _require_samples(samples, "keypoints")
    q_all = np.stack([np.asarray(s.q, dtype=float) for s in samples])
    C_all, _ = _length_columns(model, q_all)  # (T, 3, 5)

    P = projection.matrix
    base = model.base_pose.position

    # per present detection: (sample idx, landmark row, observed pixel)
    rows = []
    for t, s in enumerate(samples):
        for kp_id, det in sorted(s.keypoints.keypoints.items()):
            if det.confidence < CONFIDENCE_FLOOR or kp_id not in LANDMARK_KEYPOINT_IDS:
                continue
            rows.append((t, LANDMARK_KEYPOINT_IDS.index(kp_id), det.u, det.v))
    if not rows:
        raise ValueError("no usable keypoint detections in the calibration trace")
    t_idx = np.array([r[0] for r in rows])
    m_idx = np.array([r[1] for r in rows])
    uv_obs = np.array([[r[2], r[3]] for r in rows])

    # length->position maps per residual row, sub-chain columns only
    C = C_all[t_idx].copy()
    for i, m in enumerate(m_idx):
        C[i, :, _LANDMARK_SEGMENT_COUNT[m]:] = 0.0

    x0 = np.asarray(
        x0 if x0 is not None else [0.45, 0.2, 0.3, 0.25, 0.1], dtype=float
    )
    free = np.flatnonzero(np.any(C != 0.0, axis=(0, 1)))
    if free.size == 0:
        raise RankDeficient("observed detections move no segment")

    def embed(xf):
        psi = x0.copy()
        psi[free] = xf
        return psi

    def depths(psi):
        X = base + C @ psi
        h = X @ P[:, :3].T + P[:, 3]
        w = h[:, 2]
        # a landmark at or behind the principal plane cannot have produced
        # a detection; such a candidate is outside the model's domain
        if np.any(w < DEGENERACY_EPS):
            raise DegenerateProjection("landmark not in front of the camera")
        return h, w

    def residual(xf):
        h, w = depths(embed(xf))
        uv = h[:, :2] / w[:, None]
        return (uv - uv_obs).reshape(-1)

    def jacobian(xf):
        h, w = depths(embed(xf))
        uv = h[:, :2] / w[:, None]
        du_dX = (P[0, :3] - uv[:, 0:1] * P[2, :3]) / w[:, None]
        dv_dX = (P[1, :3] - uv[:, 1:2] * P[2, :3]) / w[:, None]
        J = np.empty((len(rows) * 2, free.size))
        J[0::2] = np.einsum("ij,ijk->ik", du_dX, C[:, :, free])
        J[1::2] = np.einsum("ij,ijk->ik", dv_dX, C[:, :, free])
        return J

    sv = np.linalg.svd(jacobian(x0[free]), compute_uv=False)
    if sv[-1] < _RANK_TOL * sv[0]:
        raise RankDeficient("calibration detections do not excite all segment lengths")

    res = levenberg_marquardt(residual, x0[free], jac_fn=jacobian, max_iter=100)
    psi = embed(res.x)
    if np.any(psi <= 0.0):
        raise NonPositiveLength(f"fit produced non-positive lengths: {psi}")
    rms = float(np.sqrt(np.mean(np.sum(residual(res.x).reshape(-1, 2) ** 2, axis=1))))
    return LengthFitResult(SegmentLengths.from_array(psi), rms, res.cost_history)
