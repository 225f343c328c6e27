"""Pinhole camera: projection and extrinsic calibration from known 3D points.

Camera frame: +Z optical axis (forward), +X right, +Y down. A world point is
mapped by ``x_cam = R @ x_world + t`` and projected through the intrinsic
matrix; no lens distortion is modeled.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DegenerateConfiguration, DegenerateProjection
from .optim import levenberg_marquardt
from .rotations import matrix_to_quat, quat_from_rotvec, quat_to_matrix, rotvec_from_quat

DEGENERACY_EPS = 1e-12
MIN_CORRESPONDENCES = 6


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int = 640
    height: int = 480

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image size must be positive")

    @property
    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )


@dataclass(frozen=True)
class CameraExtrinsics:
    """World-to-camera rotation (unit quaternion, wxyz) and translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=float)
        tr = np.asarray(self.translation, dtype=float)
        if rot.shape != (4,) or abs(np.linalg.norm(rot) - 1.0) > 1e-9:
            raise ValueError("rotation must be a unit quaternion (w, x, y, z)")
        if tr.shape != (3,):
            raise ValueError("translation must be a 3-vector")
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", tr)

    @property
    def matrix(self) -> np.ndarray:
        """3x4 [R | t]."""
        return np.concatenate(
            [quat_to_matrix(self.rotation), self.translation[:, None]], axis=1
        )


@dataclass(frozen=True)
class ProjectionMatrix:
    """Composed 3x4 world-to-pixel matrix P = K [R | t]."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (3, 4):
            raise ValueError("projection matrix must be 3x4")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_parts(
        cls, intrinsics: CameraIntrinsics, extrinsics: CameraExtrinsics
    ) -> "ProjectionMatrix":
        return cls(intrinsics.matrix @ extrinsics.matrix)


@dataclass(frozen=True)
class CameraModel:
    intrinsics: CameraIntrinsics
    extrinsics: CameraExtrinsics

    @cached_property
    def projection(self) -> ProjectionMatrix:
        return ProjectionMatrix.from_parts(self.intrinsics, self.extrinsics)


def project_with_depth(P: ProjectionMatrix | np.ndarray, points: np.ndarray):
    """Project without degeneracy checks; returns (pixels, homogeneous w).

    The filter hot path uses this and masks |w| < DEGENERACY_EPS itself.
    """
    m = P.matrix if isinstance(P, ProjectionMatrix) else np.asarray(P, dtype=float)
    points = np.asarray(points, dtype=float)
    h = points @ m[:, :3].T + m[:, 3]
    w = h[..., 2]
    safe = np.where(np.abs(w) < DEGENERACY_EPS, 1.0, w)
    return h[..., :2] / safe[..., None], w


def project(P: ProjectionMatrix | np.ndarray, points: np.ndarray) -> np.ndarray:
    """Pixel coordinates of world points; raises DegenerateProjection on w ~ 0."""
    uv, w = project_with_depth(P, points)
    if np.any(np.abs(w) < DEGENERACY_EPS):
        raise DegenerateProjection("point on the camera principal plane")
    return uv


def look_at_extrinsics(
    position: np.ndarray, target: np.ndarray, up=(0.0, 0.0, 1.0)
) -> CameraExtrinsics:
    """Extrinsics for a camera at `position` whose optical axis hits `target`."""
    position = np.asarray(position, dtype=float)
    target = np.asarray(target, dtype=float)
    up = np.asarray(up, dtype=float)
    forward = target - position
    n = np.linalg.norm(forward)
    if n < 1e-12:
        raise ValueError("camera position and target coincide")
    forward = forward / n
    right = np.cross(forward, up)
    rn = np.linalg.norm(right)
    if rn < 1e-12:
        raise ValueError("up direction parallel to the viewing direction")
    right = right / rn
    down = np.cross(forward, right)
    R = np.stack([right, down, forward], axis=0)
    return CameraExtrinsics(matrix_to_quat(R), -R @ position)


def reprojection_rms(
    P: ProjectionMatrix | np.ndarray, points: np.ndarray, pixels: np.ndarray
) -> float:
    uv, _ = project_with_depth(P, points)
    return float(np.sqrt(np.mean(np.sum((uv - np.asarray(pixels, float)) ** 2, axis=-1))))


@dataclass(frozen=True)
class CalibrationResult:
    extrinsics: CameraExtrinsics
    rms_px: float
    converged: bool
    n_iter: int


def _hartley_normalization(x: np.ndarray) -> np.ndarray:
    """Similarity transform sending points to centroid 0, RMS distance sqrt(dim)."""
    x = np.asarray(x, dtype=float)
    dim = x.shape[1]
    centroid = x.mean(axis=0)
    rms = np.sqrt(np.mean(np.sum((x - centroid) ** 2, axis=1)))
    if rms < 1e-12:
        raise DegenerateConfiguration("coincident calibration points")
    s = np.sqrt(dim) / rms
    T = np.eye(dim + 1)
    T[:dim, :dim] *= s
    T[:dim, dim] = -s * centroid
    return T


def _dlt_projection(points: np.ndarray, pixels: np.ndarray) -> np.ndarray:
    """Direct linear transform for the full 3x4 projection, Hartley-conditioned."""
    T2 = _hartley_normalization(pixels)
    T3 = _hartley_normalization(points)
    ph = np.concatenate([points, np.ones((len(points), 1))], axis=1) @ T3.T
    uvh = np.concatenate([pixels, np.ones((len(pixels), 1))], axis=1) @ T2.T

    n = len(points)
    A = np.zeros((2 * n, 12))
    A[0::2, 0:4] = ph
    A[0::2, 8:12] = -uvh[:, 0:1] * ph
    A[1::2, 4:8] = ph
    A[1::2, 8:12] = -uvh[:, 1:2] * ph

    _, s, vt = np.linalg.svd(A)
    # A unique (up to scale) solution needs exactly one vanishing singular value.
    if s[-2] < 1e-10 * s[0]:
        raise DegenerateConfiguration("calibration points are degenerate")
    Pn = vt[-1].reshape(3, 4)
    return np.linalg.inv(T2) @ Pn @ T3


def _extrinsics_from_projection(
    P: np.ndarray, K: np.ndarray, points: np.ndarray
) -> CameraExtrinsics:
    # Fix the overall sign so points sit in front of the camera.
    depths = points @ P[2, :3] + P[2, 3]
    if np.median(depths) < 0:
        P = -P
    M = np.linalg.inv(K) @ P
    B, b = M[:, :3], M[:, 3]
    U, sv, Vt = np.linalg.svd(B)
    scale = sv.mean()
    if scale < 1e-12:
        raise DegenerateConfiguration("vanishing rotation block in DLT estimate")
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    R = U @ D @ Vt  # nearest proper rotation
    return CameraExtrinsics(matrix_to_quat(R), b / scale)


def calibrate_extrinsics(
    intrinsics: CameraIntrinsics,
    points: np.ndarray,
    pixels: np.ndarray,
    max_iter: int = 100,
) -> CalibrationResult:
    """Extrinsics from >= 6 known 3D-2D correspondences.

    DLT initial estimate, nearest-rotation orthonormalization, then
    Levenberg-Marquardt on the pixel residuals over (rotation vector,
    translation). A refinement that exhausts max_iter still returns its
    estimate, with converged=False.
    """
    points = np.asarray(points, dtype=float)
    pixels = np.asarray(pixels, dtype=float)
    if points.ndim != 2 or points.shape[1] != 3 or pixels.shape != (len(points), 2):
        raise ValueError("need points (n, 3) and pixels (n, 2)")
    if len(points) < MIN_CORRESPONDENCES:
        raise DegenerateConfiguration(
            f"need at least {MIN_CORRESPONDENCES} correspondences, got {len(points)}"
        )

    K = intrinsics.matrix
    P0 = _dlt_projection(points, pixels)
    ext0 = _extrinsics_from_projection(P0, K, points)

    x0 = np.concatenate([rotvec_from_quat(ext0.rotation), ext0.translation])

    def residual(x):
        R = quat_to_matrix(quat_from_rotvec(x[:3]))
        cam = points @ R.T + x[3:]
        w = cam[:, 2]
        if np.any(np.abs(w) < DEGENERACY_EPS):
            raise DegenerateProjection("calibration point on the principal plane")
        u = K[0, 0] * cam[:, 0] / w + K[0, 2]
        v = K[1, 1] * cam[:, 1] / w + K[1, 2]
        return np.concatenate([u - pixels[:, 0], v - pixels[:, 1]])

    res = levenberg_marquardt(residual, x0, max_iter=max_iter)
    ext = CameraExtrinsics(quat_from_rotvec(res.x[:3]), res.x[3:].copy())
    rms = float(np.sqrt(2.0 * res.cost / len(points)))
    return CalibrationResult(
        extrinsics=ext, rms_px=rms, converged=res.converged, n_iter=res.n_iter
    )
