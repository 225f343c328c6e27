"""Posture estimation for physically assisted tasks.

Fuses a robot end-effector trajectory with monocular body keypoints in a
particle filter over a seated upper-body joint model, plus the synthetic
scenario generator, camera calibration, segment-length fitting, ergonomic
scoring and evaluation tooling around it.
"""
from .anthropometry import (
    CalibrationSample,
    LengthFitResult,
    fit_lengths_keypoints,
    fit_lengths_robot,
)
from .camera import (
    CalibrationResult,
    CameraExtrinsics,
    CameraIntrinsics,
    CameraModel,
    ProjectionMatrix,
    calibrate_extrinsics,
    look_at_extrinsics,
    project,
    reprojection_rms,
)
from .config import ExperimentSpec, SessionConfig, load_session, save_session
from .ergonomics import Interpretation, RulaContext, RulaScore, interpret, max_rula, rula
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
from .harness import DeviationReport, angular_deviation_deg, evaluate, run_experiment, sync_traces
from .kinematics import (
    ChainState,
    JointLimits,
    JointState,
    KinematicModel,
    Pose,
    SegmentLengths,
    Twist,
    ValidityModel,
    chain_state,
    check_validity,
    forward_kinematics,
    landmark_positions,
    propagate,
    sample_acceleration,
    validity_scores,
)
from .observation import (
    KeypointDetection,
    KeypointObservation,
    NoiseConfig,
    RobotObservation,
    log_likelihood_fused,
    log_likelihood_keypoints,
    log_likelihood_robot,
)
from .particle_filter import (
    MODES,
    FilterConfig,
    Particle,
    ParticleSet,
    PostureEstimate,
    effective_sample_size,
    initialize,
    predict,
    systematic_resample,
    update,
)
from .particle_filter import run as run_filter
from .sim import (
    GroundTruthTrace,
    OcclusionSpec,
    TaskSpec,
    apply_occlusion,
    default_camera,
    generate_task,
    synthesize_sensors,
)

__version__ = "0.1.0"

__all__ = [
    "AllParticlesInvalid",
    "CalibrationResult",
    "CalibrationSample",
    "CameraExtrinsics",
    "CameraIntrinsics",
    "CameraModel",
    "ChainState",
    "ConfigError",
    "DegenerateConfiguration",
    "DegenerateProjection",
    "DeviationReport",
    "EmptyOverlap",
    "EmptyTrace",
    "ExperimentSpec",
    "FilterConfig",
    "GroundTruthTrace",
    "Interpretation",
    "JointLimits",
    "JointState",
    "KeypointDetection",
    "KeypointObservation",
    "KinematicModel",
    "LengthFitResult",
    "LengthMismatch",
    "LimitsViolated",
    "MODES",
    "NoiseConfig",
    "NonPositiveLength",
    "OcclusionSpec",
    "Particle",
    "ParticleSet",
    "Pose",
    "PostureEstimate",
    "ProjectionMatrix",
    "RankDeficient",
    "RobotObservation",
    "RulaContext",
    "RulaScore",
    "SegmentLengths",
    "SessionConfig",
    "TaskSpec",
    "TelepostureError",
    "TraceError",
    "Twist",
    "ValidityModel",
    "angular_deviation_deg",
    "apply_occlusion",
    "calibrate_extrinsics",
    "chain_state",
    "check_validity",
    "default_camera",
    "effective_sample_size",
    "evaluate",
    "fit_lengths_keypoints",
    "fit_lengths_robot",
    "forward_kinematics",
    "generate_task",
    "initialize",
    "interpret",
    "landmark_positions",
    "load_session",
    "log_likelihood_fused",
    "log_likelihood_keypoints",
    "log_likelihood_robot",
    "look_at_extrinsics",
    "max_rula",
    "predict",
    "project",
    "propagate",
    "reprojection_rms",
    "rula",
    "run_experiment",
    "run_filter",
    "sample_acceleration",
    "save_session",
    "sync_traces",
    "synthesize_sensors",
    "systematic_resample",
    "update",
    "validity_scores",
]
