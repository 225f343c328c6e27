"""Particle filter over the 10-DOF joint state.

Cycle per timestep: predict (sample accelerations, constant-velocity
propagation, no clamping), then update (validity score times observation
likelihood, log-domain normalization, ESS check, systematic resampling when
ESS < threshold * N). The per-step estimate is the highest-weight particle
taken before resampling, ties broken by lowest index.

Particles live in arrays, vectorized across the set; draws come from a single
seeded Generator in a fixed order, so runs are deterministic for a given seed
and independent of any execution parallelism.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import AllParticlesInvalid
from .kinematics import (
    N_JOINTS,
    JointLimits,
    JointState,
    KinematicModel,
    ValidityModel,
    validity_scores,
)
from .observation import (
    KeypointObservation,
    NoiseConfig,
    RobotObservation,
    loglik_keypoints_arrays,
    loglik_robot_arrays,
)

MODES = ("robot", "keypoints", "fused")


@dataclass(frozen=True)
class FilterConfig:
    n_particles: int = 500
    mode: str = "fused"
    dt: float = 0.1
    seed: int = 0
    resample_threshold: float = 0.5
    noise: NoiseConfig = field(default_factory=NoiseConfig.default)

    def __post_init__(self):
        if self.n_particles < 2:
            raise ValueError("need at least 2 particles")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not 0.0 < self.resample_threshold <= 1.0:
            raise ValueError("resample_threshold must be in (0, 1]")
        if self.dt <= 0.0:
            raise ValueError("dt must be positive")


@dataclass(frozen=True)
class Particle:
    state: JointState
    log_weight: float


@dataclass
class ParticleSet:
    q: np.ndarray            # (N, 10)
    qdot: np.ndarray         # (N, 10)
    log_weights: np.ndarray  # (N,), normalized: logsumexp == 0
    rng: np.random.Generator
    step: int = 0

    def __len__(self) -> int:
        return len(self.q)

    def particle(self, i: int) -> Particle:
        return Particle(JointState(self.q[i], self.qdot[i]), float(self.log_weights[i]))


@dataclass(frozen=True)
class PostureEstimate:
    """Per-step filter output.

    q/qdot: highest-weight particle before resampling. q_mean/q_std are
    weighted diagnostics over the particle set. reinitialized marks steps
    where the filter had to recover from a degenerate weight set.
    """

    t: float
    q: np.ndarray
    qdot: np.ndarray
    map_log_weight: float
    ess: float
    q_mean: np.ndarray
    q_std: np.ndarray
    reinitialized: bool = False


def _uniform_cloud(rng: np.random.Generator, n: int, limits: JointLimits) -> ParticleSet:
    q = rng.uniform(limits.lower, limits.upper, size=(n, N_JOINTS))
    return ParticleSet(
        q=q,
        qdot=np.zeros((n, N_JOINTS)),
        log_weights=np.full(n, -np.log(n)),
        rng=rng,
        step=0,
    )


def initialize(config: FilterConfig, limits: JointLimits) -> ParticleSet:
    """Uniform positions over the limit box, zero velocities, equal weights."""
    return _uniform_cloud(np.random.default_rng(config.seed), config.n_particles, limits)


def predict(ps: ParticleSet, config: FilterConfig) -> ParticleSet:
    """Constant-velocity propagation with sampled accelerations; no clamping."""
    sigma = config.noise.accel_sigma_radps
    qddot = ps.rng.normal(0.0, 1.0, ps.q.shape) * sigma
    q = ps.q + ps.qdot * config.dt
    qdot = ps.qdot + qddot * config.dt
    return replace(ps, q=q, qdot=qdot)


def log_normalize(log_weights: np.ndarray) -> np.ndarray:
    m = np.max(log_weights)
    if not np.isfinite(m):
        raise AllParticlesInvalid("all particle weights vanished")
    return log_weights - (m + np.log(np.sum(np.exp(log_weights - m))))


def effective_sample_size(log_weights: np.ndarray) -> float:
    w = np.exp(log_weights - np.max(log_weights))
    w = w / np.sum(w)
    return float(1.0 / np.sum(w * w))


def systematic_resample(log_weights: np.ndarray, u0: float) -> np.ndarray:
    """Ancestor indices from one stratified uniform draw u0 in [0, 1)."""
    w = np.exp(log_weights - np.max(log_weights))
    w = w / np.sum(w)
    n = len(w)
    positions = (u0 + np.arange(n)) / n
    return np.searchsorted(np.cumsum(w), positions, side="left").clip(max=n - 1)


def _weighted_moments(ps: ParticleSet):
    w = np.exp(ps.log_weights - np.max(ps.log_weights))
    w = w / np.sum(w)
    mean = w @ ps.q
    var = w @ (ps.q - mean) ** 2
    return mean, np.sqrt(var)


def _map_estimate(ps: ParticleSet, t: float, reinitialized: bool = False) -> PostureEstimate:
    best = int(np.argmax(ps.log_weights))  # lowest index on exact ties
    mean, std = _weighted_moments(ps)
    return PostureEstimate(
        t=t,
        q=ps.q[best].copy(),
        qdot=ps.qdot[best].copy(),
        map_log_weight=float(ps.log_weights[best]),
        ess=effective_sample_size(ps.log_weights),
        q_mean=mean,
        q_std=std,
        reinitialized=reinitialized,
    )


def update(
    ps: ParticleSet,
    robot_obs: RobotObservation | None,
    kp_obs: KeypointObservation | None,
    *,
    model: KinematicModel,
    config: FilterConfig,
    validity: ValidityModel | None = None,
    projection=None,
    t: float = float("nan"),
) -> tuple[ParticleSet, PostureEstimate]:
    """Weight, normalize, estimate, and (if ESS drops) resample.

    Observations incompatible with the configured mode are ignored; at least
    one usable observation must remain.
    """
    validity = validity or ValidityModel()
    use_robot = robot_obs is not None and config.mode in ("robot", "fused")
    use_kp = kp_obs is not None and config.mode in ("keypoints", "fused")
    if not use_robot and not use_kp:
        raise ValueError("update needs at least one mode-compatible observation")
    if use_kp and projection is None:
        raise ValueError("keypoint update requires a camera projection")

    v = validity_scores(validity, model.joint_limits, ps.q)
    with np.errstate(divide="ignore"):
        logw = ps.log_weights + np.log(v)
    if use_robot:
        ll = loglik_robot_arrays(
            model, ps.q, ps.qdot, robot_obs, config.noise.stylus_sigma
        )
        logw = logw + ll
    if use_kp:
        ll = loglik_keypoints_arrays(
            model, projection, ps.q, kp_obs, config.noise.pixel_sigma
        )
        logw = logw + ll

    logw = log_normalize(logw)  # raises AllParticlesInvalid if degenerate
    out = replace(ps, log_weights=logw, step=ps.step + 1)
    est = _map_estimate(out, t)

    if est.ess < config.resample_threshold * len(ps):
        u0 = float(out.rng.uniform())
        idx = systematic_resample(logw, u0)
        out = replace(
            out,
            q=out.q[idx].copy(),
            qdot=out.qdot[idx].copy(),
            log_weights=np.full(len(ps), -np.log(len(ps))),
        )
    return out, est


def run(
    steps,
    *,
    model: KinematicModel,
    config: FilterConfig,
    validity: ValidityModel | None = None,
    projection=None,
) -> list[PostureEstimate]:
    """Filter a synchronized observation stream; one estimate per step.

    `steps` yields objects with attributes (t, robot, keypoints), as produced
    by harness.sync_traces. Steps with no mode-compatible observation only
    predict. A degenerate update re-initializes the cloud once and flags the
    emitted estimate.
    """
    ps = initialize(config, model.joint_limits)
    estimates: list[PostureEstimate] = []
    for step in steps:
        ps = predict(ps, config)
        use_robot = step.robot is not None and config.mode in ("robot", "fused")
        use_kp = step.keypoints is not None and config.mode in ("keypoints", "fused")
        if not use_robot and not use_kp:
            estimates.append(_map_estimate(ps, step.t))
            continue
        kwargs = dict(
            model=model,
            config=config,
            validity=validity,
            projection=projection,
            t=step.t,
        )
        robot = step.robot if use_robot else None
        kp = step.keypoints if use_kp else None
        try:
            ps, est = update(ps, robot, kp, **kwargs)
        except AllParticlesInvalid:
            # recover: fresh cloud with a step-dependent sub-seed, retry once
            rng = np.random.default_rng((config.seed, len(estimates), 1))
            ps = _uniform_cloud(rng, config.n_particles, model.joint_limits)
            try:
                ps, est = update(ps, robot, kp, **kwargs)
            except AllParticlesInvalid:
                est = _map_estimate(ps, step.t)
            est = replace(est, reinitialized=True)
        estimates.append(est)
    return estimates
