"""Exception types shared across the pipeline.

The CLI maps these onto exit codes: config/data problems exit 2, numerical
failures exit 3 (see cli.py).
"""


class TelepostureError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(TelepostureError):
    """Malformed or inconsistent session configuration."""


class TraceError(TelepostureError):
    """Malformed trace file or record."""


class DegenerateProjection(TelepostureError):
    """Point lies on the camera's principal plane (homogeneous w ~ 0)."""


class DegenerateConfiguration(TelepostureError):
    """Calibration correspondences are too few or ill-conditioned."""


class RankDeficient(TelepostureError):
    """Least-squares problem lacks excitation to identify all parameters."""


class NonPositiveLength(TelepostureError):
    """A fitted segment length came out non-positive."""


class AllParticlesInvalid(TelepostureError):
    """Every particle weight vanished during an update."""


class EmptyOverlap(TelepostureError):
    """Input traces share no overlapping time span."""


class LengthMismatch(TelepostureError):
    """Estimate and ground-truth traces differ in length."""


class EmptyTrace(TelepostureError):
    """An operation that needs at least one record got none."""


class LimitsViolated(TelepostureError):
    """Generated trajectory leaves the configured joint limits."""
