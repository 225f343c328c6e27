"""RULA scoring of estimated postures.

The three lookup tables are transcribed from the published RULA worksheet
(McAtamney & Corlett). Angle-to-category bands use closed-lower/open-upper
intervals at the published boundary angles. The kinematic chain has no
neck/head joints, so the neck score always comes from the assessment context;
the trunk score defaults to "supported sitting" and can optionally be derived
from the torso flexion DOF.

Sub-score sources, per the joint convention table in kinematics:
upper arm <- shoulder flexion (q4) with the abduction modifier from q3;
lower arm <- elbow flexion (q6); wrist <- wrist flexion (q7) with the
deviation modifier from q8; wrist twist <- forearm rotation (q9).
(Indices 0-based.)
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import EmptyTrace

# Table A: [upper_arm-1][lower_arm-1][wrist-1][twist-1] -> arm/wrist score
TABLE_A = (
    (
        ((1, 2), (2, 2), (2, 3), (3, 3)),
        ((2, 2), (2, 2), (3, 3), (3, 3)),
        ((2, 3), (3, 3), (3, 3), (4, 4)),
    ),
    (
        ((2, 3), (3, 3), (3, 4), (4, 4)),
        ((3, 3), (3, 3), (3, 4), (4, 4)),
        ((3, 4), (4, 4), (4, 4), (5, 5)),
    ),
    (
        ((3, 3), (4, 4), (4, 4), (5, 5)),
        ((3, 4), (4, 4), (4, 4), (5, 5)),
        ((4, 4), (4, 4), (4, 5), (5, 5)),
    ),
    (
        ((4, 4), (4, 4), (4, 5), (5, 5)),
        ((4, 4), (4, 4), (4, 5), (5, 5)),
        ((4, 4), (4, 5), (5, 5), (6, 6)),
    ),
    (
        ((5, 5), (5, 5), (5, 6), (6, 7)),
        ((5, 6), (6, 6), (6, 7), (7, 7)),
        ((6, 6), (6, 7), (7, 7), (7, 8)),
    ),
    (
        ((7, 7), (7, 7), (7, 8), (8, 9)),
        ((8, 8), (8, 8), (8, 9), (9, 9)),
        ((9, 9), (9, 9), (9, 9), (9, 9)),
    ),
)

# Table B: [neck-1][trunk-1][legs-1] -> neck/trunk/leg score
TABLE_B = (
    ((1, 3), (2, 3), (3, 4), (5, 5), (6, 6), (7, 7)),
    ((2, 3), (2, 3), (4, 5), (5, 5), (6, 7), (7, 7)),
    ((3, 3), (3, 4), (4, 5), (5, 6), (6, 7), (7, 7)),
    ((5, 5), (5, 6), (6, 7), (7, 7), (7, 7), (8, 8)),
    ((7, 7), (7, 7), (7, 8), (8, 8), (8, 8), (8, 8)),
    ((8, 8), (8, 8), (8, 8), (8, 9), (9, 9), (9, 9)),
)

# Table C: [score_a-1][score_b-1] -> grand score (rows clamp at 8, cols at 7)
TABLE_C = (
    (1, 2, 3, 3, 4, 5, 5),
    (2, 2, 3, 4, 4, 5, 5),
    (3, 3, 3, 4, 4, 5, 6),
    (3, 3, 3, 4, 5, 6, 6),
    (4, 4, 4, 5, 6, 7, 7),
    (4, 4, 5, 6, 6, 7, 7),
    (5, 5, 6, 6, 7, 7, 7),
    (5, 5, 6, 7, 7, 7, 7),
)


class Interpretation(str, enum.Enum):
    ACCEPTABLE = "acceptable"
    INVESTIGATE = "investigate"
    INVESTIGATE_CHANGE_SOON = "investigate_change_soon"
    INVESTIGATE_CHANGE_NOW = "investigate_change_now"


def interpret(grand: int) -> Interpretation:
    if grand <= 2:
        return Interpretation.ACCEPTABLE
    if grand <= 4:
        return Interpretation.INVESTIGATE
    if grand <= 6:
        return Interpretation.INVESTIGATE_CHANGE_SOON
    return Interpretation.INVESTIGATE_CHANGE_NOW


class Load(str, enum.Enum):
    """Force/load category of the worksheet."""

    LIGHT_INTERMITTENT = "light_intermittent"            # < 2 kg, intermittent
    MEDIUM_INTERMITTENT = "medium_intermittent"          # 2-10 kg, intermittent
    MEDIUM_STATIC_OR_REPEATED = "medium_static_or_repeated"
    HEAVY_OR_SHOCK = "heavy_or_shock"                    # > 10 kg, or shock

    @property
    def score(self) -> int:
        return {
            Load.LIGHT_INTERMITTENT: 0,
            Load.MEDIUM_INTERMITTENT: 1,
            Load.MEDIUM_STATIC_OR_REPEATED: 2,
            Load.HEAVY_OR_SHOCK: 3,
        }[self]


@dataclass(frozen=True)
class RulaContext:
    """Worksheet inputs the kinematic chain cannot provide.

    Defaults describe seated teleoperation with a light stylus: light
    intermittent load, no static or highly repeated muscle use, neck and
    trunk untwisted and vertical, legs and feet supported.
    """

    load: Load = Load.LIGHT_INTERMITTENT
    muscle_use_static_or_repeated: bool = False
    neck_twisted: bool = False
    neck_side_bent: bool = False
    trunk_twisted: bool = False
    trunk_side_bent: bool = False
    legs_supported: bool = True
    trunk_from_torso_joint: bool = False


@dataclass(frozen=True)
class RulaScore:
    upper_arm: int
    lower_arm: int
    wrist: int
    wrist_twist: int
    table_a: int
    neck: int
    trunk: int
    legs: int
    table_b: int
    grand: int
    interpretation: Interpretation


_ABDUCTION_MODIFIER_DEG = 45.0
_WRIST_DEVIATION_MODIFIER_DEG = 15.0
_TWIST_END_RANGE_DEG = 45.0


def _upper_arm_score(flexion_deg: float, abduction_deg: float) -> int:
    f = flexion_deg
    if -20.0 <= f < 20.0:
        s = 1
    elif 20.0 <= f < 45.0 or f < -20.0:
        s = 2
    elif 45.0 <= f < 90.0:
        s = 3
    else:
        s = 4
    if abs(abduction_deg) > _ABDUCTION_MODIFIER_DEG:
        s += 1
    return min(s, 6)


def _lower_arm_score(flexion_deg: float) -> int:
    return 1 if 60.0 <= flexion_deg < 100.0 else 2


def _wrist_score(flexion_deg: float, deviation_deg: float) -> int:
    a = abs(flexion_deg)
    if a < 1e-9:
        s = 1  # exactly neutral
    elif a < 15.0:
        s = 2
    else:
        s = 3
    if abs(deviation_deg) >= _WRIST_DEVIATION_MODIFIER_DEG:
        s += 1
    return min(s, 4)


def _wrist_twist_score(rotation_deg: float) -> int:
    return 1 if abs(rotation_deg) < _TWIST_END_RANGE_DEG else 2


def _trunk_score(ctx: RulaContext, torso_flexion_deg: float) -> int:
    if ctx.trunk_from_torso_joint:
        f = torso_flexion_deg
        if f <= 0.0:
            s = 1  # upright, supported sitting
        elif f < 20.0:
            s = 2
        elif f < 60.0:
            s = 3
        else:
            s = 4
    else:
        s = 1
    s += int(ctx.trunk_twisted) + int(ctx.trunk_side_bent)
    return min(s, 6)


def _neck_score(ctx: RulaContext) -> int:
    s = 1 + int(ctx.neck_twisted) + int(ctx.neck_side_bent)
    return min(s, 6)


def rula(q: np.ndarray, ctx: RulaContext | None = None) -> RulaScore:
    """Score one joint configuration (radians) against the worksheet."""
    ctx = ctx or RulaContext()
    q = np.asarray(q, dtype=float)
    deg = np.rad2deg(q)

    upper_arm = _upper_arm_score(deg[4], deg[3])
    lower_arm = _lower_arm_score(deg[6])
    wrist = _wrist_score(deg[7], deg[8])
    twist = _wrist_twist_score(deg[9])
    table_a = TABLE_A[upper_arm - 1][lower_arm - 1][wrist - 1][twist - 1]

    neck = _neck_score(ctx)
    trunk = _trunk_score(ctx, deg[0])
    legs = 1 if ctx.legs_supported else 2
    table_b = TABLE_B[neck - 1][trunk - 1][legs - 1]

    muscle = 1 if ctx.muscle_use_static_or_repeated else 0
    force = ctx.load.score
    score_a = table_a + muscle + force
    score_b = table_b + muscle + force
    grand = TABLE_C[min(score_a, 8) - 1][min(score_b, 7) - 1]

    return RulaScore(
        upper_arm=upper_arm,
        lower_arm=lower_arm,
        wrist=wrist,
        wrist_twist=twist,
        table_a=table_a,
        neck=neck,
        trunk=trunk,
        legs=legs,
        table_b=table_b,
        grand=grand,
        interpretation=interpret(grand),
    )


def max_rula(trace, ctx: RulaContext | None = None) -> tuple[int, Interpretation]:
    """Worst (maximum) grand score over a trace.

    Accepts a sequence of PostureEstimate-like objects (anything with .q) or
    an array of joint configurations with shape (T, 10).
    """
    if isinstance(trace, np.ndarray):
        rows = list(trace)
    else:
        rows = [getattr(e, "q", e) for e in trace]
    if len(rows) == 0:
        raise EmptyTrace("cannot score an empty trace")
    worst = max(rula(row, ctx).grand for row in rows)
    return worst, interpret(worst)
