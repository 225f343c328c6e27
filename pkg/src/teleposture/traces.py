"""Line-delimited trace files.

Every line is one JSON record tagged with a "type" field:

type "robot":     t, position_m [3], orientation_wxyz [4], linear_vel_mps [3],
                  angular_vel_radps [3]
type "keypoints": t, points {id: [u_px, v_px, confidence]}
type "truth":     t, q_rad [10], qdot_radps [10]
type "estimate":  t, q_rad [10], qdot_radps [10], map_log_weight, ess,
                  q_mean_rad [10], q_std_rad [10], reinitialized

Keys are written sorted and floats use shortest round-trip formatting, so a
file's bytes are a pure function of its records.
"""
from __future__ import annotations

import json

import numpy as np

from .errors import TraceError
from .observation import KeypointDetection, KeypointObservation, RobotObservation
from .particle_filter import PostureEstimate


def _floats(x) -> list:
    return [float(v) for v in np.asarray(x, dtype=float).ravel()]


def robot_to_record(o: RobotObservation) -> dict:
    return {
        "type": "robot",
        "t": float(o.t),
        "position_m": _floats(o.position),
        "orientation_wxyz": _floats(o.orientation),
        "linear_vel_mps": _floats(o.linear_vel),
        "angular_vel_radps": _floats(o.angular_vel),
    }


def keypoints_to_record(o: KeypointObservation) -> dict:
    return {
        "type": "keypoints",
        "t": float(o.t),
        "points": {
            str(k): [float(d.u), float(d.v), float(d.confidence)]
            for k, d in sorted(o.keypoints.items())
        },
    }


def truth_to_record(t: float, q, qdot) -> dict:
    return {"type": "truth", "t": float(t), "q_rad": _floats(q), "qdot_radps": _floats(qdot)}


def estimate_to_record(e: PostureEstimate) -> dict:
    return {
        "type": "estimate",
        "t": float(e.t),
        "q_rad": _floats(e.q),
        "qdot_radps": _floats(e.qdot),
        "map_log_weight": float(e.map_log_weight),
        "ess": float(e.ess),
        "q_mean_rad": _floats(e.q_mean),
        "q_std_rad": _floats(e.q_std),
        "reinitialized": bool(e.reinitialized),
    }


def record_to_robot(r: dict) -> RobotObservation:
    return RobotObservation(
        t=float(r["t"]),
        position=np.array(r["position_m"], dtype=float),
        orientation=np.array(r["orientation_wxyz"], dtype=float),
        linear_vel=np.array(r["linear_vel_mps"], dtype=float),
        angular_vel=np.array(r["angular_vel_radps"], dtype=float),
    )


def record_to_keypoints(r: dict) -> KeypointObservation:
    pts = {
        int(k): KeypointDetection(u=float(v[0]), v=float(v[1]), confidence=float(v[2]))
        for k, v in r["points"].items()
    }
    return KeypointObservation(t=float(r["t"]), keypoints=pts)


def record_to_estimate(r: dict) -> PostureEstimate:
    return PostureEstimate(
        t=float(r["t"]),
        q=np.array(r["q_rad"], dtype=float),
        qdot=np.array(r["qdot_radps"], dtype=float),
        map_log_weight=float(r["map_log_weight"]),
        ess=float(r["ess"]),
        q_mean=np.array(r["q_mean_rad"], dtype=float),
        q_std=np.array(r["q_std_rad"], dtype=float),
        reinitialized=bool(r.get("reinitialized", False)),
    )


def write_records(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True))
            fh.write("\n")


def read_records(path, expect_type: str | None = None) -> list[dict]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TraceError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
            if "type" not in rec:
                raise TraceError(f"{path}:{lineno}: record without a type tag")
            if expect_type is not None and rec["type"] != expect_type:
                raise TraceError(
                    f"{path}:{lineno}: expected {expect_type!r} records, got {rec['type']!r}"
                )
            out.append(rec)
    return out


def save_robot_trace(path, trace) -> None:
    write_records(path, (robot_to_record(o) for o in trace))


def load_robot_trace(path) -> list[RobotObservation]:
    return [record_to_robot(r) for r in read_records(path, "robot")]


def save_keypoint_trace(path, trace) -> None:
    write_records(path, (keypoints_to_record(o) for o in trace))


def load_keypoint_trace(path) -> list[KeypointObservation]:
    return [record_to_keypoints(r) for r in read_records(path, "keypoints")]


def save_truth_trace(path, gt) -> None:
    write_records(
        path,
        (truth_to_record(gt.times[i], gt.q[i], gt.qdot[i]) for i in range(len(gt.times))),
    )


def load_truth_arrays(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    recs = read_records(path, "truth")
    t = np.array([r["t"] for r in recs], dtype=float)
    q = np.array([r["q_rad"] for r in recs], dtype=float)
    qdot = np.array([r["qdot_radps"] for r in recs], dtype=float)
    return t, q, qdot


def save_estimates(path, estimates) -> None:
    write_records(path, (estimate_to_record(e) for e in estimates))


def load_estimates(path) -> list[PostureEstimate]:
    return [record_to_estimate(r) for r in read_records(path, "estimate")]
