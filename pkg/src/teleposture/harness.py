"""Trace synchronization, deviation metrics, and the experiment runner.

run_experiment reproduces the study design: the same synthetic scenario is
filtered in robot-only, keypoints-only, and fused modes under one seed, with
an optional occluded repeat, and the per-joint deviations plus RULA summaries
land in machine-readable files (JSON lines, JSON, CSV). Outputs are
byte-deterministic for a given configuration.
"""
from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, replace

import numpy as np

from . import particle_filter as pf
from . import traces
from .config import SessionConfig
from .ergonomics import max_rula
from .errors import EmptyOverlap, LengthMismatch
from .observation import KeypointObservation, RobotObservation
from .sim import apply_occlusion, generate_task, synthesize_sensors


@dataclass(frozen=True)
class SyncedStep:
    t: float
    robot: RobotObservation | None
    keypoints: KeypointObservation | None


def _nearest(times: np.ndarray, t: float, half_window: float) -> int | None:
    i = int(np.searchsorted(times, t))
    best, dist = None, half_window + 1e-12
    for j in (i - 1, i):
        if 0 <= j < len(times):
            d = abs(float(times[j]) - t)
            if d <= dist:
                best, dist = j, d
    return best


def sync_traces(
    robot_trace: list[RobotObservation] | None,
    kp_trace: list[KeypointObservation] | None,
    dt: float,
) -> list[SyncedStep]:
    """Nearest-neighbor alignment onto a uniform grid of spacing dt.

    The grid spans the overlap of the supplied traces; a trace contributes at
    a grid point only if its nearest record lies within dt/2.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    present = [tr for tr in (robot_trace, kp_trace) if tr]
    if not present:
        raise EmptyOverlap("no input records")
    t0 = max(tr[0].t for tr in present)
    t1 = min(tr[-1].t for tr in present)
    if t0 > t1 + 1e-12:
        raise EmptyOverlap(f"traces do not overlap: [{t0}, {t1}]")

    rt = np.array([o.t for o in robot_trace]) if robot_trace else None
    kt = np.array([o.t for o in kp_trace]) if kp_trace else None
    n = int(np.floor((t1 - t0) / dt + 1e-9)) + 1
    steps = []
    for k in range(n):
        t = t0 + k * dt
        robot = None
        if rt is not None:
            i = _nearest(rt, t, dt / 2)
            robot = robot_trace[i] if i is not None else None
        kp = None
        if kt is not None:
            i = _nearest(kt, t, dt / 2)
            kp = kp_trace[i] if i is not None else None
        steps.append(SyncedStep(t=t, robot=robot, keypoints=kp))
    return steps


def angular_deviation_deg(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """|a - b| wrapped to [0, 180] degrees; inputs in radians."""
    d = np.mod(np.asarray(a) - np.asarray(b) + np.pi, 2.0 * np.pi) - np.pi
    return np.abs(np.rad2deg(d))


def _summary(values: np.ndarray) -> dict:
    v = np.asarray(values, dtype=float).ravel()
    q25, med, q75 = np.percentile(v, [25.0, 50.0, 75.0])
    iqr = q75 - q25
    lo_fence, hi_fence = q25 - 1.5 * iqr, q75 + 1.5 * iqr
    return {
        "median": float(med),
        "q25": float(q25),
        "q75": float(q75),
        "whisker_low": float(v[v >= lo_fence].min()),
        "whisker_high": float(v[v <= hi_fence].max()),
        "max": float(v.max()),
    }


@dataclass(frozen=True)
class DeviationReport:
    """Per-joint absolute deviations (degrees) and their box summaries."""

    deviations_deg: np.ndarray  # (T, 10)
    per_joint: tuple
    overall: dict

    def to_dict(self) -> dict:
        return {
            "overall_deg": self.overall,
            "per_joint_deg": list(self.per_joint),
            "n_steps": int(self.deviations_deg.shape[0]),
        }


def evaluate(estimates, truth_q: np.ndarray) -> DeviationReport:
    """Deviation of estimates against ground-truth joint angles.

    truth_q is (T, 10) with rows aligned to the estimate steps.
    """
    truth_q = np.asarray(truth_q, dtype=float)
    est_q = np.stack([e.q for e in estimates]) if estimates else np.zeros((0, 10))
    if est_q.shape[0] != truth_q.shape[0]:
        raise LengthMismatch(
            f"{est_q.shape[0]} estimates vs {truth_q.shape[0]} truth rows"
        )
    dev = angular_deviation_deg(est_q, truth_q)
    per_joint = tuple(_summary(dev[:, j]) for j in range(dev.shape[1]))
    return DeviationReport(
        deviations_deg=dev, per_joint=per_joint, overall=_summary(dev)
    )


def _truth_rows_for(gt, steps) -> np.ndarray:
    times = gt.times
    rows = []
    for s in steps:
        i = int(np.argmin(np.abs(times - s.t)))
        rows.append(gt.q[i])
    return np.stack(rows)


def run_experiment(
    session: SessionConfig, out_dir: str | None = None, seed: int | None = None
) -> dict:
    """Run the configured experiment grid and write result files.

    Per repetition and mode (plus an occluded repeat when configured):
    estimates_*.jsonl, deviation_*.json, and a rula summary inside the
    comparison row. comparison.json / comparison.csv hold one row per run.
    Returns the comparison as a dict.
    """
    out_dir = out_dir or session.output_dir
    os.makedirs(out_dir, exist_ok=True)
    base_seed = session.filter.seed if seed is None else seed

    rows = []
    exp = session.experiment
    for rep in range(exp.repetitions):
        task = replace(session.task, seed=session.task.seed + rep)
        gt = generate_task(task, session.model)
        robot_trace, kp_trace = synthesize_sensors(
            gt, session.filter.noise, session.camera, seed=base_seed + 7919 * (rep + 1)
        )
        variants = [("none", kp_trace)]
        if exp.with_occlusion and session.occlusion is not None:
            variants.append(
                (session.occlusion.mode, apply_occlusion(kp_trace, session.occlusion))
            )
        # worst-posture scoring starts after the warm-up window (same window
        # for truth and estimates, so the comparison stays symmetric)
        warm = min(exp.rula_warmup_s, float(gt.times[-1]))
        truth_max, truth_band = max_rula(gt.q[gt.times >= warm])

        for mode in exp.modes:
            for occ_name, kps in variants:
                if mode == "robot" and occ_name != "none":
                    continue  # keypoint occlusion cannot affect the robot channel
                cfg = replace(session.filter, mode=mode, seed=base_seed + rep)
                steps = sync_traces(
                    robot_trace if mode in ("robot", "fused") else None,
                    kps if mode in ("keypoints", "fused") else None,
                    cfg.dt,
                )
                estimates = pf.run(
                    steps,
                    model=session.model,
                    config=cfg,
                    projection=session.camera.projection,
                )
                report = evaluate(estimates, _truth_rows_for(gt, steps))
                scored = [e for e in estimates if e.t >= warm] or estimates
                est_max, est_band = max_rula(scored)

                tag = f"{task.kind}_{mode}_{occ_name}_rep{rep}"
                traces.save_estimates(os.path.join(out_dir, f"estimates_{tag}.jsonl"), estimates)
                with open(os.path.join(out_dir, f"deviation_{tag}.json"), "w") as fh:
                    json.dump(report.to_dict(), fh, sort_keys=True, indent=1)

                rows.append(
                    {
                        "task": task.kind,
                        "mode": mode,
                        "occlusion": occ_name,
                        "rep": rep,
                        "median_deg": report.overall["median"],
                        "q75_deg": report.overall["q75"],
                        "max_deg": report.overall["max"],
                        "rula_max": est_max,
                        "rula_band": est_band.value,
                        "rula_max_truth": truth_max,
                        "rula_band_truth": truth_band.value,
                        "rula_match": bool(est_max == truth_max),
                    }
                )

    comparison = {"rows": rows, "pooled": _pool_rows(rows)}
    with open(os.path.join(out_dir, "comparison.json"), "w") as fh:
        json.dump(comparison, fh, sort_keys=True, indent=1)
    _write_csv(os.path.join(out_dir, "comparison.csv"), rows)
    return comparison


_CSV_FIELDS = (
    "task",
    "mode",
    "occlusion",
    "rep",
    "median_deg",
    "q75_deg",
    "max_deg",
    "rula_max",
    "rula_band",
    "rula_max_truth",
    "rula_band_truth",
    "rula_match",
)


def _write_csv(path: str, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=_CSV_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in _CSV_FIELDS})


def _pool_rows(rows: list[dict]) -> list[dict]:
    """Median of per-rep medians per (task, mode, occlusion) cell."""
    cells = {}
    for row in rows:
        cells.setdefault((row["task"], row["mode"], row["occlusion"]), []).append(row)
    pooled = []
    for (task, mode, occ) in sorted(cells):
        group = cells[(task, mode, occ)]
        pooled.append(
            {
                "task": task,
                "mode": mode,
                "occlusion": occ,
                "reps": len(group),
                "median_deg": float(np.median([g["median_deg"] for g in group])),
                "rula_match_rate": float(np.mean([g["rula_match"] for g in group])),
            }
        )
    return pooled
