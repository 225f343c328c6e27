"""Session configuration parsing, units, and validation."""
import numpy as np
import pytest

from teleposture.camera import CameraIntrinsics, CameraModel, look_at_extrinsics, project
from teleposture.config import (
    ENV_CONFIG,
    ExperimentSpec,
    SessionConfig,
    default_config_path,
    load_session,
    save_session,
    session_from_dict,
    session_to_dict,
)
from teleposture.errors import ConfigError
from teleposture.particle_filter import MODES
from teleposture.rotations import quat_to_matrix
from teleposture.sim import OcclusionSpec, TaskSpec, WORKING_POSTURE


def _full_dict():
    return {
        "model": {
            "segment_lengths_m": {
                "torso": 0.52,
                "shoulder": 0.18,
                "upper_arm": 0.33,
                "lower_arm": 0.27,
                "hand": 0.09,
            },
            "base_pose": {"position_m": [0.1, -0.2, 0.3]},
            "hand_to_stylus": {
                "position_m": [0.0, 0.0, -0.05],
                "orientation_wxyz": [1.0, 0.0, 0.0, 0.0],
            },
            "joint_limits_deg": {
                "lower": [-30, -35, -45, -30, -60, -90, 0, -70, -20, -85],
                "upper": [75, 35, 45, 150, 170, 90, 145, 75, 35, 90],
            },
        },
        "camera": {
            "intrinsics": {
                "fx_px": 400.0,
                "fy_px": 420.0,
                "cx_px": 320.0,
                "cy_px": 240.0,
                "width_px": 640,
                "height_px": 480,
            },
            "extrinsics": {
                "rotation_wxyz": [1.0, 0.0, 0.0, 0.0],
                "translation_m": [0.0, 0.0, 2.0],
            },
        },
        "filter": {
            "n_particles": 200,
            "mode": "fused",
            "dt_s": 0.1,
            "seed": 42,
            "resample_threshold": 0.6,
            "noise": {"pixel_sigma_px": [0.2, 0.2, 0.2, 0.2, 0.2]},
        },
        "task": {
            "kind": "line_x",
            "duration_s": 20.0,
            "rate_hz": 10.0,
            "amplitude_scale": 1.0,
            "seed": 3,
        },
        "occlusion": {
            "mode": "displace",
            "keypoint_ids": [3, 4],
            "windows_s": [[5.0, 9.0]],
            "displacement_px": 40.0,
            "seed": 1,
        },
        "experiment": {
            "repetitions": 2,
            "modes": ["fused", "robot"],
            "with_occlusion": True,
            "rula_warmup_s": 4.0,
        },
        "output_dir": "results",
    }


def test_empty_config_gives_defaults():
    cfg = session_from_dict({})
    assert cfg.model.lengths.torso == 0.50
    assert cfg.filter.n_particles == 500
    assert cfg.filter.mode == "fused"
    assert cfg.task.kind == "circle"
    assert cfg.occlusion is None
    assert cfg.experiment.modes == MODES
    assert cfg.output_dir == "out"
    assert cfg.camera.intrinsics.fx == 300.0


def test_full_config_parses_every_block():
    cfg = session_from_dict(_full_dict())
    assert cfg.model.lengths.upper_arm == 0.33
    assert np.array_equal(cfg.model.base_pose.position, [0.1, -0.2, 0.3])
    assert cfg.camera.intrinsics.fy == 420.0
    assert np.array_equal(cfg.camera.extrinsics.translation, [0.0, 0.0, 2.0])
    assert cfg.filter.n_particles == 200
    assert cfg.filter.seed == 42
    assert cfg.task.kind == "line_x"
    assert cfg.occlusion is not None and cfg.occlusion.mode == "displace"
    assert cfg.experiment.repetitions == 2
    assert cfg.experiment.with_occlusion is True
    assert cfg.output_dir == "results"


def test_yaml_round_trip_preserves_session(tmp_path):
    cfg = session_from_dict(_full_dict())
    path = tmp_path / "session.yaml"
    save_session(cfg, path)
    back = load_session(path)
    assert session_to_dict(back) == session_to_dict(cfg)


def test_default_session_round_trips(tmp_path):
    cfg = SessionConfig()
    path = tmp_path / "session.yaml"
    save_session(cfg, path)
    back = load_session(path)
    assert session_to_dict(back) == session_to_dict(cfg)
    assert back.occlusion is None


def test_joint_limits_are_degrees_in_file_radians_in_memory():
    data = _full_dict()
    cfg = session_from_dict(data)
    np.testing.assert_allclose(
        cfg.model.joint_limits.lower,
        np.deg2rad(data["model"]["joint_limits_deg"]["lower"]),
        atol=1e-15,
    )
    np.testing.assert_allclose(
        cfg.model.joint_limits.upper,
        np.deg2rad(data["model"]["joint_limits_deg"]["upper"]),
        atol=1e-15,
    )
    out = session_to_dict(cfg)
    np.testing.assert_allclose(
        out["model"]["joint_limits_deg"]["upper"],
        data["model"]["joint_limits_deg"]["upper"],
        atol=1e-12,
    )


def test_noise_block_partial_override_keeps_other_defaults():
    cfg = session_from_dict(_full_dict())
    noise = cfg.filter.noise
    np.testing.assert_allclose(noise.pixel_sigma, 0.2)
    np.testing.assert_allclose(noise.stylus_sigma[:3], 0.01)
    np.testing.assert_allclose(noise.accel_sigma_degps[0], np.sqrt(2.0))


def test_pose_quaternion_is_normalized():
    cfg = session_from_dict(
        {"model": {"hand_to_stylus": {"orientation_wxyz": [2.0, 0.0, 0.0, 0.0]}}}
    )
    np.testing.assert_allclose(cfg.model.hand_to_stylus.orientation, [1, 0, 0, 0])


@pytest.mark.parametrize(
    "data, where",
    [
        ({"bogus": 1}, "config"),
        ({"model": {"bogus": 1}}, "model"),
        ({"model": {"segment_lengths_m": {"femur": 0.4}}}, "segment_lengths_m"),
        ({"model": {"base_pose": {"xyz": [0, 0, 0]}}}, "base_pose"),
        ({"model": {"joint_limits_deg": {"min": [0] * 10}}}, "joint_limits_deg"),
        (
            {"camera": {"intrinsics": {"fx_px": 1, "fy_px": 1, "cx_px": 0, "cy_px": 0, "skew": 0}}},
            "intrinsics",
        ),
        ({"filter": {"particles": 10}}, "filter"),
        ({"filter": {"noise": {"pixel_noise": [1] * 5}}}, "noise"),
        ({"filter": {"noise": {"stylus_sigma": {"pos": [1, 1, 1]}}}}, "stylus_sigma"),
        ({"task": {"speed": 2.0}}, "task"),
        ({"occlusion": {"style": "dropout"}}, "occlusion"),
        ({"experiment": {"reps": 3}}, "experiment"),
    ],
)
def test_unknown_keys_are_rejected(data, where):
    with pytest.raises(ConfigError, match="unknown keys"):
        session_from_dict(data)


def test_camera_requires_exactly_one_of_extrinsics_or_correspondences():
    data = _full_dict()
    both = dict(data["camera"])
    both["correspondences"] = [{"point_m": [0, 0, 0], "pixel_px": [0, 0]}]
    with pytest.raises(ConfigError, match="exactly one"):
        session_from_dict({"camera": both})
    neither = {"intrinsics": data["camera"]["intrinsics"]}
    with pytest.raises(ConfigError, match="exactly one"):
        session_from_dict({"camera": neither})
    with pytest.raises(ConfigError, match="intrinsics"):
        session_from_dict({"camera": {"extrinsics": data["camera"]["extrinsics"]}})


def test_correspondences_calibrate_the_camera(rng):
    intr = CameraIntrinsics(fx=400.0, fy=420.0, cx=320.0, cy=240.0)
    true_ext = look_at_extrinsics(
        np.array([2.0, 0.3, 0.8]), np.array([0.0, -0.2, 0.3])
    )
    cam = CameraModel(intr, true_ext)
    points = rng.uniform([-0.5, -0.8, -0.3], [0.7, 0.4, 1.0], size=(12, 3))
    pixels = project(cam.projection, points)
    data = {
        "camera": {
            "intrinsics": {
                "fx_px": 400.0,
                "fy_px": 420.0,
                "cx_px": 320.0,
                "cy_px": 240.0,
                "width_px": 640,
                "height_px": 480,
            },
            "correspondences": [
                {"point_m": [float(x) for x in p], "pixel_px": [float(x) for x in uv]}
                for p, uv in zip(points, pixels)
            ],
        }
    }
    cfg = session_from_dict(data)
    np.testing.assert_allclose(
        quat_to_matrix(cfg.camera.extrinsics.rotation),
        quat_to_matrix(true_ext.rotation),
        atol=1e-6,
    )
    np.testing.assert_allclose(
        cfg.camera.extrinsics.translation, true_ext.translation, atol=1e-6
    )
    reproj = project(cfg.camera.projection, points)
    np.testing.assert_allclose(reproj, pixels, atol=1e-6)


@pytest.mark.parametrize(
    "data",
    [
        {"filter": {"mode": "psychic"}},
        {"filter": {"n_particles": 0}},
        {"filter": {"dt_s": 0.0}},
        {"filter": {"resample_threshold": 1.5}},
        {"task": {"kind": "zigzag"}},
        {"task": {"duration_s": -1.0}},
        {"occlusion": {"mode": "smear"}},
        {"occlusion": {"windows_s": [[9.0, 5.0]]}},
        {"model": {"segment_lengths_m": {"torso": -0.5}}},
        {"model": {"joint_limits_deg": {"lower": [0] * 10, "upper": [-1] * 10}}},
        {"filter": {"noise": {"pixel_sigma_px": [0, 0, 0, 0, 0]}}},
        {"filter": {"noise": {"stylus_sigma": {"position_m": [1, 1, 1]}}}},
    ],
)
def test_invalid_values_raise_config_error(data):
    with pytest.raises(ConfigError):
        session_from_dict(data)


def test_vector_shape_is_checked():
    with pytest.raises(ConfigError, match="3 entries"):
        session_from_dict({"model": {"base_pose": {"position_m": [1.0, 2.0]}}})
    with pytest.raises(ConfigError, match="numeric"):
        session_from_dict({"model": {"base_pose": {"position_m": ["a", "b", "c"]}}})


def test_experiment_spec_validation():
    with pytest.raises(ConfigError, match="repetitions"):
        ExperimentSpec(repetitions=-1)
    with pytest.raises(ConfigError, match="unknown experiment mode"):
        ExperimentSpec(modes=("fused", "oracle"))
    with pytest.raises(ConfigError, match="rula_warmup_s"):
        ExperimentSpec(rula_warmup_s=-0.1)


def test_explicit_null_occlusion_is_none():
    assert session_from_dict({"occlusion": None}).occlusion is None


def test_load_session_missing_file_raises(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_session(tmp_path / "absent.yaml")


def test_load_session_rejects_bad_yaml(tmp_path):
    path = tmp_path / "broken.yaml"
    path.write_text("task: [unclosed\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="not valid YAML"):
        load_session(path)


def test_load_session_rejects_non_mapping_root(tmp_path):
    path = tmp_path / "list.yaml"
    path.write_text("- 1\n- 2\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="mapping"):
        load_session(path)


def test_empty_file_gives_default_session(tmp_path):
    path = tmp_path / "empty.yaml"
    path.write_text("", encoding="utf-8")
    cfg = load_session(path)
    assert cfg.filter.n_particles == 500
    np.testing.assert_allclose(cfg.task.duration_s, 60.0)
    assert WORKING_POSTURE.shape == (10,)


def test_env_var_supplies_default_config_path(monkeypatch):
    monkeypatch.delenv(ENV_CONFIG, raising=False)
    assert default_config_path() is None
    monkeypatch.setenv(ENV_CONFIG, "/tmp/session.yaml")
    assert default_config_path() == "/tmp/session.yaml"


def test_session_config_usable_in_dataclass_form():
    cfg = SessionConfig(
        task=TaskSpec(kind="random_blocks", duration_s=5.0),
        occlusion=OcclusionSpec(mode="dropout"),
    )
    d = session_to_dict(cfg)
    assert d["task"]["kind"] == "random_blocks"
    assert d["occlusion"]["mode"] == "dropout"
    assert session_to_dict(session_from_dict(d)) == d
