import json
import math

import numpy as np
import pytest

from lsrl import dqn
from lsrl import perception as P
from lsrl.cli import main
from lsrl.harness import (
    Checkpoint,
    CheckpointError,
    RunConfig,
    encode_ppm,
    load_checkpoint,
    load_config,
    parse_config_text,
    read_dataset,
    read_ppm,
    reward_profile,
    save_checkpoint,
    write_dataset,
    write_ppm,
)
from lsrl.simenv import DrivingEnv, load_track

SMALL = ["--set", "perception.input_size=32"]


# -- config ------------------------------------------------------------------------


def test_config_defaults_follow_table_values():
    cfg = RunConfig()
    assert cfg.dqn.config().table_values() == (64, 3, 7500, 0.999, 256, 512, 500)
    assert cfg.perception.spec() == P.EncoderDecoderSpec()
    assert cfg.simenv.vehicle().speed == 5.0


def test_config_precedence(tmp_path):
    f = tmp_path / "run.cfg"
    f.write_text("# comment\ndqn.gamma = 0.9\ndqn.batch_size = 64\nseed = 4\n")
    cfg = load_config(f, ["dqn.batch_size=32"], seed=None)
    assert cfg.dqn.gamma == 0.9  # file beats default
    assert cfg.dqn.batch_size == 32  # flag beats file
    assert cfg.seed == 4
    assert load_config(f, [], seed=11).seed == 11


def test_config_tuple_and_schedule_coupling():
    cfg = parse_config_text("simenv.weathers = noon, night\nperception.input_size = 128\n")
    assert cfg.simenv.weathers == ("noon", "night")
    assert cfg.perception.channel_schedule == P.default_schedule(128)


def test_config_dump_round_trip(tmp_path):
    cfg = load_config(None, ["dqn.learning_rate=0.0003", "simenv.track=straight"], seed=2)
    cfg.dump(tmp_path / "c.txt")
    again = load_config(tmp_path / "c.txt")
    assert again == cfg


def test_config_errors():
    with pytest.raises(ValueError):
        parse_config_text("dqn.nope = 1\n")
    with pytest.raises(ValueError):
        parse_config_text("bogus.key = 1\n")
    with pytest.raises(ValueError):
        parse_config_text("just words\n")
    with pytest.raises(ValueError):
        load_config(None, ["dqn.gamma"])


# -- checkpoints ----------------------------------------------------------------------


def _perception_ckpt(seed=0):
    model = P.build_model(P.EncoderDecoderSpec.for_size(32), seed=seed)
    return Checkpoint("perception", model.spec.to_dict(), model.state_dict(), step=3, seed=seed)


def test_checkpoint_round_trip_bitwise(tmp_path):
    ck = _perception_ckpt(1)
    save_checkpoint(tmp_path / "p.ckpt", ck)
    back = load_checkpoint(tmp_path / "p.ckpt", expected_kind="perception")
    assert back.kind == "perception" and back.step == 3 and back.seed == 1
    assert back.spec == ck.spec
    assert list(back.params) == list(ck.params)
    for k in ck.params:
        assert back.params[k].tobytes() == ck.params[k].tobytes()


def test_checkpoint_rejections(tmp_path):
    path = tmp_path / "p.ckpt"
    save_checkpoint(path, _perception_ckpt())
    raw = path.read_bytes()
    with pytest.raises(CheckpointError):
        load_checkpoint(path, expected_kind="control")
    (tmp_path / "t.ckpt").write_bytes(raw[: len(raw) - 100])
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "t.ckpt")
    (tmp_path / "m.ckpt").write_bytes(b"XXXX1" + raw[5:])
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "m.ckpt")
    (tmp_path / "v.ckpt").write_bytes(raw[:5] + b"\x09\x00" + raw[7:])
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "v.ckpt")
    with pytest.raises(CheckpointError):
        save_checkpoint(tmp_path / "k.ckpt", Checkpoint("planner", {}, {}))


def test_checkpoint_shape_mismatch_caught_on_load_state(tmp_path):
    save_checkpoint(tmp_path / "p.ckpt", _perception_ckpt())
    params = load_checkpoint(tmp_path / "p.ckpt").params
    with pytest.raises(ValueError):
        P.build_model(P.EncoderDecoderSpec(32, (8, 8, 8))).load_state_dict(params)


# -- dataset files and images --------------------------------------------------------


def test_dataset_file_round_trip(tmp_path):
    env = DrivingEnv(load_track("right-turn-barrier"), resolution=32)
    ds = P.collect_dataset(env, 12, seed=5)
    write_dataset(tmp_path / "d.lsrlds", ds)
    raw = (tmp_path / "d.lsrlds").read_bytes()
    assert raw.startswith(b"LSRLDS1")
    back = read_dataset(tmp_path / "d.lsrlds")
    assert np.array_equal(back.rgb, ds.rgb) and np.array_equal(back.semantic, ds.semantic)
    assert back.weather_ids == ds.weather_ids and back.track == "right-turn-barrier"
    assert back.class_weights.sum() == pytest.approx(1.0, abs=1e-9)
    (tmp_path / "short.lsrlds").write_bytes(raw[:-10])
    with pytest.raises(ValueError):
        read_dataset(tmp_path / "short.lsrlds")


def test_ppm_round_trip(tmp_path):
    img = np.random.default_rng(0).integers(0, 256, size=(5, 7, 3), dtype=np.uint8)
    write_ppm(tmp_path / "x.ppm", img)
    assert (tmp_path / "x.ppm").read_bytes().startswith(b"P6\n7 5\n255\n")
    assert np.array_equal(read_ppm(tmp_path / "x.ppm"), img)
    with pytest.raises(ValueError):
        encode_ppm(img.astype(np.float32))


# -- reward profile -------------------------------------------------------------------


def test_reward_profile_right_turn_is_smooth():
    prof = reward_profile(load_track("right-turn-barrier"), "right")
    rewards = [r[3] for r in prof.rows]
    assert prof.reason == "crash"
    assert prof.max_abs_delta <= 1.5
    assert rewards[0] == 1.0 and rewards[-1] == -5.0
    assert any(-5.0 < r < 1.0 for r in rewards)  # passes through intermediate values


def test_reward_profile_left_turn_jumps():
    prof = reward_profile(load_track("left-turn-barrier"), "left")
    assert prof.reason == "crash"
    assert prof.rows[-2][3] == pytest.approx(1.0, abs=1e-9)
    assert prof.rows[-1][3] == -5.0
    assert prof.max_abs_delta >= 5.0


def test_reward_profile_preconditions():
    with pytest.raises(ValueError):
        reward_profile(load_track("straight"), "left")
    with pytest.raises(ValueError):
        reward_profile(load_track("right-turn-barrier"), "left")
    with pytest.raises(ValueError):
        reward_profile(load_track("right-turn-barrier"), "up")


def test_reward_profile_reports_non_termination():
    from lsrl.simenv import Arc, Straight, TrackSpec

    gentle = TrackSpec([Straight(10.0), Arc(5000.0, 0.05, "right"), Straight(400.0)],
                       barrier_edges=[set(), {"left"}, set()])
    prof = reward_profile(gentle, "right")
    assert not prof.terminated and len(prof.rows) == 501


# -- command line -------------------------------------------------------------------------


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """collect -> train-perception -> train-dqn at a small size, shared by the CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    assert main(["collect", "--out", str(root / "c"), "--frames", "24", "--seed", "2", *SMALL]) == 0
    assert main(["train-perception", "--out", str(root / "p"), "--data", str(root / "c/dataset.lsrlds"),
                 "--seed", "2", "--set", "perception.epochs=2", *SMALL]) == 0
    dqn_args = ["train-dqn", "--perception", str(root / "p/perception.ckpt"), "--seed", "2",
                "--set", "dqn.total_steps=300", "--set", "dqn.batch_size=16",
                "--set", "dqn.checkpoint_every=100", *SMALL]
    assert main(dqn_args + ["--out", str(root / "d")]) == 0
    return root, dqn_args


def test_collect_outputs(pipeline, capsys):
    root, _ = pipeline
    ds = read_dataset(root / "c/dataset.lsrlds")
    assert len(ds) == 24
    assert (root / "c/config.txt").read_text().startswith("seed = 2\n")
    out = root / "c2"
    assert main(["collect", "--out", str(out), "--frames", "24", "--seed", "2", *SMALL]) == 0
    assert (out / "dataset.lsrlds").read_bytes() == (root / "c/dataset.lsrlds").read_bytes()
    total = [l for l in capsys.readouterr().out.splitlines() if l.startswith("total")][0]
    assert float(total.split()[-1]) == pytest.approx(1.0, abs=1e-4)


def test_train_perception_outputs(pipeline):
    root, _ = pipeline
    lines = (root / "p/perception_metrics.csv").read_text().splitlines()
    assert lines[0] == "epoch,loss,heldout_accuracy,heldout_mean_iou" and len(lines) == 3
    summary = json.loads((root / "p/perception_summary.json").read_text())
    assert summary["epochs_run"] == 2 and math.isfinite(summary["latent_invariance_score"])
    assert load_checkpoint(root / "p/perception.ckpt").kind == "perception"


def test_train_dqn_outputs_and_determinism(pipeline, tmp_path):
    root, dqn_args = pipeline
    d = root / "d"
    assert sorted(p.name for p in d.glob("*.ckpt")) == [
        "control.ckpt", "control_0000100.ckpt", "control_0000200.ckpt", "control_0000300.ckpt"
    ]
    ck = load_checkpoint(d / "control.ckpt", expected_kind="control")
    assert ck.step == 300 and ck.spec["layer_sizes"] == list(dqn.Q_LAYER_SIZES)
    assert (d / "episodes.csv").read_text().startswith(dqn.EpisodeRecord.CSV_HEADER + "\n")
    assert main(dqn_args + ["--out", str(tmp_path / "again")]) == 0
    assert (tmp_path / "again/episodes.csv").read_bytes() == (d / "episodes.csv").read_bytes()
    assert (tmp_path / "again/control.ckpt").read_bytes() == (d / "control.ckpt").read_bytes()


def test_train_dqn_zero_steps(pipeline, tmp_path):
    root, _ = pipeline
    args = ["train-dqn", "--perception", str(root / "p/perception.ckpt"), "--out", str(tmp_path),
            "--seed", "6", "--set", "dqn.total_steps=0", *SMALL]
    assert main(args) == 0
    assert (tmp_path / "episodes.csv").read_text() == dqn.EpisodeRecord.CSV_HEADER + "\n"
    ck = load_checkpoint(tmp_path / "control.ckpt")
    fresh = dqn.build_q_network(seed=6)
    for k, v in fresh.state_dict().items():
        assert np.array_equal(ck.params[k], v)


def test_train_dqn_refusals(pipeline, tmp_path, capsys):
    root, _ = pipeline
    assert main(["train-dqn", "--out", str(tmp_path / "a"), *SMALL]) != 0
    assert "perception checkpoint is required" in capsys.readouterr().err
    assert main(["train-dqn", "--out", str(tmp_path / "b"), "--perception", str(tmp_path / "none.ckpt")]) != 0
    # default config expects 64px perception
    assert main(["train-dqn", "--out", str(tmp_path / "c"), "--perception", str(root / "p/perception.ckpt")]) != 0
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 2 and all(line.startswith("lsrl train-dqn: error:") for line in err)
    # control checkpoint in the perception slot
    assert main(["train-dqn", "--out", str(tmp_path / "d"), "--perception", str(root / "d/control.ckpt"), *SMALL]) != 0


def test_train_dqn_resume(pipeline, tmp_path):
    root, _ = pipeline
    args = ["train-dqn", "--perception", str(root / "p/perception.ckpt"), "--out", str(tmp_path),
            "--resume", str(root / "d/control_0000200.ckpt"), "--set", "dqn.total_steps=250",
            "--set", "dqn.batch_size=16", *SMALL]
    assert main(args) == 0
    assert load_checkpoint(tmp_path / "control.ckpt").step == 250


def test_eval_json_and_determinism(pipeline, tmp_path):
    root, _ = pipeline
    args = ["eval", "--perception", str(root / "p/perception.ckpt"), "--control", str(root / "d/control.ckpt"),
            "--episodes", "2", "--seed", "1", *SMALL]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a/eval.json").read_bytes()
    assert a == (tmp_path / "b/eval.json").read_bytes()
    summary = json.loads(a)
    assert summary["episodes"] == 2 and len(summary["returns"]) == 2
    assert summary["min_return"] <= summary["mean_return"] <= summary["max_return"]
    assert main(args[:-2] + ["--episodes", "0", "--out", str(tmp_path / "c"), *SMALL]) != 0
    assert main(["eval", "--out", str(tmp_path / "d"), "--perception", str(root / "p/perception.ckpt"), *SMALL]) != 0


def test_reward_profile_command(tmp_path, capsys):
    assert main(["reward-profile", "--maneuver", "left", "--out", str(tmp_path / "l")]) == 0
    rows = (tmp_path / "l/reward_profile.csv").read_text().splitlines()
    assert rows[0] == "step,l,r,reward"
    summary = json.loads((tmp_path / "l/reward_profile.json").read_text())
    assert summary["termination_reason"] == "crash" and summary["max_abs_delta"] >= 5
    assert main(["reward-profile", "--maneuver", "left", "--out", str(tmp_path / "l2")]) == 0
    assert (tmp_path / "l2/reward_profile.csv").read_bytes() == (tmp_path / "l/reward_profile.csv").read_bytes()
    assert main(["reward-profile", "--maneuver", "left", "--track", "straight", "--out", str(tmp_path / "s")]) != 0


def test_render_command(pipeline, tmp_path):
    root, _ = pipeline
    args = ["render", "--perception", str(root / "p/perception.ckpt"), "--control", str(root / "d/control.ckpt"),
            "--steps", "10", "--seed", "3", "--track", "straight", *SMALL]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    frames = sorted((tmp_path / "a").glob("*.ppm"))
    assert len(frames) == 10
    assert read_ppm(frames[0]).shape == (32, 96, 3)
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    for f in frames:
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["reward-profile", "--maneuver", "right", "--out", str(blocker / "sub")]) != 0
