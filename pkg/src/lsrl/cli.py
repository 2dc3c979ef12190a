"""Command-line entry point: ``lsrl <command> [options]``.

Every command takes ``--config``, ``--seed``, ``--out`` (an output directory)
and repeatable ``--set section.key=value`` overrides, and writes the effective
configuration to ``<out>/config.txt``.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from lsrl import dqn
from lsrl import perception as P
from lsrl import semantics as sem
from lsrl.harness.checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from lsrl.harness.config import RunConfig, load_config
from lsrl.harness.dataset_io import read_dataset, write_dataset
from lsrl.harness.experiments import reward_profile, render_rollout
from lsrl.nn import make_optimizer
from lsrl.simenv import DrivingEnv, load_track

INVARIANCE_POSES = 8


class CliError(Exception):
    """A user-facing failure reported as a one-line diagnostic."""


# -- shared plumbing ---------------------------------------------------------------


def _prepare(args) -> tuple[RunConfig, Path]:
    cfg = load_config(args.config, args.set, args.seed)
    if getattr(args, "track", None):
        cfg.simenv.track = args.track
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        cfg.dump(out / "config.txt")
    except OSError as exc:
        raise CliError(f"cannot write to {out}: {exc.strerror}") from exc
    return cfg, out


def _make_env(cfg: RunConfig, seed: int) -> DrivingEnv:
    return DrivingEnv(
        load_track(cfg.simenv.track),
        cfg.simenv.vehicle(),
        cfg.simenv.weather_presets(),
        resolution=cfg.perception.input_size,
        seed=seed,
    )


def _require(path: str | None, what: str) -> Path:
    if not path:
        raise CliError(f"{what} is required")
    p = Path(path)
    if not p.is_file():
        raise CliError(f"{what} not found: {p}")
    return p


def _load_perception(path: str | None, cfg: RunConfig) -> P.PerceptionModel:
    ckpt = load_checkpoint(_require(path, "perception checkpoint"), expected_kind="perception")
    spec = P.EncoderDecoderSpec.from_dict(ckpt.spec)
    if spec != cfg.perception.spec():
        raise CliError(
            f"perception checkpoint spec {ckpt.spec} does not match config "
            f"(input_size={cfg.perception.input_size}, schedule={list(cfg.perception.channel_schedule)})"
        )
    model = P.build_model(spec)
    model.load_state_dict(ckpt.params)
    return model


def _load_control(path: str | None, cfg: RunConfig):
    ckpt = load_checkpoint(_require(path, "control checkpoint"), expected_kind="control")
    spec = dqn.QNetworkSpec.from_dict(ckpt.spec)
    if spec.layer_sizes[0] != cfg.dqn.state_dim or spec.layer_sizes[-1] != cfg.dqn.n_actions:
        raise CliError(f"control checkpoint layers {list(spec.layer_sizes)} do not match config state/action sizes")
    net = dqn.build_q_network(spec)
    net.load_state_dict(ckpt.params)
    return net, ckpt


def _encoder(model: P.PerceptionModel):
    return lambda rgb: P.encode(model, rgb)


def _control_checkpoint(net, spec: dqn.QNetworkSpec, cfg: RunConfig, step: int) -> Checkpoint:
    return Checkpoint("control", spec.to_dict(), net.state_dict(), step, cfg.seed, {"dqn": cfg.dqn.config().to_dict()})


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# -- commands ----------------------------------------------------------------------


def cmd_collect(args) -> None:
    cfg, out = _prepare(args)
    env = _make_env(cfg, cfg.seed)
    ds = P.collect_dataset(env, args.frames, seed=cfg.seed)
    write_dataset(out / "dataset.lsrlds", ds)
    counts = sem.class_frequencies(ds.semantic)
    weights = sem.compute_class_weights(counts)
    print(f"{'class':<14}{'pixels':>12}{'weight':>10}")
    for name, c, w in zip(sem.CLASS_NAMES, counts, weights):
        print(f"{name:<14}{int(c):>12}{w:>10.4f}")
    print(f"{'total':<14}{int(counts.sum()):>12}{weights.sum():>10.4f}")
    print(f"wrote {len(ds)} frames to {out / 'dataset.lsrlds'}")


def cmd_train_perception(args) -> None:
    cfg, out = _prepare(args)
    ds = read_dataset(_require(args.data, "dataset"))
    pc = cfg.perception
    if ds.size != pc.input_size:
        raise CliError(f"dataset frames are {ds.size}px but perception.input_size is {pc.input_size}")
    train, held = ds.split(pc.holdout, seed=cfg.seed)
    model = P.build_model(pc.spec(), cfg.seed)
    weights = ds.class_weights if ds.class_weights is not None else sem.compute_class_weights(
        sem.class_frequencies(ds.semantic)
    )
    rows = ["epoch,loss,heldout_accuracy,heldout_mean_iou"]
    metrics_path = out / "perception_metrics.csv"

    def on_epoch(epoch: int, loss: float, m: P.PerceptionModel) -> bool:
        pred = P.predict(m, held.rgb)
        acc = P.accuracy_from_predictions(pred, held.semantic)
        iou = P.iou_from_predictions(pred, held.semantic)
        rows.append(f"{epoch},{loss:.9g},{acc:.6f},{iou:.6f}")
        metrics_path.write_text("\n".join(rows) + "\n")
        print(f"epoch {epoch}: loss {loss:.5f} held-out accuracy {acc:.4f} mIoU {iou:.4f}", flush=True)
        return pc.target_accuracy > 0 and acc >= pc.target_accuracy

    metrics_path.write_text(rows[0] + "\n")
    curve = P.train_perception(
        model, train, weights, pc.epochs, pc.batch_size,
        make_optimizer("adam", pc.learning_rate), seed=cfg.seed, on_epoch=on_epoch,
    )
    save_checkpoint(
        out / "perception.ckpt",
        Checkpoint("perception", pc.spec().to_dict(), model.state_dict(), len(curve), cfg.seed,
                   {"class_weights": [float(w) for w in weights]}),
    )
    env = _make_env(cfg, cfg.seed)
    rng = np.random.default_rng(cfg.seed)
    poses = [env.random_pose(rng) for _ in range(INVARIANCE_POSES)]
    summary = {
        "epochs_run": len(curve),
        "heldout_frames": len(held),
        "heldout_accuracy": P.pixel_accuracy(model, held),
        "heldout_mean_iou": P.mean_class_iou(model, held),
        "latent_invariance_score": P.latent_invariance_score(model, env, poses, env.weathers, seed=cfg.seed),
    }
    _write_json(out / "perception_summary.json", summary)
    print(json.dumps(summary, sort_keys=True))


def cmd_train_dqn(args) -> None:
    cfg, out = _prepare(args)
    model = _load_perception(args.perception, cfg)
    config = cfg.dqn.config()
    spec = dqn.QNetworkSpec((config.state_dim,) + dqn.Q_LAYER_SIZES[1:-1] + (config.n_actions,))
    agent = dqn.DqnAgent(config, cfg.seed, spec)
    if args.resume:
        net, ckpt = _load_control(args.resume, cfg)
        agent.primary.load_state_dict(net.state_dict())
        dqn.sync_target(agent.primary, agent.target)
        agent.global_step = ckpt.step
    env = _make_env(cfg, cfg.seed)
    every = cfg.dqn.checkpoint_every
    csv = (out / "episodes.csv").open("w")
    csv.write(dqn.EpisodeRecord.CSV_HEADER + "\n")

    def on_episode(rec: dqn.EpisodeRecord) -> None:
        csv.write(rec.csv_row() + "\n")
        csv.flush()
        if rec.episode % 20 == 0:
            print(f"episode {rec.episode} step {agent.global_step}: return {rec.ret:.2f} "
                  f"length {rec.steps} epsilon {rec.epsilon:.3f} ({rec.termination_reason})", flush=True)

    def on_step(a: dqn.DqnAgent) -> None:
        if every > 0 and a.global_step % every == 0:
            save_checkpoint(out / f"control_{a.global_step:07d}.ckpt", _control_checkpoint(a.primary, spec, cfg, a.global_step))

    try:
        dqn.train_loop(env, _encoder(model), config, cfg.dqn.total_steps - agent.global_step, cfg.seed,
                       agent=agent, on_episode=on_episode, on_step=on_step)
    finally:
        csv.close()
    save_checkpoint(out / "control.ckpt", _control_checkpoint(agent.primary, spec, cfg, agent.global_step))
    print(f"trained {agent.global_step} steps; checkpoint {out / 'control.ckpt'}")


def cmd_eval(args) -> None:
    cfg, out = _prepare(args)
    if args.episodes <= 0:
        raise CliError("--episodes must be positive")
    model = _load_perception(args.perception, cfg)
    net, _ = _load_control(args.control, cfg)
    summary = dqn.evaluate(net, _encoder(model), _make_env(cfg, cfg.seed), args.episodes, seed=cfg.seed)
    summary["track"] = cfg.simenv.track
    _write_json(out / "eval.json", summary)
    print(f"mean return {summary['mean_return']:.3f} over {args.episodes} episodes; "
          f"turn completions {summary['turn_completions']}/{args.episodes}")


def cmd_reward_profile(args) -> None:
    cfg, out = _prepare(args)
    prof = reward_profile(load_track(cfg.simenv.track), args.maneuver)
    (out / "reward_profile.csv").write_text(prof.csv())
    _write_json(out / "reward_profile.json", {
        "maneuver": args.maneuver,
        "track": cfg.simenv.track,
        "steps": len(prof.rows) - 1,
        "max_abs_delta": prof.max_abs_delta,
        "termination_reason": prof.reason,
    })
    if prof.terminated:
        print(f"{args.maneuver}: terminated by {prof.reason} after {len(prof.rows) - 1} steps; "
              f"max single-step |delta reward| = {prof.max_abs_delta:.4f}")
    else:
        print(f"{args.maneuver}: never terminated within {len(prof.rows) - 1} steps; "
              f"max single-step |delta reward| = {prof.max_abs_delta:.4f}")


def cmd_render(args) -> None:
    cfg, out = _prepare(args)
    model = _load_perception(args.perception, cfg)
    net, _ = _load_control(args.control, cfg)
    enc = _encoder(model)
    env = _make_env(cfg, cfg.seed)
    env.seed(cfg.seed)
    paths = render_rollout(
        env,
        lambda rgb: int(np.argmax(dqn.q_forward(net, enc(rgb)))),
        lambda rgb: P.predict(model, rgb)[0],
        out,
        max_steps=args.steps,
    )
    print(f"wrote {len(paths)} frames to {out}")


# -- parser ------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="line-based config file (section.key = value)")
    common.add_argument("--seed", type=int, help="run seed (overrides the config)")
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config entry; repeatable")

    parser = argparse.ArgumentParser(prog="lsrl", description="Latent-semantic driving RL toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("collect", parents=[common], help="record a random-driving perception dataset")
    p.add_argument("--track")
    p.add_argument("--frames", type=int, default=2000)
    p.set_defaults(func=cmd_collect)

    p = sub.add_parser("train-perception", parents=[common], help="train the encoder-decoder")
    p.add_argument("--data", required=True, help="dataset file written by collect")
    p.set_defaults(func=cmd_train_perception)

    p = sub.add_parser("train-dqn", parents=[common], help="train the Q-network on frozen latents")
    p.add_argument("--perception", help="perception checkpoint")
    p.add_argument("--track")
    p.add_argument("--resume", help="control checkpoint to continue from (network weights and step count)")
    p.set_defaults(func=cmd_train_dqn)

    p = sub.add_parser("eval", parents=[common], help="greedy evaluation rollouts")
    p.add_argument("--perception")
    p.add_argument("--control")
    p.add_argument("--track")
    p.add_argument("--episodes", type=int, default=10)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("reward-profile", parents=[common], help="straight-driving reward trace through a turn")
    p.add_argument("--track")
    p.add_argument("--maneuver", choices=("left", "right"), required=True)
    p.set_defaults(func=cmd_reward_profile)

    p = sub.add_parser("render", parents=[common], help="write RGB | semantic | prediction frames of a rollout")
    p.add_argument("--perception")
    p.add_argument("--control")
    p.add_argument("--track")
    p.add_argument("--steps", type=int, default=500)
    p.set_defaults(func=cmd_render)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "reward-profile" and not args.track:
        args.track = f"{args.maneuver}-turn-barrier"
    try:
        args.func(args)
    except (CliError, CheckpointError, ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"lsrl {args.command}: error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
