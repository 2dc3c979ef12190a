"""Experiment drivers behind the CLI: the reward-discontinuity profile and rollout rendering."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from lsrl.harness.ppm import write_ppm
from lsrl.simenv import PALETTE, Arc, DrivingEnv, TrackSpec
from lsrl.simenv import metrics as M
from lsrl.simenv.vehicle import MAX_EPISODE_STEPS

STRAIGHT_ACTION = 1  # index of zero steering
OUTER_EDGE = {"right": "left", "left": "right"}


@dataclass
class RewardProfile:
    rows: list[tuple[int, float, float, float]]  # (step, l, r, reward)
    max_abs_delta: float
    reason: str  # termination reason, or "never-terminated"

    @property
    def terminated(self) -> bool:
        return self.reason != "never-terminated"

    def csv(self) -> str:
        lines = ["step,l,r,reward"]
        lines += [f"{k},{l:.9f},{r:.9f},{rew:.9f}" for k, l, r, rew in self.rows]
        return "\n".join(lines) + "\n"


def check_barrier_precondition(track: TrackSpec, maneuver: str) -> None:
    """The first turn in the maneuver's direction needs a barrier on its outer edge."""
    if maneuver not in OUTER_EDGE:
        raise ValueError(f"maneuver must be 'left' or 'right', got {maneuver!r}")
    for seg, edges in zip(track.segments, track.barrier_edges):
        if isinstance(seg, Arc) and seg.direction == maneuver:
            if OUTER_EDGE[maneuver] not in edges:
                raise ValueError(
                    f"track {track.name!r}: the {maneuver} turn has no barrier on its {OUTER_EDGE[maneuver]} edge"
                )
            return
    raise ValueError(f"track {track.name!r} has no {maneuver} turn")


def reward_profile(track: TrackSpec, maneuver: str, max_steps: int = MAX_EPISODE_STEPS) -> RewardProfile:
    """Drive straight ahead (the mean of uniformly random steering) through the turn.

    The step-0 row is the spawn state's reward computed from the same formula.
    """
    check_barrier_precondition(track, maneuver)
    env = DrivingEnv(track, seed=0)
    res = env.reset()
    rows = [(0, res.metrics.l, res.metrics.r, M.reward(res.metrics))]
    for k in range(1, max_steps + 1):
        res = env.step(STRAIGHT_ACTION)
        rows.append((k, res.metrics.l, res.metrics.r, float(res.reward)))
        if res.done:
            break
    rewards = np.array([row[3] for row in rows])
    delta = float(np.max(np.abs(np.diff(rewards)))) if len(rows) > 1 else 0.0
    reason = res.reason if res.reason in (M.CRASH, M.OFFROAD) else "never-terminated"
    return RewardProfile(rows, delta, reason)


def palette_image(grid: np.ndarray) -> np.ndarray:
    return PALETTE[grid].astype(np.uint8)


def triptych(rgb: np.ndarray, semantic: np.ndarray, predicted: np.ndarray) -> np.ndarray:
    """S x 3S image: camera RGB | ground-truth classes | decoded prediction."""
    return np.concatenate([rgb, palette_image(semantic), palette_image(predicted)], axis=1)


def render_rollout(
    env: DrivingEnv,
    policy: Callable[[np.ndarray], int],
    predict_fn: Callable[[np.ndarray], np.ndarray],
    out_dir: str | Path,
    max_steps: int = MAX_EPISODE_STEPS,
) -> list[Path]:
    """Greedy rollout writing one triptych per step as ``step_NNNN.ppm``; returns the paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    res = env.reset()
    paths = []
    for k in range(max_steps):
        res = env.step(policy(res.rgb))
        path = out_dir / f"step_{k:04d}.ppm"
        write_ppm(path, triptych(res.rgb, res.semantic, predict_fn(res.rgb)))
        paths.append(path)
        if res.done:
            break
    return paths
