"""The driving environment: kinematics, metrics, reward, termination and rendering per step."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from lsrl.simenv import metrics as M
from lsrl.simenv.render import (
    VIEW_METERS,
    WEATHERS,
    WeatherPreset,
    render_rgb,
    render_semantic,
)
from lsrl.simenv.track import TrackSpec
from lsrl.simenv.vehicle import (
    STEERING_ACTIONS,
    CarState,
    VehicleParams,
    advance_kinematics,
)


@dataclass
class StepResult:
    semantic: np.ndarray
    rgb: np.ndarray
    reward: float
    done: bool
    reason: str
    metrics: M.LaneMetrics
    state: CarState


class EpisodeDone(RuntimeError):
    """Raised when stepping an environment whose episode has terminated."""


def reset(track: TrackSpec) -> CarState:
    x, y, h = track.spawn
    _, s, _, _ = track.project(np.array([[x, y]]))
    return CarState(x=x, y=y, heading=h, arclength_progress=float(s[0]), step_count=0)


class DrivingEnv:
    """Single-threaded environment owning its own RNG (weather choice and sensor noise)."""

    def __init__(
        self,
        track: TrackSpec,
        params: VehicleParams | None = None,
        weathers: Sequence[WeatherPreset] | None = None,
        resolution: int = 64,
        window: float = VIEW_METERS,
        seed: int = 0,
        crash_reward: float | None = M.OFF_ROAD_PENALTY,
    ) -> None:
        self.track = track
        self.params = params or VehicleParams()
        self.weathers = list(weathers) if weathers else list(WEATHERS.values())
        self.resolution = resolution
        self.window = window
        self.rng = np.random.default_rng(seed)
        # None keeps the formula value on the crash step
        self.crash_reward = crash_reward
        self._polylines = track.barrier_polylines()
        self.state: CarState | None = None
        self.weather: WeatherPreset = self.weathers[0]
        self.done = True
        self.goal_reached = False

    def seed(self, seed: int) -> None:
        self.rng = np.random.default_rng(seed)

    def _observe(self, state: CarState) -> tuple[np.ndarray, np.ndarray]:
        grid = render_semantic(state, self.track, self.window, self.resolution, self.params)
        return grid, render_rgb(grid, self.weather, self.rng)

    def reset(self, pose: tuple[float, float, float] | None = None, weather: WeatherPreset | None = None):
        """Start an episode; returns the first :class:`StepResult` (reward 0, running)."""
        self.weather = weather or self.weathers[int(self.rng.integers(len(self.weathers)))]
        state = reset(self.track)
        if pose is not None:
            x, y, h = pose
            _, s, _, _ = self.track.project(np.array([[x, y]]))
            state = CarState(x, y, h, float(s[0]), 0)
        self.state = state
        self.done = False
        self.goal_reached = state.arclength_progress >= self.track.goal_arclength
        m = M.lane_metrics(state, self.track, self.params)
        grid, rgb = self._observe(state)
        return StepResult(grid, rgb, 0.0, False, M.RUNNING, m, state)

    def random_pose(self, rng: np.random.Generator) -> tuple[float, float, float]:
        """A jittered pose anywhere along the track, biased to the driving lane."""
        s = rng.uniform(0.0, self.track.total_length)
        lateral = rng.uniform(-self.track.lane_width * 0.9, self.track.lane_width * 0.4)
        x, y, h = self.track.pose_at(s, lateral)
        return x, y, h + rng.normal(0.0, 0.15)

    def step(self, action: int) -> StepResult:
        if self.done or self.state is None:
            raise EpisodeDone("episode has terminated; call reset() first")
        if action not in (0, 1, 2):
            raise ValueError(f"action index must be 0, 1 or 2, got {action!r}")
        state = advance_kinematics(self.state, STEERING_ACTIONS[action], self.params)
        _, s, _, _ = self.track.project(np.array([[state.x, state.y]]))
        state = replace(state, arclength_progress=float(s[0]))
        m = M.lane_metrics(state, self.track, self.params)
        r = M.reward(m)
        reason = M.check_termination(state, m, self.track, self.params, self._polylines)
        if reason == M.CRASH and self.crash_reward is not None:
            r = self.crash_reward
        self.state = state
        self.done = reason != M.RUNNING
        if state.arclength_progress >= self.track.goal_arclength:
            self.goal_reached = True
        grid, rgb = self._observe(state)
        return StepResult(grid, rgb, r, self.done, reason, m, state)


def heading_error(track: TrackSpec, state: CarState) -> float:
    """Car heading minus road heading at its projection, wrapped to (-pi, pi]."""
    err = state.heading - track.pose_at(state.arclength_progress)[2]
    return math.atan2(math.sin(err), math.cos(err))
