"""Kinematic bicycle model at constant speed."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

MAX_EPISODE_STEPS = 500
STEERING_ACTIONS = (-0.4, 0.0, 0.4)


@dataclass(frozen=True)
class VehicleParams:
    speed: float = 5.0
    wheelbase: float = 2.5
    footprint_length: float = 4.0
    footprint_width: float = 1.8
    dt: float = 0.05

    def __post_init__(self):
        for name in ("speed", "wheelbase", "footprint_length", "footprint_width", "dt"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class CarState:
    x: float
    y: float
    heading: float
    arclength_progress: float = 0.0
    step_count: int = 0


def advance_kinematics(state: CarState, steering: float, params: VehicleParams) -> CarState:
    """One explicit-Euler step of the bicycle model; position uses the pre-step heading."""
    if not abs(steering) < math.pi / 2:
        raise ValueError("steering angle must satisfy |steering| < pi/2")
    v, dt = params.speed, params.dt
    return replace(
        state,
        x=state.x + v * math.cos(state.heading) * dt,
        y=state.y + v * math.sin(state.heading) * dt,
        heading=state.heading + (v / params.wheelbase) * math.tan(steering) * dt,
        step_count=state.step_count + 1,
    )


def footprint_corners(state: CarState, params: VehicleParams) -> np.ndarray:
    """(4, 2) rectangle corners in drive order, centred on the car position."""
    hl, hw = params.footprint_length / 2, params.footprint_width / 2
    local = np.array([[hl, hw], [hl, -hw], [-hl, -hw], [-hl, hw]])
    return _to_world(local, state)


def footprint_samples(state: CarState, params: VehicleParams, k: int = 16) -> np.ndarray:
    """K x K cell-centred sample points over the footprint rectangle, (K*K, 2)."""
    u = ((np.arange(k) + 0.5) / k - 0.5) * params.footprint_length
    w = ((np.arange(k) + 0.5) / k - 0.5) * params.footprint_width
    uu, ww = np.meshgrid(u, w, indexing="ij")
    return _to_world(np.stack([uu.ravel(), ww.ravel()], axis=1), state)


def _to_world(local: np.ndarray, state: CarState) -> np.ndarray:
    c, s = math.cos(state.heading), math.sin(state.heading)
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + np.array([state.x, state.y])
