"""Ego-centric top-down semantic renderer and weather-dependent RGB renderer."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from lsrl import semantics as sem
from lsrl.simenv.track import TrackSpec
from lsrl.simenv.vehicle import CarState, VehicleParams

VIEW_METERS = 24.0
VIEW_BEHIND = 3.0  # metres of road shown behind the car centre
LINE_HALF_WIDTH = 0.25
BARRIER_THICKNESS = 0.6
SIDEWALK_WIDTH = 1.5

# Mutually distant base colours; unrendered classes still get a colour so
# every class id maps somewhere.
PALETTE = np.array(
    [
        [128, 64, 128],  # road
        [250, 250, 60],  # road-line
        [244, 35, 232],  # sidewalk
        [110, 190, 60],  # terrain
        [190, 120, 30],  # fence-barrier
        [70, 70, 70],  # building
        [20, 100, 20],  # vegetation
        [0, 0, 200],  # vehicle
        [220, 20, 60],  # pedestrian
        [160, 160, 160],  # pole
        [102, 102, 156],  # wall
        [255, 160, 0],  # traffic-sign
        [0, 0, 0],  # none
    ],
    dtype=np.float64,
)


@dataclass(frozen=True)
class WeatherPreset:
    id: str
    brightness_gain: float = 1.0
    color_shift: tuple[float, float, float] = (0.0, 0.0, 0.0)
    noise_sigma: float = 0.0

    def __post_init__(self):
        if not self.brightness_gain > 0:
            raise ValueError("brightness_gain must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")


WEATHERS: dict[str, WeatherPreset] = {
    w.id: w
    for w in (
        WeatherPreset("noon", 1.2, (10.0, 10.0, 0.0), 2.0),
        WeatherPreset("overcast", 0.8, (-10.0, -5.0, 15.0), 4.0),
        WeatherPreset("dusk", 0.6, (25.0, 0.0, -20.0), 5.0),
        WeatherPreset("night", 0.35, (-15.0, -15.0, 25.0), 8.0),
    )
}
IDENTITY_WEATHER = WeatherPreset("identity")


def get_weather(name: str) -> WeatherPreset:
    if name == "identity":
        return IDENTITY_WEATHER
    try:
        return WEATHERS[name]
    except KeyError:
        raise KeyError(f"unknown weather preset {name!r}; choose from {sorted(WEATHERS)}") from None


def view_points(state: CarState, resolution: int, window: float = VIEW_METERS) -> np.ndarray:
    """World coordinates of every pixel centre, (res*res, 2), heading pointing up."""
    mpp = window / resolution
    idx = np.arange(resolution) + 0.5
    forward = (resolution - idx) * mpp - VIEW_BEHIND  # row 0 is farthest ahead
    left = (resolution / 2 - idx) * mpp  # column 0 is farthest left
    f, l = np.meshgrid(forward, left, indexing="ij")
    c, s = math.cos(state.heading), math.sin(state.heading)
    x = state.x + f * c - l * s
    y = state.y + f * s + l * c
    return np.stack([x.ravel(), y.ravel()], axis=1)


def render_semantic(
    state: CarState,
    track: TrackSpec,
    window: float = VIEW_METERS,
    resolution: int = 64,
    params: VehicleParams | None = None,
    draw_ego: bool = True,
) -> np.ndarray:
    pts = view_points(state, resolution, window)
    d, _, seg, _ = track.project(pts)
    w = track.lane_width
    ad = np.abs(d)
    left_barrier, right_barrier = track.barrier_sides(seg)
    has_barrier = np.where(d > 0, left_barrier, right_barrier)
    out = np.full(len(pts), sem.TERRAIN, dtype=np.uint8)
    beyond = ad - w - track.barrier_offset
    out[(ad > w) & ~has_barrier & (ad <= w + SIDEWALK_WIDTH)] = sem.SIDEWALK
    out[has_barrier & (beyond >= -1e-12) & (beyond <= BARRIER_THICKNESS)] = sem.FENCE_BARRIER
    out[ad <= w] = sem.ROAD
    out[ad <= LINE_HALF_WIDTH] = sem.ROAD_LINE
    grid = out.reshape(resolution, resolution)
    if draw_ego:
        params = params or VehicleParams()
        mpp = window / resolution
        idx = np.arange(resolution) + 0.5
        forward = (resolution - idx) * mpp - VIEW_BEHIND
        left = (resolution / 2 - idx) * mpp
        rows = np.abs(forward) <= params.footprint_length / 2
        cols = np.abs(left) <= params.footprint_width / 2
        grid[np.ix_(rows, cols)] = sem.VEHICLE
    return grid


def render_rgb(
    grid: np.ndarray,
    weather: WeatherPreset,
    rng: np.random.Generator,
    palette: np.ndarray = PALETTE,
) -> np.ndarray:
    """(H, W) class ids -> (H, W, 3) uint8 image under the given weather."""
    img = np.asarray(palette, dtype=np.float64)[sem.validate_grid(grid)] * weather.brightness_gain
    img = img + np.asarray(weather.color_shift, dtype=np.float64)
    if weather.noise_sigma > 0:
        img = img + rng.normal(0.0, weather.noise_sigma, size=img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def nearest_class(rgb: np.ndarray) -> np.ndarray:
    """Invert an un-noised identity-weather image back to class ids."""
    diff = rgb[..., None, :].astype(np.float64) - PALETTE
    return np.argmin((diff**2).sum(-1), axis=-1).astype(np.uint8)
