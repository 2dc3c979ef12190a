from lsrl.simenv.env import DrivingEnv, EpisodeDone, StepResult, reset
from lsrl.simenv.metrics import (
    CRASH,
    OFFROAD,
    RUNNING,
    TIMEOUT,
    LaneMetrics,
    check_termination,
    lane_metrics,
    reward,
)
from lsrl.simenv.render import (
    IDENTITY_WEATHER,
    PALETTE,
    WEATHERS,
    WeatherPreset,
    get_weather,
    render_rgb,
    render_semantic,
)
from lsrl.simenv.track import Arc, Straight, TrackSpec, load_track, parse_track
from lsrl.simenv.vehicle import (
    MAX_EPISODE_STEPS,
    STEERING_ACTIONS,
    CarState,
    VehicleParams,
    advance_kinematics,
)

__all__ = [
    "Arc", "CRASH", "CarState", "DrivingEnv", "EpisodeDone", "IDENTITY_WEATHER", "LaneMetrics",
    "MAX_EPISODE_STEPS", "OFFROAD", "PALETTE", "RUNNING", "STEERING_ACTIONS", "Straight",
    "StepResult", "TIMEOUT", "TrackSpec", "VehicleParams", "WEATHERS", "WeatherPreset",
    "advance_kinematics", "check_termination", "get_weather", "lane_metrics", "load_track",
    "parse_track", "render_rgb", "render_semantic", "reset", "reward",
]
