import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lsrl import semantics as sem
from lsrl.simenv import (
    CRASH,
    IDENTITY_WEATHER,
    OFFROAD,
    PALETTE,
    RUNNING,
    TIMEOUT,
    WEATHERS,
    Arc,
    CarState,
    DrivingEnv,
    EpisodeDone,
    LaneMetrics,
    Straight,
    TrackSpec,
    VehicleParams,
    WeatherPreset,
    advance_kinematics,
    check_termination,
    lane_metrics,
    load_track,
    parse_track,
    render_rgb,
    render_semantic,
    reset,
    reward,
)
from lsrl.simenv.render import VIEW_METERS, nearest_class

PARAMS = VehicleParams()
STRAIGHT = TrackSpec([Straight(200.0)])


def _state(x=20.0, y=-1.875, h=0.0, step=0):
    return CarState(x, y, h, 0.0, step)


# -- kinematics ------------------------------------------------------------------


def test_straight_line_step():
    s = advance_kinematics(_state(0.0, 0.0), 0.0, PARAMS)
    assert s.heading == 0.0
    assert s.x == pytest.approx(5.0 * 0.05)
    assert s.y == 0.0 and s.step_count == 1


def test_heading_rate_closed_form():
    s = advance_kinematics(_state(0.0, 0.0), 0.4, PARAMS)
    assert s.heading == pytest.approx(2.0 * math.tan(0.4) * 0.05, abs=1e-15)
    assert s.heading == pytest.approx(0.042279, abs=1e-6)


@given(st.floats(-1.5, 1.5), st.floats(-math.pi, math.pi))
def test_steering_mirror_symmetry(delta, h0):
    base = _state(1.0, 2.0, h0)
    a = advance_kinematics(base, delta, PARAMS)
    b = advance_kinematics(base, -delta, PARAMS)
    assert a.heading - h0 == pytest.approx(-(b.heading - h0), abs=1e-12)


def test_steering_limit():
    with pytest.raises(ValueError):
        advance_kinematics(_state(), math.pi / 2, PARAMS)


def test_vehicle_params_positive():
    with pytest.raises(ValueError):
        VehicleParams(dt=0.0)


# -- lane metrics ------------------------------------------------------------------


def test_lane_metrics_examples():
    assert lane_metrics(_state(y=-1.875), STRAIGHT, PARAMS) == LaneMetrics(0.0, 0.0)
    assert lane_metrics(_state(y=1.875), STRAIGHT, PARAMS) == LaneMetrics(1.0, 0.0)
    m = lane_metrics(_state(y=0.0), STRAIGHT, PARAMS)
    assert abs(m.l - 0.5) <= 1 / 16 and m.r == 0.0


def _overlap(lo, hi, a, b):
    return max(0.0, min(hi, b) - max(lo, a))


@given(st.floats(-6.0, 6.0))
def test_lane_metrics_match_analytic_fractions(y):
    w, half = 3.75, PARAMS.footprint_width / 2
    lo, hi = y - half, y + half
    l_true = _overlap(lo, hi, 0.0, w) / PARAMS.footprint_width
    r_true = (_overlap(lo, hi, w, np.inf) + _overlap(lo, hi, -np.inf, -w)) / PARAMS.footprint_width
    m = lane_metrics(_state(y=y), STRAIGHT, PARAMS)
    assert abs(m.l - l_true) <= 2 / 16
    assert abs(m.r - r_true) <= 2 / 16
    assert m.l + m.r <= 1


def test_lane_metrics_flag_clamped_poses():
    track = TrackSpec([Arc(20.0, math.pi / 2, "left")], spawn=(0.5, -1.875, 0.0))
    assert not lane_metrics(_state(x=3.0, y=-1.875, h=0.15), track, PARAMS).clamped
    assert lane_metrics(_state(x=-10.0, y=-1.875), track, PARAMS).clamped
    # past the end of the quarter turn (which finishes heading north at (20, 20))
    assert lane_metrics(_state(x=21.875, y=30.0, h=math.pi / 2), track, PARAMS).clamped


def test_lane_metrics_validation():
    with pytest.raises(ValueError):
        LaneMetrics(0.7, 0.6)


# -- reward ----------------------------------------------------------------------


def test_reward_anchors():
    assert reward(LaneMetrics(0, 0)) == 1.0
    assert reward(LaneMetrics(1, 0)) == pytest.approx(-5.0, abs=1e-12)
    assert reward(LaneMetrics(0, 0.5)) == pytest.approx(-5.0, abs=1e-12)
    assert reward(LaneMetrics(0.5, 0)) == pytest.approx(-0.5, abs=1e-12)


_frac = st.one_of(st.just(0.0), st.floats(1e-6, 1.0))


@given(_frac, _frac)
def test_reward_bounded_and_quadratic(l, r):
    if l + r > 1:
        l, r = l / (l + r), r / (l + r)
    m = LaneMetrics(l, r)
    val = reward(m)
    assert math.isfinite(val)
    assert val <= 1.0
    assert val == pytest.approx(1 - 6 * l * l - 24 * r * r, abs=1e-12)
    assert (val == 1.0) == (l == 0 and r == 0)


# -- termination ----------------------------------------------------------------------


def test_termination_cases():
    barrier_track = TrackSpec([Straight(100.0)], barrier_edges=[{"right"}])
    on_barrier = _state(y=-3.75)
    m = lane_metrics(on_barrier, barrier_track, PARAMS)
    assert check_termination(on_barrier, m, barrier_track, PARAMS) == CRASH
    assert check_termination(_state(), LaneMetrics(0.0, 0.6), STRAIGHT, PARAMS) == OFFROAD
    assert check_termination(_state(step=500), LaneMetrics(0, 0), STRAIGHT, PARAMS) == TIMEOUT
    assert check_termination(_state(step=499), LaneMetrics(0, 0), STRAIGHT, PARAMS) == RUNNING
    # half off-road is not yet terminal
    assert check_termination(_state(), LaneMetrics(0.0, 0.5), STRAIGHT, PARAMS) == RUNNING


def test_crash_reported_before_offroad():
    barrier_track = TrackSpec([Straight(100.0)], barrier_edges=[{"right"}])
    s = _state(y=-4.0)
    assert check_termination(s, LaneMetrics(0.0, 0.9), barrier_track, PARAMS) == CRASH


# -- track -----------------------------------------------------------------------------


def test_bundled_tracks_g1_continuous():
    for name in ("right-turn-barrier", "left-turn-barrier", "straight"):
        track = load_track(name)
        s = 0.0
        for seg in track.segments[:-1]:
            s += seg.length
            a, b = track.pose_at(s - 1e-7), track.pose_at(s + 1e-7)
            assert math.dist(a[:2], b[:2]) < 1e-5
            assert abs(a[2] - b[2]) < 1e-5


def test_projection_round_trip():
    track = load_track("right-turn-barrier")
    rng = np.random.default_rng(0)
    for _ in range(50):
        s, d = rng.uniform(0, track.total_length), rng.uniform(-7, 7)
        x, y, _ = track.pose_at(s, d)
        lat, arc, _, _ = track.project(np.array([[x, y]]))
        assert lat[0] == pytest.approx(d, abs=1e-9)
        assert arc[0] == pytest.approx(s, abs=1e-9)


def test_track_validation():
    with pytest.raises(ValueError):
        Straight(0.0)
    with pytest.raises(ValueError):
        Arc(10.0, 7.0, "left")
    with pytest.raises(ValueError):
        TrackSpec([Straight(10.0)], spawn=(2.0, 1.0, 0.0))  # opposite lane
    with pytest.raises(ValueError):
        parse_track("straight 10\nzigzag 3\n")
    with pytest.raises(FileNotFoundError):
        load_track("no-such-track")


def test_parse_track_format():
    track = parse_track("name t\nlane_width 3.5\nspawn 1 -1 0\ngoal 10\nstraight 5\narc 10 45 left barrier=right\n")
    assert track.name == "t" and track.lane_width == 3.5
    assert track.goal_arclength == 10.0
    assert track.segments[1] == Arc(10.0, math.radians(45), "left")
    assert track.barrier_edges == [frozenset(), frozenset({"right"})]


# -- rendering -------------------------------------------------------------------------


def test_render_symmetric_about_divider():
    grid = render_semantic(_state(y=0.0), STRAIGHT)
    assert np.array_equal(grid, grid[:, ::-1])
    grid = render_semantic(_state(y=0.0), STRAIGHT, draw_ego=False)
    assert np.all(grid[:, 31] == sem.ROAD_LINE) and np.all(grid[:, 32] == sem.ROAD_LINE)


def test_render_deterministic():
    s = _state(y=-1.2, h=0.1)
    track = load_track("right-turn-barrier")
    assert np.array_equal(render_semantic(s, track), render_semantic(s, track))


def _divider_columns(grid, row=2):
    return np.flatnonzero(grid[row] == sem.ROAD_LINE)


def test_lane_shift_moves_divider():
    a = render_semantic(_state(y=-1.875), STRAIGHT, draw_ego=False)
    b = render_semantic(_state(y=1.875), STRAIGHT, draw_ego=False)
    shift = 3.75 / (VIEW_METERS / 64)
    assert _divider_columns(b).mean() - _divider_columns(a).mean() == pytest.approx(shift, abs=1e-9)


def test_render_ego_vehicle_present():
    grid = render_semantic(_state(), STRAIGHT)
    assert (grid == sem.VEHICLE).sum() > 0
    assert (render_semantic(_state(), STRAIGHT, draw_ego=False) == sem.VEHICLE).sum() == 0


def test_render_barrier_visible():
    track = TrackSpec([Straight(100.0)], barrier_edges=[{"left"}])
    grid = render_semantic(_state(), track)
    assert (grid == sem.FENCE_BARRIER).any()
    assert not (render_semantic(_state(), STRAIGHT) == sem.FENCE_BARRIER).any()


def test_render_rgb_identity_and_gain():
    grid = np.random.default_rng(0).integers(0, 13, size=(8, 8))
    rng = np.random.default_rng(1)
    assert np.array_equal(render_rgb(grid, IDENTITY_WEATHER, rng), PALETTE[grid].astype(np.uint8))
    palette = np.full((13, 3), 50.0)
    out = render_rgb(np.zeros((2, 2), int), WeatherPreset("x", brightness_gain=2.0), rng, palette)
    assert np.all(out == 100)


def test_render_rgb_clamps_and_is_seeded():
    grid = np.random.default_rng(0).integers(0, 13, size=(16, 16))
    bright = WeatherPreset("x", 5.0, (0, 0, 0), 0.0)
    assert render_rgb(grid, bright, np.random.default_rng(0)).max() == 255
    a = render_rgb(grid, WEATHERS["night"], np.random.default_rng(4))
    b = render_rgb(grid, WEATHERS["night"], np.random.default_rng(4))
    assert np.array_equal(a, b)


def test_weather_validation():
    with pytest.raises(ValueError):
        WeatherPreset("x", brightness_gain=0.0)
    with pytest.raises(ValueError):
        WeatherPreset("x", noise_sigma=-1.0)


@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1))
def test_noise_free_rgb_inverts_to_semantics(seed):
    grid = np.random.default_rng(seed).integers(0, 13, size=(10, 10))
    rgb = render_rgb(grid, IDENTITY_WEATHER, np.random.default_rng(0))
    assert np.array_equal(nearest_class(rgb), grid)


def test_palette_colours_distinct():
    d = np.linalg.norm(PALETTE[:, None, :].astype(float) - PALETTE[None, :, :], axis=-1)
    assert d[~np.eye(13, dtype=bool)].min() > 30


# -- environment ------------------------------------------------------------------------


def test_reset_state():
    track = load_track("straight")
    st0 = reset(track)
    assert (st0.x, st0.y, st0.heading, st0.step_count) == (2.0, -1.875, 0.0, 0)
    res = DrivingEnv(track).reset()
    assert res.metrics == LaneMetrics(0.0, 0.0)
    assert not res.done and res.reason == RUNNING
    assert res.rgb.shape == (64, 64, 3) and res.rgb.dtype == np.uint8


def test_full_in_lane_episode_returns_500():
    env = DrivingEnv(load_track("straight"), seed=0)
    env.reset()
    total, steps = 0.0, 0
    while True:
        res = env.step(1)
        total += res.reward
        steps += 1
        assert res.reward == 1.0
        if res.done:
            break
    assert steps == 500 and res.reason == TIMEOUT
    assert total == 500.0
    assert env.goal_reached
    with pytest.raises(EpisodeDone):
        env.step(1)


def test_invalid_action():
    env = DrivingEnv(load_track("straight"))
    env.reset()
    with pytest.raises(ValueError):
        env.step(3)


def test_crash_step_reward():
    track = load_track("left-turn-barrier")
    rewards = {}
    for crash_reward in (-5.0, None):
        env = DrivingEnv(track, crash_reward=crash_reward)
        env.reset()
        while not (res := env.step(1)).done:
            pass
        assert res.reason == CRASH
        rewards[crash_reward] = res.reward
    assert rewards[-5.0] == -5.0
    assert rewards[None] == pytest.approx(reward(res.metrics))


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_random_episodes_terminate_and_keep_done_contract(seed):
    env = DrivingEnv(load_track("right-turn-barrier"), seed=seed)
    rng = np.random.default_rng(seed)
    env.reset()
    for k in range(1, 501):
        res = env.step(int(rng.integers(3)))
        assert res.done == (res.reason != RUNNING)
        assert res.reward <= 1.0
        if res.done:
            break
    assert res.done and k <= 500


def test_env_seeding_reproducible():
    def trace(seed):
        env = DrivingEnv(load_track("right-turn-barrier"), seed=seed)
        res = env.reset()
        frames = [res.rgb]
        for a in (0, 1, 2, 1):
            frames.append(env.step(a).rgb)
        return np.stack(frames), env.weather.id

    a, wa = trace(5)
    b, wb = trace(5)
    assert wa == wb and np.array_equal(a, b)
