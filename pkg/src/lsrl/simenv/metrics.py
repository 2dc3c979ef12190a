"""Lane occupancy, reward and episode termination."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from lsrl.simenv.track import TrackSpec
from lsrl.simenv.vehicle import (
    MAX_EPISODE_STEPS,
    CarState,
    VehicleParams,
    footprint_corners,
    footprint_samples,
)

OFF_ROAD_PENALTY = -5.0  # R_r
FOOTPRINT_SAMPLES = 16

RUNNING, CRASH, OFFROAD, TIMEOUT = "running", "crash", "offroad", "timeout"


@dataclass(frozen=True)
class LaneMetrics:
    l: float  # fraction of the footprint in the opposite lane
    r: float  # fraction of the footprint off-road
    clamped: bool = False

    def __post_init__(self):
        if not (0 <= self.l <= 1 and 0 <= self.r <= 1 and self.l + self.r <= 1 + 1e-12):
            raise ValueError(f"invalid lane metrics l={self.l}, r={self.r}")


def lane_metrics(
    state: CarState, track: TrackSpec, params: VehicleParams, k: int = FOOTPRINT_SAMPLES
) -> LaneMetrics:
    pts = footprint_samples(state, params, k)
    d, _, _, clamped = track.project(pts)
    w = track.lane_width
    off_road = np.abs(d) > w
    opposite = (d > 0) & ~off_road
    n = len(pts)
    return LaneMetrics(float(opposite.sum()) / n, float(off_road.sum()) / n, bool(clamped.any()))


def reward(m: LaneMetrics, r_r: float = OFF_ROAD_PENALTY) -> float:
    """1 in lane, otherwise 1 + alpha*l + beta*r with alpha=(R_r-1)*l, beta=4*(R_r-1)*r."""
    if m.l == 0 and m.r == 0:
        return 1.0
    alpha = (r_r - 1.0) * m.l
    beta = 4.0 * (r_r - 1.0) * m.r
    return 1.0 + alpha * m.l + beta * m.r


def _segments_intersect(p1, p2, q1, q2) -> np.ndarray:
    """Pairwise closed-segment intersection between (A,2) segments p and (B,2) segments q."""

    def orient(a, b, c):
        return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (b[..., 1] - a[..., 1]) * (
            c[..., 0] - a[..., 0]
        )

    p1, p2 = p1[:, None, :], p2[:, None, :]
    q1, q2 = q1[None, :, :], q2[None, :, :]
    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    proper = (d1 * d2 <= 0) & (d3 * d4 <= 0)
    # collinear segments need overlapping bounding boxes
    collinear = (d1 == 0) & (d2 == 0)
    if collinear.any():
        overlap = (
            (np.minimum(p1[..., 0], p2[..., 0]) <= np.maximum(q1[..., 0], q2[..., 0]))
            & (np.minimum(q1[..., 0], q2[..., 0]) <= np.maximum(p1[..., 0], p2[..., 0]))
            & (np.minimum(p1[..., 1], p2[..., 1]) <= np.maximum(q1[..., 1], q2[..., 1]))
            & (np.minimum(q1[..., 1], q2[..., 1]) <= np.maximum(p1[..., 1], p2[..., 1]))
        )
        proper = np.where(collinear, overlap, proper)
    return proper


def _points_in_rect(pts: np.ndarray, corners: np.ndarray) -> np.ndarray:
    a, b, d = corners[0], corners[1], corners[3]
    ab, ad = b - a, d - a
    rel = pts - a
    u = rel @ ab / (ab @ ab)
    v = rel @ ad / (ad @ ad)
    return (u >= 0) & (u <= 1) & (v >= 0) & (v <= 1)


def footprint_hits_barrier(corners: np.ndarray, polylines: list[np.ndarray]) -> bool:
    edges_a = corners
    edges_b = np.roll(corners, -1, axis=0)
    centre = corners.mean(axis=0)
    reach = np.linalg.norm(corners[0] - centre) + 1.0
    for line in polylines:
        near = np.linalg.norm(line - centre, axis=1) < reach + 1.0
        if not near.any():
            continue
        idx = np.flatnonzero(near)
        lo, hi = max(idx.min() - 1, 0), min(idx.max() + 2, len(line))
        seg = line[lo:hi]
        if _points_in_rect(seg, corners).any():
            return True
        if len(seg) >= 2 and _segments_intersect(edges_a, edges_b, seg[:-1], seg[1:]).any():
            return True
    return False


def check_termination(
    state: CarState,
    m: LaneMetrics,
    track: TrackSpec,
    params: VehicleParams | None = None,
    polylines: list[np.ndarray] | None = None,
) -> str:
    params = params or VehicleParams()
    if polylines is None:
        polylines = track.barrier_polylines()
    if polylines and footprint_hits_barrier(footprint_corners(state, params), polylines):
        return CRASH
    if m.r > 0.5:
        return OFFROAD
    if state.step_count >= MAX_EPISODE_STEPS:
        return TIMEOUT
    return RUNNING
