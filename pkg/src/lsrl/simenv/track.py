"""Piecewise straight/arc road geometry, centerline projection and barrier polylines.

Lateral offsets are measured from the road centerline (the lane divider) and
are positive to the left of the direction of travel. Traffic keeps right, so
the driving lane is ``-lane_width <= d <= 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

TRACK_DIR = Path(__file__).resolve().parent.parent / "tracks"
BUNDLED_TRACKS = ("right-turn-barrier", "left-turn-barrier", "straight")


@dataclass(frozen=True)
class Straight:
    length: float

    def __post_init__(self):
        if not self.length > 0:
            raise ValueError("straight length must be positive")


@dataclass(frozen=True)
class Arc:
    radius: float
    sweep: float  # radians
    direction: str  # "left" | "right"

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("arc radius must be positive")
        if not 0 < self.sweep <= 2 * math.pi:
            raise ValueError("arc sweep must lie in (0, 2*pi]")
        if self.direction not in ("left", "right"):
            raise ValueError("arc direction must be 'left' or 'right'")

    @property
    def length(self) -> float:
        return self.radius * self.sweep


@dataclass
class TrackSpec:
    segments: list
    lane_width: float = 3.75
    barrier_edges: list = field(default_factory=list)  # per segment: frozenset of "left"/"right"
    spawn: tuple = (2.0, -1.875, 0.0)
    goal_arclength: float = 0.0
    name: str = "track"
    barrier_offset: float = 0.0  # barrier face distance beyond the road edge

    def __post_init__(self):
        if not self.segments:
            raise ValueError("track needs at least one segment")
        if not self.lane_width > 0:
            raise ValueError("lane_width must be positive")
        if not self.barrier_edges:
            self.barrier_edges = [frozenset() for _ in self.segments]
        if len(self.barrier_edges) != len(self.segments):
            raise ValueError("one barrier flag set per segment required")
        self.barrier_edges = [frozenset(e) for e in self.barrier_edges]
        for edges in self.barrier_edges:
            if not edges <= {"left", "right"}:
                raise ValueError(f"barrier edges must be 'left'/'right', got {set(edges)}")
        self._build()
        d = self.project(np.array([self.spawn[:2]]))[0][0]
        if not -self.lane_width < d < 0:
            raise ValueError("spawn pose must lie strictly inside the driving lane")

    # -- geometry tables -------------------------------------------------------

    def _build(self) -> None:
        x, y, h, s = 0.0, 0.0, 0.0, 0.0
        self._starts = []
        for seg in self.segments:
            self._starts.append((x, y, h, s))
            if isinstance(seg, Straight):
                x += seg.length * math.cos(h)
                y += seg.length * math.sin(h)
            else:
                sign = 1.0 if seg.direction == "left" else -1.0
                cx, cy = x - sign * seg.radius * math.sin(h), y + sign * seg.radius * math.cos(h)
                h2 = h + sign * seg.sweep
                x = cx + sign * seg.radius * math.sin(h2)
                y = cy - sign * seg.radius * math.cos(h2)
                h = h2
            s += seg.length
        self.total_length = s
        self._end = (x, y, h, s)

    def pose_at(self, s: float, lateral: float = 0.0) -> tuple[float, float, float]:
        """World pose at arclength ``s`` with lateral offset (left positive)."""
        s = min(max(s, 0.0), self.total_length)
        for seg, (x, y, h, s0) in zip(self.segments, self._starts):
            if s <= s0 + seg.length or seg is self.segments[-1]:
                t = s - s0
                if isinstance(seg, Straight):
                    px, py, ph = x + t * math.cos(h), y + t * math.sin(h), h
                else:
                    sign = 1.0 if seg.direction == "left" else -1.0
                    cx, cy = x - sign * seg.radius * math.sin(h), y + sign * seg.radius * math.cos(h)
                    ph = h + sign * t / seg.radius
                    px = cx + sign * seg.radius * math.sin(ph)
                    py = cy - sign * seg.radius * math.cos(ph)
                return px - lateral * math.sin(ph), py + lateral * math.cos(ph), ph
        raise AssertionError("unreachable")

    def project(self, pts: np.ndarray):
        """Project (N, 2) world points onto the centerline.

        Returns ``(lateral, arclength, segment_index, clamped)``. The first and
        last segments, when straight, extend past the track ends; ``clamped``
        flags points whose projection falls outside ``[0, total_length]``.
        """
        pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
        n_seg = len(self.segments)
        lat = np.empty((n_seg, len(pts)))
        along = np.empty((n_seg, len(pts)))
        dist = np.empty((n_seg, len(pts)))
        beyond = np.zeros((n_seg, len(pts)), dtype=bool)  # past the first/last segment's free end
        for k, (seg, (x, y, h, s0)) in enumerate(zip(self.segments, self._starts)):
            dx, dy = pts[:, 0] - x, pts[:, 1] - y
            if isinstance(seg, Straight):
                c, sn = math.cos(h), math.sin(h)
                t = dx * c + dy * sn
                d = -dx * sn + dy * c
                lo = -np.inf if k == 0 else 0.0
                hi = np.inf if k == n_seg - 1 else seg.length
                tc = np.clip(t, lo, hi)
                gap = t - tc
                dist[k] = np.hypot(gap, d)
                lat[k] = d
                along[k] = s0 + t
                beyond[k] = (k == 0) & (t < 0) | (k == n_seg - 1) & (t > seg.length)
            else:
                sign = 1.0 if seg.direction == "left" else -1.0
                cx, cy = x - sign * seg.radius * math.sin(h), y + sign * seg.radius * math.cos(h)
                rx, ry = pts[:, 0] - cx, pts[:, 1] - cy
                rho = np.hypot(rx, ry)
                phi0 = math.atan2(y - cy, x - cx)
                phi = np.arctan2(ry, rx)
                # angle travelled from the segment start, in [-pi, 2*pi - pi)
                trav = np.mod(sign * (phi - phi0) + math.pi, 2 * math.pi) - math.pi
                if seg.sweep > math.pi:
                    trav = np.where(trav < 0, trav + 2 * math.pi, trav)
                t = trav * seg.radius
                d = sign * (seg.radius - rho)
                inside = (trav >= 0) & (trav <= seg.sweep)
                ends = np.minimum(
                    np.hypot(pts[:, 0] - x, pts[:, 1] - y),
                    np.hypot(pts[:, 0] - self._end_of(k)[0], pts[:, 1] - self._end_of(k)[1]),
                )
                dist[k] = np.where(inside, np.abs(d), ends)
                lat[k] = d
                along[k] = s0 + np.clip(t, 0.0, seg.length)
                beyond[k] = ~inside & (((k == 0) & (trav < 0)) | ((k == n_seg - 1) & (trav > seg.sweep)))
        best = np.argmin(dist, axis=0)
        cols = np.arange(len(pts))
        arclen = along[best, cols]
        clamped = beyond[best, cols]
        return lat[best, cols], arclen, best, clamped

    def _end_of(self, k: int):
        if k + 1 < len(self._starts):
            return self._starts[k + 1]
        return self._end

    # -- barriers ----------------------------------------------------------------

    def barrier_polylines(self, spacing: float = 0.5) -> list[np.ndarray]:
        """One (M, 2) polyline per flagged segment edge, placed at the barrier face."""
        off = self.lane_width + self.barrier_offset
        lines = []
        for k, (seg, edges) in enumerate(zip(self.segments, self.barrier_edges)):
            s0 = self._starts[k][3]
            n = max(2, int(math.ceil(seg.length / spacing)) + 1)
            ss = np.linspace(s0, s0 + seg.length, n)
            for edge in sorted(edges):
                lateral = off if edge == "left" else -off
                lines.append(np.array([self.pose_at(s, lateral)[:2] for s in ss]))
        return lines

    def barrier_sides(self, seg_index: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Boolean (left, right) barrier flags for each segment index."""
        left = np.array(["left" in e for e in self.barrier_edges])
        right = np.array(["right" in e for e in self.barrier_edges])
        return left[seg_index], right[seg_index]


# -- text format ------------------------------------------------------------------


def parse_track(text: str, name: str = "track") -> TrackSpec:
    """Parse the line-based track format.

    ::

        name right-turn-barrier
        lane_width 3.75
        spawn 2.0 -1.875 0.0
        goal 64.0
        straight 12 barrier=left
        arc 30 90 right barrier=left      # radius, sweep in degrees, direction
    """
    segments, barriers = [], []
    kw: dict = {"name": name}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        head, args = parts[0], parts[1:]
        flags = [a for a in args if "=" in a]
        args = [a for a in args if "=" not in a]
        edges: Iterable[str] = ()
        for flag in flags:
            key, _, val = flag.partition("=")
            if key != "barrier":
                raise ValueError(f"line {lineno}: unknown option {key!r}")
            edges = [e for e in val.split(",") if e]
        try:
            if head == "name":
                kw["name"] = args[0]
            elif head == "lane_width":
                kw["lane_width"] = float(args[0])
            elif head == "barrier_offset":
                kw["barrier_offset"] = float(args[0])
            elif head == "spawn":
                kw["spawn"] = tuple(float(a) for a in args[:3])
            elif head == "goal":
                kw["goal_arclength"] = float(args[0])
            elif head == "straight":
                segments.append(Straight(float(args[0])))
                barriers.append(frozenset(edges))
            elif head == "arc":
                segments.append(Arc(float(args[0]), math.radians(float(args[1])), args[2]))
                barriers.append(frozenset(edges))
            else:
                raise ValueError(f"unknown directive {head!r}")
        except (IndexError, ValueError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc
    return TrackSpec(segments=segments, barrier_edges=barriers, **kw)


def load_track(name_or_path: str | Path) -> TrackSpec:
    """Load a bundled track by name or a track file by path."""
    path = Path(name_or_path)
    if not path.exists():
        bundled = TRACK_DIR / f"{name_or_path}.track"
        if not bundled.exists():
            raise FileNotFoundError(f"no track file or bundled track named {name_or_path!r}")
        path = bundled
    return parse_track(path.read_text(), name=path.stem)
