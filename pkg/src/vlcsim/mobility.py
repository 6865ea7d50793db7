"""Ground-truth receiver trajectories and the cell-gain throughput metric."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .scenario import AccessPoint, Room, Vec2

MODEL_WAYPOINTS = "waypoints"
MODEL_LINE = "line"
MODEL_RANDOM_WAYPOINT = "random_waypoint"


class MobilityError(ValueError):
    pass


@dataclass
class Trajectory:
    model: str
    speed_mps: float
    waypoints: List[Vec2] = field(default_factory=list)
    seed: Optional[int] = None
    bounds: Optional[Tuple[float, float, float, float]] = None  # xmin,xmax,ymin,ymax

    def __post_init__(self):
        if self.speed_mps < 0:
            raise MobilityError("speed_mps must be >= 0")
        if self.model in (MODEL_WAYPOINTS, MODEL_LINE):
            if not self.waypoints:
                raise MobilityError("waypoints required")
        elif self.model == MODEL_RANDOM_WAYPOINT:
            if self.bounds is None:
                raise MobilityError("random_waypoint requires bounds")
            if self.seed is None:
                raise MobilityError("random_waypoint requires a seed")
            if not self.waypoints:
                rng = np.random.default_rng(self.seed)
                xmin, xmax, ymin, ymax = self.bounds
                self.waypoints = [
                    (float(rng.uniform(xmin, xmax)), float(rng.uniform(ymin, ymax)))
                ]
                self._rng = rng
        else:
            raise MobilityError(f"unknown mobility model {self.model!r}")

    def _extend_random(self, needed_length: float) -> None:
        # draw further waypoints until the cumulative path covers needed_length
        xmin, xmax, ymin, ymax = self.bounds
        total = _path_length(self.waypoints)
        while total < needed_length:
            nxt = (float(self._rng.uniform(xmin, xmax)), float(self._rng.uniform(ymin, ymax)))
            total += math.dist(self.waypoints[-1], nxt)
            self.waypoints.append(nxt)


def _path_length(pts: Sequence[Vec2]) -> float:
    return sum(math.dist(a, b) for a, b in zip(pts, pts[1:]))


def position_at(traj: Trajectory, t: float) -> Vec2:
    """Piecewise-linear position along the waypoints at constant speed.

    Fixed-waypoint devices stop at the final waypoint; random-waypoint
    devices keep drawing destinations from the trajectory's seeded stream.
    """
    if t < 0:
        raise MobilityError("t must be >= 0")
    dist_along = traj.speed_mps * t
    if traj.model == MODEL_RANDOM_WAYPOINT:
        traj._extend_random(dist_along + 1e-9)
    pts = traj.waypoints
    if traj.speed_mps == 0 or len(pts) == 1:
        return pts[0]
    remaining = dist_along
    for a, b in zip(pts, pts[1:]):
        seg = math.dist(a, b)
        if remaining <= seg or seg == 0.0:
            if seg == 0.0:
                continue
            f = remaining / seg
            return (a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1]))
        remaining -= seg
    return pts[-1]


@dataclass(frozen=True)
class ConnectivitySample:
    t: float
    connected_s: float  # seconds of unbroken service within this sample
    xy: Vec2
    ap_id: Optional[int]


def cell_gain(samples: Sequence[ConnectivitySample], ap: AccessPoint) -> float:
    """Bits received from one AP while traversing its lighting cell.

    Counts only time connected to this AP while within its coverage radius;
    disruption intervals are already excluded from connected_s.
    """
    time_in_cell = 0.0
    for s in samples:
        if s.ap_id != ap.id:
            continue
        if math.dist(s.xy, ap.pos_xy) <= ap.coverage_radius_m:
            time_in_cell += s.connected_s
    return ap.data_rate_bps * time_in_cell


def export_trajectory_csv(
    traj: Trajectory, duration_s: float, step_s: float, comment: Optional[str] = None
) -> str:
    """Trajectory export as 't,x,y' rows at superframe resolution."""
    lines: List[str] = []
    if comment:
        lines.append(f"# {comment}")
    lines.append("t,x,y")
    n = int(round(duration_s / step_s))
    for k in range(n + 1):
        t = k * step_s
        x, y = position_at(traj, t)
        lines.append(f"{t:.9g},{x:.9g},{y:.9g}")
    return "\n".join(lines) + "\n"
