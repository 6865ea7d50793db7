"""Coordinator-side path history, next-position extrapolation, and the
pre-scanned best-transmitter database with failure-triggered refresh."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .channel import GridMap, los_power, reflection_power
from .scenario import Scenario, Vec2

DEFAULT_ALPHA = 0.5
DEFAULT_CELL_SIZE_M = 0.5


class PredictionError(ValueError):
    pass


@dataclass
class PathReport:
    device_id: str
    capacity: int = 32
    entries: List[Tuple[int, Vec2]] = field(default_factory=list)

    def append(self, superframe_index: int, xy: Vec2) -> None:
        if self.entries and superframe_index <= self.entries[-1][0]:
            raise PredictionError("superframe_index must be strictly increasing")
        self.entries.append((superframe_index, xy))
        if len(self.entries) > self.capacity:
            del self.entries[: len(self.entries) - self.capacity]


def predict_next(path: PathReport, alpha: float = DEFAULT_ALPHA) -> Vec2:
    """Extrapolate from the last two estimates: p2 + alpha * (p2 - p1).

    alpha = 0.5 reproduces the half-step update; alpha = 1 is pure
    constant-velocity extrapolation.
    """
    if len(path.entries) < 2:
        raise PredictionError("insufficient history")
    (_, (x1, y1)), (_, (x2, y2)) = path.entries[-2], path.entries[-1]
    return (x2 + alpha * (x2 - x1), y2 + alpha * (y2 - y1))


def predict_next_k(path: PathReport, k: int) -> Vec2:
    """Least-squares straight-line fit over the last k estimates, extrapolated
    one superframe ahead.  k = 2 reduces to predict_next with alpha = 1."""
    if k < 2:
        raise PredictionError("k must be >= 2")
    if len(path.entries) < k:
        raise PredictionError("insufficient history")
    pts = path.entries[-k:]
    ts = [float(i) for i, _ in pts]
    t_next = pts[-1][0] + (pts[-1][0] - pts[-2][0])
    t_mean = sum(ts) / k
    var = sum((t - t_mean) ** 2 for t in ts)
    out = []
    for axis in (0, 1):
        vals = [p[axis] for _, p in pts]
        v_mean = sum(vals) / k
        slope = sum((t - t_mean) * (v - v_mean) for t, v in zip(ts, vals)) / var
        out.append(v_mean + slope * (t_next - t_mean))
    return (out[0], out[1])


@dataclass
class BestApDatabase:
    cell_size_m: float
    origin_xy: Vec2
    n_cells: Tuple[int, int]
    grid: Dict[Tuple[int, int], int]
    failure_counts: Dict[Tuple[int, int], int] = field(default_factory=dict)

    def cell_of(self, xy: Vec2) -> Tuple[int, int]:
        ix = int(math.floor((xy[0] - self.origin_xy[0]) / self.cell_size_m))
        iy = int(math.floor((xy[1] - self.origin_xy[1]) / self.cell_size_m))
        ix = min(max(ix, 0), self.n_cells[0] - 1)
        iy = min(max(iy, 0), self.n_cells[1] - 1)
        return (ix, iy)

    def cell_center(self, cell: Tuple[int, int]) -> Vec2:
        return (
            self.origin_xy[0] + (cell[0] + 0.5) * self.cell_size_m,
            self.origin_xy[1] + (cell[1] + 0.5) * self.cell_size_m,
        )


def _noiseless_power(ap, xy: Vec2, scenario: Scenario) -> float:
    p = los_power(ap, xy, scenario.channel, scenario.room)
    if scenario.channel.reflections_enabled:
        p += reflection_power(ap, xy, scenario.channel, scenario.room)
    return p


def _argmax_ap(xy: Vec2, scenario: Scenario, exclude: Optional[int] = None) -> int:
    best_id, best_p = None, -1.0
    for ap in scenario.aps_sorted:  # ascending id: ties keep the lowest id
        if ap.id == exclude:
            continue
        p = _noiseless_power(ap, xy, scenario)
        if p > best_p:
            best_id, best_p = ap.id, p
    if best_id is None:
        raise PredictionError("no access point available")
    return best_id


def build_database(scenario: Scenario, cell_size_m: float = DEFAULT_CELL_SIZE_M) -> BestApDatabase:
    """Best (noiseless strongest) AP per grid cell over the room footprint."""
    if cell_size_m <= 0:
        raise PredictionError("cell_size_m must be > 0")
    room = scenario.room
    nx = max(1, int(math.ceil(room.width_m / cell_size_m - 1e-9)))
    ny = max(1, int(math.ceil(room.depth_m / cell_size_m - 1e-9)))
    origin = (-room.half_width, -room.half_depth)
    db = BestApDatabase(cell_size_m=cell_size_m, origin_xy=origin, n_cells=(nx, ny), grid={})
    for ix in range(nx):
        for iy in range(ny):
            center = db.cell_center((ix, iy))
            db.grid[(ix, iy)] = _argmax_ap(center, scenario)
    return db


def lookup_best_ap(db: BestApDatabase, xy: Vec2) -> int:
    return db.grid[db.cell_of(xy)]


def record_switch_outcome(
    db: BestApDatabase, xy: Vec2, success: bool, scenario: Scenario
) -> BestApDatabase:
    """Success resets the cell's failure count; the third consecutive failure
    replaces the cell's entry with the best AP excluding the failed one."""
    cell = db.cell_of(xy)
    if success:
        db.failure_counts[cell] = 0
        return db
    count = db.failure_counts.get(cell, 0) + 1
    if count >= 3:
        failed = db.grid[cell]
        db.grid[cell] = _argmax_ap(db.cell_center(cell), scenario, exclude=failed)
        db.failure_counts[cell] = 0
    else:
        db.failure_counts[cell] = count
    return db


def database_to_gridmap(db: BestApDatabase) -> GridMap:
    """Export as a cell-center grid with value = ap_id."""
    import numpy as np

    nx, ny = db.n_cells
    values = np.empty((nx, ny))
    for (ix, iy), ap_id in db.grid.items():
        values[ix, iy] = ap_id
    origin = db.cell_center((0, 0))
    return GridMap(origin_xy=origin, step_m=db.cell_size_m, values=values)


def database_from_gridmap(gm: GridMap, room_half: Vec2) -> BestApDatabase:
    nx, ny = gm.values.shape
    origin = (gm.origin_xy[0] - 0.5 * gm.step_m, gm.origin_xy[1] - 0.5 * gm.step_m)
    grid = {
        (ix, iy): int(round(float(gm.values[ix, iy])))
        for ix in range(nx)
        for iy in range(ny)
    }
    return BestApDatabase(
        cell_size_m=gm.step_m, origin_xy=origin, n_cells=(nx, ny), grid=grid
    )
