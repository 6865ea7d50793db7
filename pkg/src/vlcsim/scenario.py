"""Static indoor world: room geometry, LED access points, channel constants.

Coordinate frame: origin at the room center on the receiver plane.  The
receiver plane is z = 0 and the LED plane sits at
z = room.receiver_plane_separation_m.  All AP positions are (x, y) on the
LED plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

Vec2 = Tuple[float, float]


class ScenarioError(ValueError):
    """A scenario invariant is violated; message names the first violation."""


# Documented simulator defaults, all config-overridable.  They are
# calibrated so the shipped 9-AP layout meets the 300-1500 lx band on a
# 0.25 m grid and so every in-room point sees at least three access points.
DEFAULT_LAMBERTIAN_ORDER = 0.5
DEFAULT_FOV_SEMI_ANGLE_RAD = math.radians(85.0)
DEFAULT_RESPONSIVITY_A_PER_W = 0.54
DEFAULT_REFLECTANCE = 0.8
# side 0.3 m divides both the wall length and the reflective band height, so
# grid refinement by area-quartering produces nested patch grids
DEFAULT_WALL_PATCH_AREA_M2 = 0.09
DEFAULT_TX_POWER_W = 1.0
DEFAULT_DATA_RATE_BPS = 10e6
DEFAULT_COVERAGE_RADIUS_M = 4.0

# Center luminous intensity per LED, in candela.  Calibrated by bisection so
# that the summed horizontal illuminance of the default layout lies inside
# [300, 1500] lx at every 0.25 m grid point (see tests/test_acceptance.py).
CALIBRATED_I0_CD = 3900.0


@dataclass(frozen=True)
class Room:
    width_m: float
    depth_m: float
    height_m: float
    receiver_plane_separation_m: float

    @property
    def half_width(self) -> float:
        return self.width_m / 2.0

    @property
    def half_depth(self) -> float:
        return self.depth_m / 2.0

    def contains_xy(self, xy: Vec2) -> bool:
        x, y = xy
        return abs(x) <= self.half_width + 1e-12 and abs(y) <= self.half_depth + 1e-12

    def clamp_xy(self, xy: Vec2) -> Vec2:
        x, y = xy
        return (
            min(max(x, -self.half_width), self.half_width),
            min(max(y, -self.half_depth), self.half_depth),
        )


@dataclass(frozen=True)
class AccessPoint:
    id: int
    pos_xy: Vec2
    tx_power_w: float = DEFAULT_TX_POWER_W
    luminous_intensity_cd: float = CALIBRATED_I0_CD
    data_rate_bps: float = DEFAULT_DATA_RATE_BPS
    coverage_radius_m: float = DEFAULT_COVERAGE_RADIUS_M


@dataclass(frozen=True)
class ChannelParams:
    lambertian_order: float = DEFAULT_LAMBERTIAN_ORDER
    filter_gain: float = 1.0
    concentrator_gain: float = 1.0
    fov_semi_angle_rad: float = DEFAULT_FOV_SEMI_ANGLE_RAD
    responsivity_a_per_w: float = DEFAULT_RESPONSIVITY_A_PER_W
    noise_sigma_a: float = 0.0
    reflectance: float = DEFAULT_REFLECTANCE
    wall_patch_area_m2: float = DEFAULT_WALL_PATCH_AREA_M2
    reflections_enabled: bool = False


@dataclass(frozen=True)
class Scenario:
    room: Room
    aps: Tuple[AccessPoint, ...]
    channel: ChannelParams

    def ap_by_id(self, ap_id: int) -> AccessPoint:
        for ap in self.aps:
            if ap.id == ap_id:
                return ap
        raise KeyError(f"unknown access point id {ap_id}")

    @property
    def aps_sorted(self) -> Tuple[AccessPoint, ...]:
        return tuple(sorted(self.aps, key=lambda a: a.id))


# AP layout of the 12x12 m reference room: a 3x3 grid at x,y in {-5, 0, 5},
# listed in the source ordering.
_DEFAULT_AP_POSITIONS: Sequence[Vec2] = (
    (-5.0, -5.0),
    (-5.0, 5.0),
    (5.0, -5.0),
    (5.0, 5.0),
    (-5.0, 0.0),
    (5.0, 0.0),
    (0.0, -5.0),
    (0.0, 5.0),
    (0.0, 0.0),
)


def default_scenario() -> Scenario:
    """The reference scenario: 12x12x3 m room, 1.8 m plane separation, 9 APs."""
    room = Room(
        width_m=12.0,
        depth_m=12.0,
        height_m=3.0,
        receiver_plane_separation_m=1.8,
    )
    aps = tuple(
        AccessPoint(id=i + 1, pos_xy=pos) for i, pos in enumerate(_DEFAULT_AP_POSITIONS)
    )
    return Scenario(room=room, aps=aps, channel=ChannelParams())


def _collinear(a: Vec2, b: Vec2, c: Vec2, tol: float = 1e-9) -> bool:
    cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    return abs(cross) <= tol


def has_non_collinear_triple(points: Sequence[Vec2]) -> bool:
    n = len(points)
    for i in range(n):
        for j in range(i + 1, n):
            for k in range(j + 1, n):
                if not _collinear(points[i], points[j], points[k]):
                    return True
    return False


def validate(s: Scenario) -> Scenario:
    """Return s unchanged if every invariant holds, else raise ScenarioError.

    The error message names the first violated invariant.
    """
    r = s.room
    for name in ("width_m", "depth_m", "height_m", "receiver_plane_separation_m"):
        if getattr(r, name) <= 0:
            raise ScenarioError(f"room {name} must be > 0")
    if r.receiver_plane_separation_m >= r.height_m:
        raise ScenarioError("receiver_plane_separation_m must be < height_m")

    c = s.channel
    if c.lambertian_order <= 0:
        raise ScenarioError("lambertian_order must be > 0")
    if not (0.0 <= c.reflectance <= 1.0):
        raise ScenarioError("reflectance must be in [0, 1]")
    if c.filter_gain <= 0 or c.concentrator_gain <= 0:
        raise ScenarioError("filter_gain and concentrator_gain must be > 0")
    if not (0.0 < c.fov_semi_angle_rad <= math.pi / 2):
        raise ScenarioError("fov_semi_angle_rad must be in (0, pi/2]")
    if c.noise_sigma_a < 0:
        raise ScenarioError("noise_sigma_a must be >= 0")
    if c.wall_patch_area_m2 <= 0:
        raise ScenarioError("wall_patch_area_m2 must be > 0")

    if len(s.aps) < 3:
        raise ScenarioError("fewer than 3 access points")
    seen = set()
    for ap in s.aps:
        if ap.id in seen:
            raise ScenarioError(f"duplicate access point id {ap.id}")
        seen.add(ap.id)
        if ap.tx_power_w <= 0:
            raise ScenarioError(f"AP {ap.id} tx_power_w must be > 0")
        if ap.coverage_radius_m <= 0:
            raise ScenarioError(f"AP {ap.id} coverage_radius_m must be > 0")
        if ap.luminous_intensity_cd < 0:
            raise ScenarioError(f"AP {ap.id} luminous_intensity_cd must be >= 0")
        if not r.contains_xy(ap.pos_xy):
            raise ScenarioError(f"AP {ap.id} outside room")
    if not has_non_collinear_triple([ap.pos_xy for ap in s.aps]):
        raise ScenarioError("all access points collinear")
    return s


def with_channel(s: Scenario, **kwargs) -> Scenario:
    """Convenience: scenario with selected channel parameters replaced."""
    return replace(s, channel=replace(s.channel, **kwargs))
