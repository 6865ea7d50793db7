"""Lambertian optical channel: illuminance, LOS and first-reflection power,
noisy RSS sampling, and room-wide grid maps.

LEDs point straight down, the photodetector straight up, so for a receiver
directly on the receiver plane cos(phi) = cos(psi) = h / d where h is the
plane separation and d the 3-D transmitter-receiver distance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .scenario import AccessPoint, ChannelParams, Room, Scenario, Vec2


class ChannelError(ValueError):
    pass


@dataclass(frozen=True)
class OpticalSample:
    power_w: float
    photocurrent_a: float
    in_fov: bool


@dataclass(frozen=True)
class GridMap:
    origin_xy: Vec2
    step_m: float
    values: np.ndarray  # shape (nx, ny), values[ix, iy] at origin + (ix, iy)*step

    def point(self, ix: int, iy: int) -> Vec2:
        return (self.origin_xy[0] + ix * self.step_m, self.origin_xy[1] + iy * self.step_m)

    def to_csv(self, comment: Optional[str] = None) -> str:
        """Row-major 'x,y,value' export with 9 significant digits."""
        lines: List[str] = []
        if comment:
            lines.append(f"# {comment}")
        lines.append("x,y,value")
        nx, ny = self.values.shape
        for ix in range(nx):
            x = self.origin_xy[0] + ix * self.step_m
            for iy in range(ny):
                y = self.origin_xy[1] + iy * self.step_m
                lines.append(f"{x:.9g},{y:.9g},{self.values[ix, iy]:.9g}")
        return "\n".join(lines) + "\n"


def los_geometry(ap: AccessPoint, rx_xy: Vec2, room: Room) -> Tuple[float, float, float]:
    """Return (d, cos_phi, cos_psi) for the direct path."""
    h = room.receiver_plane_separation_m
    dx = ap.pos_xy[0] - rx_xy[0]
    dy = ap.pos_xy[1] - rx_xy[1]
    d = math.sqrt(dx * dx + dy * dy + h * h)
    c = h / d
    return d, c, c


def horizontal_illuminance(
    ap: AccessPoint, rx_xy: Vec2, params: ChannelParams, room: Room
) -> float:
    """Horizontal illuminance in lux: I(0) cos^m1(phi) cos(psi) / d^2."""
    d, cos_phi, cos_psi = los_geometry(ap, rx_xy, room)
    if cos_psi < math.cos(params.fov_semi_angle_rad):
        return 0.0
    m1 = params.lambertian_order
    return ap.luminous_intensity_cd * (cos_phi ** m1) * cos_psi / (d * d)


def los_power(ap: AccessPoint, rx_xy: Vec2, params: ChannelParams, room: Room) -> float:
    """Line-of-sight received optical power in watts (0 outside the FOV)."""
    d, cos_phi, cos_psi = los_geometry(ap, rx_xy, room)
    if cos_psi < math.cos(params.fov_semi_angle_rad):
        return 0.0
    m1 = params.lambertian_order
    return (
        ap.tx_power_w
        * (m1 + 1.0)
        / (2.0 * math.pi * d * d)
        * (cos_phi ** m1)
        * params.filter_gain
        * params.concentrator_gain
        * cos_psi
    )


def _wall_patches(room: Room, patch_area: float):
    """Return (center xyz, inward normal, actual patch area) over the 4 walls."""
    h_sep = room.receiver_plane_separation_m
    z_lo = h_sep - room.height_m
    z_hi = h_sep
    wall_h = room.height_m
    side = math.sqrt(patch_area)
    if side > room.width_m or side > room.depth_m or side > wall_h:
        raise ChannelError("wall_patch_area_m2 implies fewer than 1 patch per wall")

    def axis(span: float) -> Tuple[int, float]:
        n = max(1, int(round(span / side)))
        return n, span / n

    # only the band above the receiver plane can illuminate the upward-facing
    # detector; discretizing just that band keeps the z = 0 cutoff on a patch
    # boundary so refinement converges smoothly
    nz, dz = axis(z_hi)
    z_centers = [(k + 0.5) * dz for k in range(nz)]
    patches = []
    # walls at x = +-half_width, normal pointing inward along x
    nxw, dw = axis(room.depth_m)
    for sign in (1.0, -1.0):
        x = sign * room.half_width
        normal = (-sign, 0.0, 0.0)
        for j in range(nxw):
            y = -room.half_depth + (j + 0.5) * dw
            for z in z_centers:
                patches.append(((x, y, z), normal, dw * dz, dz))
    # walls at y = +-half_depth
    nyw, dwy = axis(room.width_m)
    for sign in (1.0, -1.0):
        y = sign * room.half_depth
        normal = (0.0, -sign, 0.0)
        for j in range(nyw):
            x = -room.half_width + (j + 0.5) * dwy
            for z in z_centers:
                patches.append(((x, y, z), normal, dwy * dz, dz))
    return patches


def reflection_power(
    ap: AccessPoint, rx_xy: Vec2, params: ChannelParams, room: Room
) -> float:
    """First-bounce wall-reflection power, summed over discretized patches."""
    h_sep = room.receiver_plane_separation_m
    m1 = params.lambertian_order
    tan_fov = math.tan(params.fov_semi_angle_rad)
    apx, apy = ap.pos_xy
    rxx, rxy = rx_xy
    scale = ap.tx_power_w * (m1 + 1.0) * params.reflectance / (2.0 * math.pi)
    scale *= params.filter_gain * params.concentrator_gain
    total = 0.0
    for (px, py, pz), (nx, ny, nz), area, dz in _wall_patches(
        room, params.wall_patch_area_m2
    ):
        # AP -> patch
        v1x, v1y, v1z = px - apx, py - apy, pz - h_sep
        d1 = math.sqrt(v1x * v1x + v1y * v1y + v1z * v1z)
        if d1 == 0.0:
            continue
        cos_phi = -v1z / d1  # LED normal is (0, 0, -1)
        cos_alpha = -(v1x * nx + v1y * ny + v1z * nz) / d1
        if cos_phi <= 0.0 or cos_alpha <= 0.0:
            continue
        # patch -> receiver
        v2x, v2y, v2z = rxx - px, rxy - py, -pz
        d2 = math.sqrt(v2x * v2x + v2y * v2y + v2z * v2z)
        if d2 == 0.0:
            continue
        cos_beta = (v2x * nx + v2y * ny + v2z * nz) / d2
        cos_psi = pz / d2  # receiver normal is (0, 0, +1)
        if cos_beta <= 0.0 or cos_psi <= 0.0:
            continue
        # FOV acceptance: weight by the fraction of the patch's vertical
        # extent above the cutoff height, so refinement converges smoothly
        rho = math.hypot(v2x, v2y)
        z_cut = rho / tan_fov
        frac = min(max((pz + 0.5 * dz - z_cut) / dz, 0.0), 1.0)
        if frac <= 0.0:
            continue
        total += (
            scale
            * area
            * frac
            * (cos_phi ** m1)
            * cos_alpha
            * cos_beta
            * cos_psi
            / (d1 * d1 * d2 * d2)
        )
    return total


def total_power(
    aps: Iterable[AccessPoint], rx_xy: Vec2, params: ChannelParams, room: Room
) -> float:
    """Sum of LOS (plus first-reflection when enabled) power over all APs.

    APs are summed in ascending id order so the result is deterministic under
    permutation of the input list.
    """
    total = 0.0
    for ap in sorted(aps, key=lambda a: a.id):
        total += los_power(ap, rx_xy, params, room)
        if params.reflections_enabled:
            total += reflection_power(ap, rx_xy, params, room)
    return total


def sample_rss(
    ap: AccessPoint,
    rx_xy: Vec2,
    params: ChannelParams,
    room: Room,
    rng: np.random.Generator,
) -> OpticalSample:
    """One noisy photocurrent sample: I_p = R * P_r + n, n ~ N(0, sigma^2)."""
    p = los_power(ap, rx_xy, params, room)
    if params.reflections_enabled:
        p += reflection_power(ap, rx_xy, params, room)
    noise = rng.normal(0.0, params.noise_sigma_a) if params.noise_sigma_a > 0 else 0.0
    _, _, cos_psi = los_geometry(ap, rx_xy, room)
    in_fov = cos_psi >= math.cos(params.fov_semi_angle_rad)
    return OpticalSample(
        power_w=p,
        photocurrent_a=params.responsivity_a_per_w * p + noise,
        in_fov=in_fov,
    )


def grid_axes(room: Room, step_m: float) -> Tuple[np.ndarray, np.ndarray]:
    """Grid points covering the footprint, endpoints inclusive when step divides
    the side length evenly."""
    if step_m <= 0:
        raise ChannelError("step_m must be > 0")
    nx = int(math.floor(room.width_m / step_m + 1e-9)) + 1
    ny = int(math.floor(room.depth_m / step_m + 1e-9)) + 1
    xs = np.array([-room.half_width + i * step_m for i in range(nx)])
    ys = np.array([-room.half_depth + i * step_m for i in range(ny)])
    return xs, ys


def power_map(scenario: Scenario, step_m: float) -> GridMap:
    """Total received optical power over a regular grid on the receiver plane."""
    xs, ys = grid_axes(scenario.room, step_m)
    values = np.empty((len(xs), len(ys)))
    aps = scenario.aps_sorted
    for ix, x in enumerate(xs):
        for iy, y in enumerate(ys):
            values[ix, iy] = total_power(aps, (x, y), scenario.channel, scenario.room)
    return GridMap(origin_xy=(float(xs[0]), float(ys[0])), step_m=step_m, values=values)


def illuminance_map(scenario: Scenario, step_m: float) -> GridMap:
    """Summed horizontal illuminance (lux) over a regular grid."""
    xs, ys = grid_axes(scenario.room, step_m)
    values = np.empty((len(xs), len(ys)))
    aps = scenario.aps_sorted
    for ix, x in enumerate(xs):
        for iy, y in enumerate(ys):
            values[ix, iy] = sum(
                horizontal_illuminance(ap, (x, y), scenario.channel, scenario.room)
                for ap in aps
            )
    return GridMap(origin_xy=(float(xs[0]), float(ys[0])), step_m=step_m, values=values)
