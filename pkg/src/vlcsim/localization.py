"""RSS-based localization: invert the LOS power law to distances, pick a
non-collinear anchor triple, and trilaterate on the receiver plane."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

from .channel import los_power
from .scenario import AccessPoint, ChannelParams, Room, Scenario, Vec2


class LocalizationError(ValueError):
    pass


@dataclass(frozen=True)
class RssReport:
    device_id: str
    superframe_index: int
    readings: Tuple[Tuple[int, float], ...]  # (ap_id, photocurrent in A)


@dataclass(frozen=True)
class PositionEstimate:
    xy: Vec2
    residual_m: float
    used_aps: Tuple[int, ...]


def rss_to_distance(
    rss_a: float, ap: AccessPoint, params: ChannelParams, room: Room
) -> float:
    """Invert the coplanar LOS model: d = (K / P_r)^(1/(m1+3))."""
    if rss_a <= 0:
        raise LocalizationError("unusable reading")
    p_r = rss_a / params.responsivity_a_per_w
    h = room.receiver_plane_separation_m
    m1 = params.lambertian_order
    k = (
        ap.tx_power_w
        * (m1 + 1.0)
        * params.filter_gain
        * params.concentrator_gain
        * (h ** (m1 + 1.0))
        / (2.0 * math.pi)
    )
    return (k / p_r) ** (1.0 / (m1 + 3.0))


def _collinear(a: Vec2, b: Vec2, c: Vec2, tol: float = 1e-9) -> bool:
    cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    return abs(cross) <= tol


def select_anchor_triple(
    readings: Sequence[Tuple[int, float]], scenario: Scenario
) -> Tuple[int, int, int]:
    """Three strongest non-collinear APs; ties broken by lowest ap_id.

    If the top three are collinear the weakest of them is replaced by the
    next-strongest AP that breaks collinearity.
    """
    usable = [(ap_id, rss) for ap_id, rss in readings if rss > 0]
    if len(usable) < 3:
        raise LocalizationError("insufficient anchors")
    ranked = sorted(usable, key=lambda r: (-r[1], r[0]))
    pos = {ap.id: ap.pos_xy for ap in scenario.aps}
    a, b = ranked[0][0], ranked[1][0]
    for cand, _ in ranked[2:]:
        if not _collinear(pos[a], pos[b], pos[cand]):
            return (a, b, cand)
    raise LocalizationError("no non-collinear triple")


def trilaterate(
    anchors: Sequence[Tuple[int, Vec2, float]], h: float
) -> PositionEstimate:
    """Solve the pairwise-differenced circle equations for three anchors.

    Each anchor is (ap_id, xy, measured 3-D distance d).  Distances are
    clamped to >= h and projected to horizontal radii r = sqrt(d^2 - h^2).
    """
    if len(anchors) != 3:
        raise LocalizationError("exactly three anchors required")
    ids = tuple(a[0] for a in anchors)
    pts = [a[1] for a in anchors]
    radii = []
    for _, _, d in anchors:
        d = max(d, h)
        radii.append(math.sqrt(max(d * d - h * h, 0.0)))
    (x1, y1), (x2, y2), (x3, y3) = pts
    r1, r2, r3 = radii
    # (eq1 - eq2) and (eq1 - eq3) give a 2x2 linear system in (x, y)
    a11 = 2.0 * (x2 - x1)
    a12 = 2.0 * (y2 - y1)
    b1 = r1 * r1 - r2 * r2 + x2 * x2 - x1 * x1 + y2 * y2 - y1 * y1
    a21 = 2.0 * (x3 - x1)
    a22 = 2.0 * (y3 - y1)
    b2 = r1 * r1 - r3 * r3 + x3 * x3 - x1 * x1 + y3 * y3 - y1 * y1
    det = a11 * a22 - a12 * a21
    if abs(det) < 1e-12:
        raise LocalizationError("collinear anchors")
    x = (b1 * a22 - b2 * a12) / det
    y = (a11 * b2 - a21 * b1) / det
    sq = 0.0
    for (px, py), r in zip(pts, radii):
        sq += (math.hypot(x - px, y - py) - r) ** 2
    return PositionEstimate(xy=(x, y), residual_m=math.sqrt(sq / 3.0), used_aps=ids)


def trilaterate_lsq(
    anchors: Sequence[Tuple[int, Vec2, float]], h: float
) -> PositionEstimate:
    """Least-squares multilateration over N >= 3 anchors (optional mode)."""
    if len(anchors) < 3:
        raise LocalizationError("insufficient anchors")
    import numpy as np

    ids = tuple(a[0] for a in anchors)
    pts = [a[1] for a in anchors]
    radii = [math.sqrt(max(max(d, h) ** 2 - h * h, 0.0)) for _, _, d in anchors]
    (x1, y1), r1 = pts[0], radii[0]
    rows, rhs = [], []
    for (xi, yi), ri in zip(pts[1:], radii[1:]):
        rows.append([2.0 * (xi - x1), 2.0 * (yi - y1)])
        rhs.append(r1 * r1 - ri * ri + xi * xi - x1 * x1 + yi * yi - y1 * y1)
    sol, _, rank, _ = np.linalg.lstsq(np.array(rows), np.array(rhs), rcond=None)
    if rank < 2:
        raise LocalizationError("collinear anchors")
    x, y = float(sol[0]), float(sol[1])
    sq = sum((math.hypot(x - px, y - py) - r) ** 2 for (px, py), r in zip(pts, radii))
    return PositionEstimate(xy=(x, y), residual_m=math.sqrt(sq / len(pts)), used_aps=ids)


def estimate_position(
    report: RssReport, scenario: Scenario, use_all_anchors: bool = False
) -> PositionEstimate:
    """RSS report -> distances -> anchor selection -> trilateration.

    The estimate is clamped to the room footprint.
    """
    room = scenario.room
    params = scenario.channel
    h = room.receiver_plane_separation_m
    usable = [(ap_id, rss) for ap_id, rss in report.readings if rss > 0]
    if len(usable) < 3:
        raise LocalizationError("insufficient anchors")
    dist = {
        ap_id: rss_to_distance(rss, scenario.ap_by_id(ap_id), params, room)
        for ap_id, rss in usable
    }
    pos = {ap.id: ap.pos_xy for ap in scenario.aps}
    if use_all_anchors:
        anchors = [(ap_id, pos[ap_id], dist[ap_id]) for ap_id, _ in sorted(usable)]
        est = trilaterate_lsq(anchors, h)
    else:
        triple = select_anchor_triple(usable, scenario)
        anchors = [(ap_id, pos[ap_id], dist[ap_id]) for ap_id in triple]
        est = trilaterate(anchors, h)
    return PositionEstimate(
        xy=room.clamp_xy(est.xy), residual_m=est.residual_m, used_aps=est.used_aps
    )


def noiseless_report(
    device_id: str, superframe_index: int, rx_xy: Vec2, scenario: Scenario
) -> RssReport:
    """Helper: the report a device would send with zero noise."""
    readings = tuple(
        (
            ap.id,
            scenario.channel.responsivity_a_per_w
            * los_power(ap, rx_xy, scenario.channel, scenario.room),
        )
        for ap in scenario.aps_sorted
    )
    return RssReport(device_id=device_id, superframe_index=superframe_index, readings=readings)
