"""INI config loading for scenario and simulation, key=value overrides, and
the config hash stamped on every output file."""

from __future__ import annotations

import configparser
import hashlib
import math
from importlib import resources
from typing import Dict, Iterable, List, Optional, Tuple

from .engine import SimConfig
from .mobility import Trajectory
from .protocol import DelayParams, SuperframeConfig
from .scenario import AccessPoint, ChannelParams, Room, Scenario, validate


class ConfigError(ValueError):
    pass


def default_config_text() -> str:
    return resources.files("vlcsim.data").joinpath("default.ini").read_text()


def parse_config(text: str) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    return cp


def apply_overrides(cp: configparser.ConfigParser, overrides: Iterable[str]) -> None:
    """Apply 'section.key=value' overrides in place."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        if "." not in key:
            raise ConfigError(f"override key {key!r} must be section.key")
        # section names may themselves contain dots (ap.9, device.ud1):
        # match the longest existing section prefix
        section = option = None
        for cut in range(len(key) - 1, 0, -1):
            if key[cut] == "." and cp.has_section(key[:cut]):
                section, option = key[:cut], key[cut + 1 :]
                break
        if section is None:
            raise ConfigError(f"unknown config section {key.rsplit('.', 1)[0]!r}")
        if not option or not cp.has_option(section, option):
            raise ConfigError(f"unknown config key {key!r}")
        cp.set(section, option, value)


def canonical_text(cp: configparser.ConfigParser) -> str:
    lines: List[str] = []
    for section in sorted(cp.sections()):
        lines.append(f"[{section}]")
        for option in sorted(cp.options(section)):
            lines.append(f"{option} = {cp.get(section, option)}")
    return "\n".join(lines) + "\n"


def config_hash(cp: configparser.ConfigParser) -> str:
    return hashlib.sha256(canonical_text(cp).encode()).hexdigest()[:12]


def _getfloat(cp, section, option, required=True, default=None) -> Optional[float]:
    if not cp.has_option(section, option):
        if required:
            raise ConfigError(f"missing config key {section}.{option}")
        return default
    try:
        return cp.getfloat(section, option)
    except ValueError as exc:
        raise ConfigError(f"bad float for {section}.{option}") from exc


def _getbool(cp, section, option, default=False) -> bool:
    if not cp.has_option(section, option):
        return default
    try:
        return cp.getboolean(section, option)
    except ValueError as exc:
        raise ConfigError(f"bad boolean for {section}.{option}") from exc


def _parse_xy(text: str) -> Tuple[float, float]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise ConfigError(f"expected 'x, y', got {text!r}")
    return (float(parts[0]), float(parts[1]))


def load_scenario(cp: configparser.ConfigParser) -> Scenario:
    room = Room(
        width_m=_getfloat(cp, "room", "width_m"),
        depth_m=_getfloat(cp, "room", "depth_m"),
        height_m=_getfloat(cp, "room", "height_m"),
        receiver_plane_separation_m=_getfloat(cp, "room", "receiver_plane_separation_m"),
    )
    ch = ChannelParams(
        lambertian_order=_getfloat(cp, "channel", "lambertian_order"),
        filter_gain=_getfloat(cp, "channel", "filter_gain", required=False, default=1.0),
        concentrator_gain=_getfloat(
            cp, "channel", "concentrator_gain", required=False, default=1.0
        ),
        fov_semi_angle_rad=math.radians(_getfloat(cp, "channel", "fov_semi_angle_deg")),
        responsivity_a_per_w=_getfloat(cp, "channel", "responsivity_a_per_w"),
        noise_sigma_a=_getfloat(cp, "channel", "noise_sigma_a", required=False, default=0.0),
        reflectance=_getfloat(cp, "channel", "reflectance", required=False, default=0.8),
        wall_patch_area_m2=_getfloat(
            cp, "channel", "wall_patch_area_m2", required=False, default=0.09
        ),
        reflections_enabled=_getbool(cp, "channel", "reflections_enabled", default=False),
    )
    aps: List[AccessPoint] = []
    for section in cp.sections():
        if not section.startswith("ap."):
            continue
        try:
            ap_id = int(section.split(".", 1)[1])
        except ValueError as exc:
            raise ConfigError(f"AP section name {section!r} must be ap.<int>") from exc
        aps.append(
            AccessPoint(
                id=ap_id,
                pos_xy=_parse_xy(cp.get(section, "pos_xy")),
                tx_power_w=_getfloat(cp, section, "tx_power_w"),
                luminous_intensity_cd=_getfloat(cp, section, "luminous_intensity_cd"),
                data_rate_bps=_getfloat(cp, section, "data_rate_bps"),
                coverage_radius_m=_getfloat(cp, section, "coverage_radius_m"),
            )
        )
    if not aps:
        raise ConfigError("no [ap.N] sections found")
    scenario = Scenario(room=room, aps=tuple(aps), channel=ch)
    try:
        return validate(scenario)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_sim_config(cp: configparser.ConfigParser) -> SimConfig:
    scenario = load_scenario(cp)
    sf = SuperframeConfig(
        duration_s=_getfloat(cp, "superframe", "duration_s", required=False, default=0.1),
        active_fraction=_getfloat(
            cp, "superframe", "active_fraction", required=False, default=0.9
        ),
    )
    delays = DelayParams(
        t_scan=_getfloat(cp, "delays", "t_scan", required=False, default=0.01),
        t_decision=_getfloat(cp, "delays", "t_decision", required=False, default=0.01),
        t_discon=_getfloat(cp, "delays", "t_discon", required=False, default=0.01),
        t_linksw=_getfloat(cp, "delays", "t_linksw", required=False, default=0.01),
        t_linkasso=_getfloat(cp, "delays", "t_linkasso", required=False, default=0.01),
        t_sync=_getfloat(cp, "delays", "t_sync", required=False, default=0.01),
    )
    scheme = cp.get("protocol", "scheme", fallback="predictive").strip().lower()
    if scheme not in ("traditional", "predictive", "both"):
        raise ConfigError(f"unknown scheme {scheme!r}")
    k_history = None
    if cp.has_option("protocol", "k_history") and cp.get("protocol", "k_history").strip():
        k_history = cp.getint("protocol", "k_history")

    bounds = (
        -scenario.room.half_width,
        scenario.room.half_width,
        -scenario.room.half_depth,
        scenario.room.half_depth,
    )
    seed = int(_getfloat(cp, "simulation", "seed", required=False, default=42))
    trajectories: Dict[str, Trajectory] = {}
    for section in cp.sections():
        if not section.startswith("device."):
            continue
        dev = section.split(".", 1)[1]
        model = cp.get(section, "model", fallback="line").strip().lower()
        speed = _getfloat(cp, section, "speed_mps", required=False, default=1.0)
        waypoints: List[Tuple[float, float]] = []
        if cp.has_option(section, "waypoints"):
            for chunk in cp.get(section, "waypoints").split(";"):
                chunk = chunk.strip()
                if chunk:
                    waypoints.append(_parse_xy(chunk))
        dev_seed = None
        if cp.has_option(section, "seed"):
            dev_seed = cp.getint(section, "seed")
        elif model == "random_waypoint":
            dev_seed = seed + sum(dev.encode())
        try:
            trajectories[dev] = Trajectory(
                model="waypoints" if model in ("line", "waypoints", "fixed_waypoints") else model,
                speed_mps=speed,
                waypoints=waypoints,
                seed=dev_seed,
                bounds=bounds,
            )
        except ValueError as exc:
            raise ConfigError(f"device {dev}: {exc}") from exc
        for wp in waypoints:
            if not scenario.room.contains_xy(wp):
                raise ConfigError(f"device {dev}: waypoint {wp} outside room")
    if not trajectories:
        raise ConfigError("no [device.NAME] sections found")

    threshold = _getfloat(cp, "protocol", "rss_threshold_a", required=False, default=None)
    try:
        return SimConfig(
            scenario=scenario,
            trajectories=trajectories,
            duration_s=_getfloat(cp, "simulation", "duration_s", required=False, default=60.0),
            seed=seed,
            scheme=scheme,
            superframe=sf,
            delays=delays,
            alpha=_getfloat(cp, "protocol", "alpha", required=False, default=0.5),
            k_history=k_history,
            db_cell_size_m=_getfloat(
                cp, "protocol", "db_cell_size_m", required=False, default=0.5
            ),
            rss_threshold_a=threshold,
            rss_threshold_distance_m=_getfloat(
                cp, "protocol", "rss_threshold_distance_m", required=False, default=3.5
            ),
            use_all_anchors=_getbool(cp, "protocol", "use_all_anchors", default=False),
            fused_single=_getbool(cp, "protocol", "fused_single", default=False),
        )
    except (ValueError, RuntimeError) as exc:
        raise ConfigError(str(exc)) from exc
