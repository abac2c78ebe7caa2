"""Scenario configuration: schema, defaults, validation, JSON I/O.

A scenario file is a JSON object whose keys mirror the ScenarioConfig
field names exactly; any omitted field takes the default listed here.
Validation errors name the offending field by its dotted path.

Sea-state, noise, and controller defaults are desk-scale inventions
(the field trials behind this system did not publish them) and are
meant to be overridden per scenario.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, is_dataclass

from .geometry import Attitude, Pose, Vec3
from .localization import TagMap


class ScenarioError(ValueError):
    """Configuration problem, message prefixed with the field path."""


@dataclass(frozen=True)
class WaveConfig:
    heave_amp: float = 0.1  # m
    roll_amp: float = 0.02  # rad
    pitch_amp: float = 0.015  # rad
    period: float = 6.0  # s


@dataclass(frozen=True)
class Waypoint:
    t: float
    x: float
    y: float


@dataclass(frozen=True)
class SensorNoiseConfig:
    sigma_tag: float = 0.02  # m, per axis on tag relative position
    tag_p_base: float = 0.99  # detection probability at ideal exposure
    tag_exposure_tau: float = 300.0  # us, detection falloff scale
    tag_max_range: float = 30.0  # m
    sigma_flow: float = 0.01  # rad/s
    sigma_height_depth: float = 0.02  # m
    sigma_height_lidar: float = 0.05  # m
    height_dropout: float = 0.01
    sigma_ultra: float = 0.005  # m
    ultra_dropout: float = 0.02
    ultra_max_range: float = 1.0  # m
    sigma_load: float = 0.2  # N
    sigma_imu_att: float = 0.002  # rad
    sigma_gyro: float = 0.002  # rad/s
    sigma_marker: float = 0.01  # m
    sigma_hexapod_pose: float = 0.02  # m


@dataclass(frozen=True)
class ExposureCalibConfig:
    t_exp_min: float = 100.0  # us
    t_exp_max: float = 1000.0  # us


@dataclass(frozen=True)
class ChannelConfig:
    drop_prob: float = 0.02
    latency: int = 1  # ticks


@dataclass(frozen=True)
class UavConfig:
    v_max: float = 2.0  # m/s
    tau: float = 0.5  # s, velocity lag time constant
    yaw_rate_max: float = 1.0  # rad/s
    takeoff_alt: float = 5.0  # m
    hover_alt: float = 4.0  # m above the deck
    arrive_tol: float = 0.35  # m
    waypoint: Vec3 = Vec3(10.0, 4.0, 6.0)
    base: Vec3 = Vec3(0.0, 0.0, 0.0)
    k_nav: float = 0.8  # 1/s, position-to-velocity gain


@dataclass(frozen=True)
class PlannerConfig:
    retry_limit: int = 3
    link_timeout_ticks: int = 10  # planner ticks
    search_point: Vec3 = Vec3(18.0, 8.0, 5.0)


@dataclass(frozen=True)
class HexapodConfig:
    speed: float = 0.15  # m/s on deck
    step_len: float = 0.1  # m per planner decision
    rot_step: float = 0.3  # rad per planner decision
    grasp_range: float = 0.15  # m
    grasp_close_time: float = 1.0  # s from command to firm grasp
    load_threshold_ground: float = 5.0  # N
    load_threshold_air: float = 10.0  # N
    tilt_limit: float = 0.35  # rad
    object_weight: float = 14.7  # N (1.5 kg target)


@dataclass(frozen=True)
class WinchConfig:
    k_p: float = 1.0
    rate_max: float = 0.5
    dock_epsilon: float = 0.01
    dock_tolerance: float = 0.05


@dataclass(frozen=True)
class LocalizationConfig:
    miss_threshold: int = 5
    good_threshold: int = 10
    sigma_tag_fix: float = 0.05  # m, filter tuning for position updates
    sigma_flow_vel: float = 0.1  # m/s, filter tuning for velocity updates
    q_accel: float = 0.5  # m/s^2 process noise


@dataclass(frozen=True)
class TrackerConfig:
    g_max: float = 1.0
    max_age: int = 5
    min_hits: int = 3


@dataclass(frozen=True)
class IntrinsicsConfig:
    fx: float = 400.0
    fy: float = 400.0
    cx: float = 320.0
    cy: float = 240.0
    width: int = 640
    height: int = 480


@dataclass(frozen=True)
class DetectorConfigSection:
    sigma_px: float = 2.0
    sigma_depth: float = 0.05
    miss_rate: float = 0.05
    false_positive_rate: float = 0.02
    max_depth: float = 8.0
    intrinsics: IntrinsicsConfig = IntrinsicsConfig()


@dataclass(frozen=True)
class ScenarioEvent:
    t: float
    kind: str  # "slip" drops the grasped object back onto the deck


@dataclass(frozen=True)
class TagEntry:
    position: Vec3
    yaw: float = 0.0


def _default_tag_layout() -> dict[int, TagEntry]:
    # Three markers on the reference frame near the deck edge, deck-local.
    return {
        0: TagEntry(Vec3(-2.0, 0.0, 1.5)),
        1: TagEntry(Vec3(-2.0, 0.6, 1.5)),
        2: TagEntry(Vec3(-2.0, -0.6, 1.5)),
    }


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 42
    duration_s: float = 600.0
    dt: float = 0.02
    planner_period_ticks: int = 5  # planner runs every N world ticks
    sun_heading: float = 0.8
    wave: WaveConfig = WaveConfig()
    vessel_path: tuple[Waypoint, ...] = (Waypoint(0.0, 18.0, 8.0),)
    vessel_yaw: float = 0.0
    deck_height: float = 0.5  # m, deck surface above calm water
    deck_half_extent: float = 3.0  # m
    target_on_deck: Vec3 = Vec3(0.5, -0.5, 0.0)  # deck-local
    tag_layout: dict[int, TagEntry] = field(default_factory=_default_tag_layout)
    sensor_noise: SensorNoiseConfig = SensorNoiseConfig()
    exposure_calib: ExposureCalibConfig = ExposureCalibConfig()
    channel: ChannelConfig = ChannelConfig()
    uav: UavConfig = UavConfig()
    planner: PlannerConfig = PlannerConfig()
    hexapod: HexapodConfig = HexapodConfig()
    winch: WinchConfig = WinchConfig()
    localization: LocalizationConfig = LocalizationConfig()
    tracker: TrackerConfig = TrackerConfig()
    detector: DetectorConfigSection = DetectorConfigSection()
    events: tuple[ScenarioEvent, ...] = ()

    @property
    def planner_dt(self) -> float:
        return self.dt * self.planner_period_ticks


# ---------------------------------------------------------------------------
# Loading and validation


def _require(cond: bool, path: str, message: str) -> None:
    if not cond:
        raise ScenarioError(f"{path}: {message}")


def _num(raw: dict, key: str, path: str, default):
    v = raw.get(key, default)
    _require(isinstance(v, (int, float)) and not isinstance(v, bool), f"{path}{key}", "must be a number")
    _require(math.isfinite(float(v)), f"{path}{key}", "must be finite")
    return float(v)


def _int(raw: dict, key: str, path: str, default):
    v = raw.get(key, default)
    _require(isinstance(v, int) and not isinstance(v, bool), f"{path}{key}", "must be an integer")
    return v


def _section(raw: dict, key: str, path: str) -> dict:
    v = raw.get(key, {})
    _require(isinstance(v, dict), f"{path}{key}", "must be an object")
    return v


def _vec3(raw, path: str, default: Vec3) -> Vec3:
    if raw is None:
        return default
    _require(isinstance(raw, dict), path, "must be an object with x, y, z")
    return Vec3(
        _num(raw, "x", path + ".", default.x),
        _num(raw, "y", path + ".", default.y),
        _num(raw, "z", path + ".", default.z),
    )


def _load_from_defaults(raw: dict, path: str, defaults, overrides: dict | None = None):
    """Fill a flat numeric dataclass from raw JSON, keeping defaults."""
    kwargs = {}
    for name, default in ((f, getattr(defaults, f)) for f in defaults.__dataclass_fields__):
        if overrides and name in overrides:
            kwargs[name] = overrides[name](raw, name, path)
        elif isinstance(default, bool):
            kwargs[name] = bool(raw.get(name, default))
        elif isinstance(default, int):
            kwargs[name] = _int(raw, name, path, default)
        elif isinstance(default, float):
            kwargs[name] = _num(raw, name, path, default)
        else:
            kwargs[name] = default
    return type(defaults)(**kwargs)


def scenario_from_dict(raw: dict) -> ScenarioConfig:
    _require(isinstance(raw, dict), "", "scenario must be a JSON object")
    d = ScenarioConfig()

    seed = _int(raw, "seed", "", d.seed)
    _require(seed >= 0, "seed", "must be >= 0")
    duration_s = _num(raw, "duration_s", "", d.duration_s)
    _require(duration_s > 0, "duration_s", "must be > 0")
    dt = _num(raw, "dt", "", d.dt)
    _require(dt > 0, "dt", "must be > 0")
    planner_period_ticks = _int(raw, "planner_period_ticks", "", d.planner_period_ticks)
    _require(planner_period_ticks >= 1, "planner_period_ticks", "must be >= 1")
    sun_heading = _num(raw, "sun_heading", "", d.sun_heading)

    wave = _load_from_defaults(_section(raw, "wave", ""), "wave.", d.wave)
    _require(wave.period > 0, "wave.period", "must be > 0")
    for name in ("heave_amp", "roll_amp", "pitch_amp"):
        _require(getattr(wave, name) >= 0, f"wave.{name}", "must be >= 0")

    path_raw = raw.get("vessel_path", None)
    if path_raw is None:
        vessel_path = d.vessel_path
    else:
        _require(isinstance(path_raw, list) and path_raw, "vessel_path", "must be a non-empty array")
        wps = []
        for i, wp in enumerate(path_raw):
            p = f"vessel_path[{i}]"
            _require(isinstance(wp, dict), p, "must be an object with t, x, y")
            wps.append(Waypoint(_num(wp, "t", p + ".", 0.0), _num(wp, "x", p + ".", 0.0), _num(wp, "y", p + ".", 0.0)))
        for a, b in zip(wps, wps[1:]):
            _require(b.t >= a.t, "vessel_path", "waypoint times must be non-decreasing")
        vessel_path = tuple(wps)

    tag_raw = raw.get("tag_layout", None)
    if tag_raw is None:
        tag_layout = d.tag_layout
    else:
        _require(isinstance(tag_raw, dict) and tag_raw, "tag_layout", "must be a non-empty object")
        tag_layout = {}
        for key, entry in tag_raw.items():
            p = f"tag_layout.{key}"
            try:
                tag_id = int(key)
            except ValueError:
                raise ScenarioError(f"{p}: tag id must be an integer") from None
            _require(isinstance(entry, dict), p, "must be an object")
            tag_layout[tag_id] = TagEntry(
                position=_vec3(entry.get("position"), p + ".position", Vec3(0, 0, 0)),
                yaw=_num(entry, "yaw", p + ".", 0.0),
            )

    noise = _load_from_defaults(_section(raw, "sensor_noise", ""), "sensor_noise.", d.sensor_noise)
    for name in noise.__dataclass_fields__:
        if name.startswith("sigma_"):
            _require(getattr(noise, name) >= 0, f"sensor_noise.{name}", "must be >= 0")
    for name in ("height_dropout", "ultra_dropout", "tag_p_base"):
        v = getattr(noise, name)
        _require(0.0 <= v <= 1.0, f"sensor_noise.{name}", "must lie in [0, 1]")

    calib = _load_from_defaults(_section(raw, "exposure_calib", ""), "exposure_calib.", d.exposure_calib)
    _require(0 < calib.t_exp_min <= calib.t_exp_max, "exposure_calib.t_exp_min", "require 0 < t_exp_min <= t_exp_max")

    channel = _load_from_defaults(_section(raw, "channel", ""), "channel.", d.channel)
    _require(0.0 <= channel.drop_prob <= 1.0, "channel.drop_prob", "must lie in [0, 1]")
    _require(channel.latency >= 0, "channel.latency", "must be >= 0")

    uav_raw = _section(raw, "uav", "")
    uav = _load_from_defaults(
        uav_raw,
        "uav.",
        d.uav,
        overrides={
            "waypoint": lambda r, n, p: _vec3(r.get(n), p + n, d.uav.waypoint),
            "base": lambda r, n, p: _vec3(r.get(n), p + n, d.uav.base),
        },
    )
    _require(uav.v_max > 0, "uav.v_max", "must be > 0")
    _require(uav.tau > 0, "uav.tau", "must be > 0")

    planner_raw = _section(raw, "planner", "")
    planner = _load_from_defaults(
        planner_raw,
        "planner.",
        d.planner,
        overrides={"search_point": lambda r, n, p: _vec3(r.get(n), p + n, d.planner.search_point)},
    )
    _require(planner.retry_limit >= 0, "planner.retry_limit", "must be >= 0")

    hexapod = _load_from_defaults(_section(raw, "hexapod", ""), "hexapod.", d.hexapod)
    _require(hexapod.speed > 0, "hexapod.speed", "must be > 0")
    _require(hexapod.grasp_range > 0, "hexapod.grasp_range", "must be > 0")

    winch = _load_from_defaults(_section(raw, "winch", ""), "winch.", d.winch)
    _require(winch.rate_max > 0, "winch.rate_max", "must be > 0")

    loc = _load_from_defaults(_section(raw, "localization", ""), "localization.", d.localization)
    tracker = _load_from_defaults(_section(raw, "tracker", ""), "tracker.", d.tracker)
    _require(tracker.g_max > 0, "tracker.g_max", "must be > 0")

    det_raw = _section(raw, "detector", "")
    intr = _load_from_defaults(_section(det_raw, "intrinsics", "detector."), "detector.intrinsics.", d.detector.intrinsics)
    detector = _load_from_defaults(
        det_raw, "detector.", d.detector, overrides={"intrinsics": lambda r, n, p: intr}
    )
    for name in ("miss_rate", "false_positive_rate"):
        v = getattr(detector, name)
        _require(0.0 <= v < 1.0, f"detector.{name}", "must lie in [0, 1)")

    events_raw = raw.get("events", [])
    _require(isinstance(events_raw, list), "events", "must be an array")
    events = []
    for i, ev in enumerate(events_raw):
        p = f"events[{i}]"
        _require(isinstance(ev, dict), p, "must be an object with t, kind")
        kind = ev.get("kind")
        _require(kind in ("slip",), f"{p}.kind", "unknown event kind")
        events.append(ScenarioEvent(t=_num(ev, "t", p + ".", 0.0), kind=kind))

    known = set(ScenarioConfig.__dataclass_fields__)
    for key in raw:
        _require(key in known, key, "unknown field")

    return ScenarioConfig(
        seed=seed,
        duration_s=duration_s,
        dt=dt,
        planner_period_ticks=planner_period_ticks,
        sun_heading=sun_heading,
        wave=wave,
        vessel_path=vessel_path,
        vessel_yaw=_num(raw, "vessel_yaw", "", d.vessel_yaw),
        deck_height=_num(raw, "deck_height", "", d.deck_height),
        deck_half_extent=_num(raw, "deck_half_extent", "", d.deck_half_extent),
        target_on_deck=_vec3(raw.get("target_on_deck"), "target_on_deck", d.target_on_deck),
        tag_layout=tag_layout,
        sensor_noise=noise,
        exposure_calib=calib,
        channel=channel,
        uav=uav,
        planner=planner,
        hexapod=hexapod,
        winch=winch,
        localization=loc,
        tracker=tracker,
        detector=detector,
        events=tuple(events),
    )


def _to_jsonable(obj):
    if isinstance(obj, Vec3):
        return {"x": obj.x, "y": obj.y, "z": obj.z}
    if isinstance(obj, TagEntry):
        return {"position": _to_jsonable(obj.position), "yaw": obj.yaw}
    if isinstance(obj, (Waypoint, ScenarioEvent)):
        return {k: getattr(obj, k) for k in obj.__dataclass_fields__}
    if is_dataclass(obj):
        return {k: _to_jsonable(getattr(obj, k)) for k in obj.__dataclass_fields__}
    if isinstance(obj, dict):
        return {str(k): _to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_jsonable(v) for v in obj]
    return obj


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    return _to_jsonable(cfg)


def load_scenario(path: str) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"invalid JSON: {exc}") from None
    return scenario_from_dict(raw)


def save_scenario(cfg: ScenarioConfig, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(cfg), fh, indent=2, sort_keys=True)
        fh.write("\n")


def tag_map_world(cfg: ScenarioConfig, vessel_pose: Pose) -> TagMap:
    """Tag layout lifted from deck-local coordinates to world poses."""
    from .geometry import transform_point

    entries = {}
    for tag_id, entry in cfg.tag_layout.items():
        pos = transform_point(vessel_pose, entry.position)
        entries[tag_id] = Pose(position=pos, attitude=Attitude(yaw=entry.yaw))
    return TagMap(entries=entries)
