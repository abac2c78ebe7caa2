"""Deterministic environment simulation: wave-perturbed deck, kinematic
UAV and ground-robot plants, and every sensor model in the system.

The full tick pipeline, driven from the mission runner, is

    world_step -> sensors -> channel step -> agent steps -> commands

and the whole simulation is a pure function of (scenario, command
trace): world_step itself draws no random numbers, and every sensor
noise source reads from its own named substream of the scenario seed.

Substream names and per-tick draw order (new noise sources take new
streams, existing streams are never re-ordered):

    imu/att        3 normals (roll, pitch, yaw)
    imu/gyro       2 normals (x, y rates)
    tag/detect     1 uniform per tag in layout order
    tag/noise      3 normals per detected tag
    flow/noise     2 normals
    height/depth   1 uniform (dropout) + 1 normal
    height/lidar   1 uniform (dropout) + 1 normal
    hexapod/ultra  (1 uniform + 1 normal) front, then rear
    hexapod/load   1 normal
    hexapod/pose   2 normals, planner ticks only (ground agent belief)
    winch/feedback 2 normals (marker) + 1 normal (range)
    detector       draws inside SimulatedDetector, planner ticks only
    channel/uav2hex, channel/hex2uav   one uniform per frame offered

Frames: the vessel pose is the deck-center pose; deck-local (x, y, 0)
lies on the deck surface.  Water sits at world z = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .geometry import (
    Attitude,
    Pose,
    Vec3,
    ZERO3,
    inverse_transform_point,
    rotate_inverse,
    rotate_z,
    transform_point,
    wrap_angle,
)
from .hexapod import HexapodSensors, WinchState
from .localization import FlowSample, HeightMeasurement, HeightSource, TagDetection
from .photometry import ExposureCalibration, Histogram256, exposure_time
from .rng import StreamSet
from .scenario import ScenarioConfig

STANDING_CLEARANCE = 0.01  # m of cable slack that counts as ground contact
MOUNT_OFFSET = 0.2  # m between the winch hook and the stowed robot
MARKER_VISIBLE_RANGE = 2.0  # m, docking markers visible below the winch


class Attachment(Enum):
    NoneAttached = "None"
    HexapodHolding = "HexapodHolding"
    WinchCarrying = "WinchCarrying"


class HexapodMode(Enum):
    Stowed = "Stowed"
    Hanging = "Hanging"
    OnDeck = "OnDeck"


@dataclass(frozen=True)
class UavCommand:
    velocity: Vec3 = ZERO3  # world-frame setpoint
    yaw: float | None = None  # heading setpoint, rate limited


@dataclass(frozen=True)
class WorldState:
    t: float
    vessel_pose: Pose
    uav_true_pose: Pose
    uav_true_vel: Vec3
    hexapod_true_pose: Pose
    object_pose: Pose
    attached: Attachment
    hexapod_mode: HexapodMode
    hexapod_deck_xy: tuple[float, float]
    hexapod_heading: float
    object_deck_xy: tuple[float, float]
    grasp_offset: Vec3  # object minus hexapod while held
    grasp_closing_since: float | None = None


def vessel_pose_at(t: float, cfg: ScenarioConfig) -> Pose:
    """Deck-center pose at time t: waypoint track plus wave motion."""
    if t < 0:
        raise ValueError("t must be >= 0")
    x, y = _interp_path(t, cfg.vessel_path)
    w = cfg.wave
    phase = 2.0 * math.pi * t / w.period
    heave = w.heave_amp * math.sin(phase)
    roll = w.roll_amp * math.sin(phase + math.pi / 2.0)
    pitch = w.pitch_amp * math.sin(phase + math.pi / 3.0)
    return Pose(
        position=Vec3(x, y, cfg.deck_height + heave),
        attitude=Attitude(roll=roll, pitch=pitch, yaw=cfg.vessel_yaw),
    )


def _interp_path(t: float, path) -> tuple[float, float]:
    if t <= path[0].t:
        return path[0].x, path[0].y
    for a, b in zip(path, path[1:]):
        if t <= b.t:
            span = b.t - a.t
            f = 0.0 if span <= 0 else (t - a.t) / span
            return a.x + f * (b.x - a.x), a.y + f * (b.y - a.y)
    return path[-1].x, path[-1].y


def deck_surface_z(vessel_pose: Pose, world_x: float, world_y: float) -> float:
    """World z of the deck surface below a world (x, y) point."""
    local = inverse_transform_point(vessel_pose, Vec3(world_x, world_y, vessel_pose.position.z))
    return transform_point(vessel_pose, Vec3(local.x, local.y, 0.0)).z


def over_deck(vessel_pose: Pose, half_extent: float, world_x: float, world_y: float) -> bool:
    local = inverse_transform_point(vessel_pose, Vec3(world_x, world_y, vessel_pose.position.z))
    return abs(local.x) <= half_extent and abs(local.y) <= half_extent


def initial_world(cfg: ScenarioConfig) -> WorldState:
    vessel = vessel_pose_at(0.0, cfg)
    uav_pos = Vec3(cfg.uav.base.x, cfg.uav.base.y, 0.0)
    object_xy = (cfg.target_on_deck.x, cfg.target_on_deck.y)
    return WorldState(
        t=0.0,
        vessel_pose=vessel,
        uav_true_pose=Pose(position=uav_pos),
        uav_true_vel=ZERO3,
        hexapod_true_pose=Pose(position=uav_pos - Vec3(0.0, 0.0, MOUNT_OFFSET)),
        object_pose=Pose(position=transform_point(vessel, Vec3(object_xy[0], object_xy[1], 0.0))),
        attached=Attachment.NoneAttached,
        hexapod_mode=HexapodMode.Stowed,
        hexapod_deck_xy=(0.0, 0.0),
        hexapod_heading=0.0,
        object_deck_xy=object_xy,
        grasp_offset=ZERO3,
    )


def world_step(
    world: WorldState,
    cfg: ScenarioConfig,
    uav_cmd: UavCommand,
    hexapod_cmd: str | None,
    winch: WinchState,
) -> WorldState:
    """Advance physics by one dt.  Pure function, no randomness."""
    dt = cfg.dt
    t = world.t + dt
    vessel = vessel_pose_at(t, cfg)

    # UAV: first-order velocity lag, kinematic position.
    decay = math.exp(-dt / cfg.uav.tau)
    sp = uav_cmd.velocity
    vel = Vec3(
        sp.x + (world.uav_true_vel.x - sp.x) * decay,
        sp.y + (world.uav_true_vel.y - sp.y) * decay,
        sp.z + (world.uav_true_vel.z - sp.z) * decay,
    )
    pos = world.uav_true_pose.position + vel * dt
    if pos.z < 0.0:
        pos = Vec3(pos.x, pos.y, 0.0)
        vel = Vec3(vel.x, vel.y, max(vel.z, 0.0))
    yaw = world.uav_true_pose.attitude.yaw
    if uav_cmd.yaw is not None:
        err = wrap_angle(uav_cmd.yaw - yaw)
        step = max(-cfg.uav.yaw_rate_max * dt, min(cfg.uav.yaw_rate_max * dt, err))
        yaw = wrap_angle(yaw + step)
    uav_pose = Pose(position=pos, attitude=Attitude(yaw=yaw))

    # Hexapod: stowed/hanging under the winch, or walking on the deck.
    mode = world.hexapod_mode
    deck_xy = world.hexapod_deck_xy
    heading = world.hexapod_heading
    closing_since = world.grasp_closing_since
    attached = world.attached

    if mode in (HexapodMode.Stowed, HexapodMode.Hanging):
        hex_pos = Vec3(pos.x, pos.y, pos.z - winch.cable_length - MOUNT_OFFSET)
        if winch.cable_length > 0.05:
            mode = HexapodMode.Hanging
        deck_z = deck_surface_z(vessel, hex_pos.x, hex_pos.y)
        on_deck_area = over_deck(vessel, cfg.deck_half_extent, hex_pos.x, hex_pos.y)
        if mode is HexapodMode.Hanging and on_deck_area and hex_pos.z <= deck_z + STANDING_CLEARANCE:
            mode = HexapodMode.OnDeck
            local = inverse_transform_point(vessel, Vec3(hex_pos.x, hex_pos.y, deck_z))
            deck_xy = (local.x, local.y)
            hex_pos = transform_point(vessel, Vec3(local.x, local.y, 0.0))
    else:  # OnDeck
        lx, ly = deck_xy
        if hexapod_cmd in ("step-forward", "step-backward", "strafe-left", "strafe-right"):
            sign = -1.0 if hexapod_cmd == "step-backward" else 1.0
            ang = heading if hexapod_cmd in ("step-forward", "step-backward") else heading + math.pi / 2.0
            if hexapod_cmd == "strafe-right":
                ang = heading - math.pi / 2.0
            step = cfg.hexapod.speed * dt * sign
            # Heading is a world yaw; walk in deck-local coordinates so the
            # robot stays rigidly carried by the deck while it moves.
            ang_deck = ang - vessel.attitude.yaw
            lx += math.cos(ang_deck) * step
            ly += math.sin(ang_deck) * step
        elif hexapod_cmd in ("rotate-left", "rotate-right"):
            rate = cfg.hexapod.rot_step / max(cfg.planner_dt, dt)
            heading = wrap_angle(heading + (rate * dt if hexapod_cmd == "rotate-left" else -rate * dt))
        elif hexapod_cmd == "grasp" and closing_since is None and attached is Attachment.NoneAttached:
            closing_since = world.t
        lx = max(-cfg.deck_half_extent, min(cfg.deck_half_extent, lx))
        ly = max(-cfg.deck_half_extent, min(cfg.deck_half_extent, ly))
        deck_xy = (lx, ly)
        hex_pos = transform_point(vessel, Vec3(lx, ly, 0.0))
        # Winch reeling in lifts the robot off the deck once the cable is taut.
        height_over_deck = pos.z - hex_pos.z - MOUNT_OFFSET
        if winch.rate < 0.0 and winch.cable_length < height_over_deck:
            mode = HexapodMode.Hanging
            hex_pos = Vec3(pos.x, pos.y, pos.z - winch.cable_length - MOUNT_OFFSET)

    if mode is HexapodMode.Hanging and winch.cable_length <= 0.02:
        mode = HexapodMode.Stowed

    hex_pose = Pose(position=hex_pos, attitude=Attitude(yaw=heading))

    # Grasp closure: legs take grasp_close_time to produce a firm hold.
    grasp_offset = world.grasp_offset
    if closing_since is not None and attached is Attachment.NoneAttached:
        obj_pos = world.object_pose.position
        d = math.hypot(hex_pos.x - obj_pos.x, hex_pos.y - obj_pos.y)
        if t - closing_since >= cfg.hexapod.grasp_close_time:
            if d <= cfg.hexapod.grasp_range:
                attached = Attachment.HexapodHolding
                grasp_offset = obj_pos - hex_pos
            closing_since = None

    # Scheduled events.
    for ev in cfg.events:
        if ev.kind == "slip" and world.t < ev.t <= t and attached is not Attachment.NoneAttached:
            attached = Attachment.NoneAttached
            closing_since = None

    # Object pose and the attachment bookkeeping.
    object_deck_xy = world.object_deck_xy
    if attached is Attachment.NoneAttached:
        if world.attached is not Attachment.NoneAttached:
            # Just released (slip): object falls straight to the deck.
            prev = world.object_pose.position
            local = inverse_transform_point(vessel, Vec3(prev.x, prev.y, vessel.position.z))
            object_deck_xy = (
                max(-cfg.deck_half_extent, min(cfg.deck_half_extent, local.x)),
                max(-cfg.deck_half_extent, min(cfg.deck_half_extent, local.y)),
            )
        obj_pos = transform_point(vessel, Vec3(object_deck_xy[0], object_deck_xy[1], 0.0))
    else:
        obj_pos = hex_pos + grasp_offset
        attached = (
            Attachment.WinchCarrying if mode in (HexapodMode.Hanging, HexapodMode.Stowed) else Attachment.HexapodHolding
        )

    return WorldState(
        t=t,
        vessel_pose=vessel,
        uav_true_pose=uav_pose,
        uav_true_vel=vel,
        hexapod_true_pose=hex_pose,
        object_pose=Pose(position=obj_pos),
        attached=attached,
        hexapod_mode=mode,
        hexapod_deck_xy=deck_xy,
        hexapod_heading=heading,
        object_deck_xy=object_deck_xy,
        grasp_offset=grasp_offset,
        grasp_closing_since=closing_since,
    )


# ---------------------------------------------------------------------------
# Sensor models


@dataclass(frozen=True)
class ImuSample:
    attitude: Attitude
    gyro: tuple[float, float]  # body rates about x, y
    hexapod_tilt: float


@dataclass(frozen=True)
class SensorBundle:
    t: float
    tags: list[TagDetection]
    flow: FlowSample
    depth_height: HeightMeasurement
    lidar_height: HeightMeasurement
    imu: ImuSample
    hexapod: HexapodSensors
    winch_marker_offset: Vec3 | None
    winch_range: float | None
    over_vessel: bool
    true_height_over_surface: float
    camera_histogram: Histogram256


def ideal_exposure(world: WorldState, cfg: ScenarioConfig) -> float:
    calib = ExposureCalibration(cfg.exposure_calib.t_exp_min, cfg.exposure_calib.t_exp_max)
    return exposure_time(cfg.sun_heading, world.uav_true_pose.attitude.yaw, calib)


def simulate_tag_detections(
    world: WorldState, cfg: ScenarioConfig, t_exp_applied: float, streams: StreamSet
) -> list[TagDetection]:
    """Tag detections whose probability decays with exposure mismatch."""
    noise = cfg.sensor_noise
    t_ideal = ideal_exposure(world, cfg)
    p_det = noise.tag_p_base * math.exp(-abs(t_exp_applied - t_ideal) / noise.tag_exposure_tau)
    detect_rng = streams.get("tag/detect")
    noise_rng = streams.get("tag/noise")
    uav = world.uav_true_pose
    out = []
    for tag_id in sorted(cfg.tag_layout):
        tag_world = transform_point(world.vessel_pose, cfg.tag_layout[tag_id].position)
        rel = tag_world - uav.position
        if rel.norm() > noise.tag_max_range:
            continue
        p_body = rotate_inverse(uav.attitude, rel)
        if p_body.x <= 0.0 and p_body.z >= 0.0:
            continue  # outside both fisheye hemispheres (front and down)
        if detect_rng.uniform() >= p_det:
            continue
        if noise.sigma_tag > 0.0:
            p_body = Vec3(
                p_body.x + noise_rng.normal(noise.sigma_tag),
                p_body.y + noise_rng.normal(noise.sigma_tag),
                p_body.z + noise_rng.normal(noise.sigma_tag),
            )
        out.append(TagDetection(tag_id=tag_id, p_tag_body=p_body, timestamp=world.t))
    return out


def simulate_flow_and_heights(
    world: WorldState, cfg: ScenarioConfig, streams: StreamSet
) -> tuple[FlowSample, HeightMeasurement, HeightMeasurement]:
    """Flow rates from the model inverse, plus both height sources."""
    noise = cfg.sensor_noise
    uav = world.uav_true_pose
    pos = uav.position

    on_vessel = over_deck(world.vessel_pose, cfg.deck_half_extent, pos.x, pos.y)
    surface_z = deck_surface_z(world.vessel_pose, pos.x, pos.y) if on_vessel else 0.0
    h_true = pos.z - surface_z

    flow_rng = streams.get("flow/noise")
    v_body = rotate_z(-uav.attitude.yaw, world.uav_true_vel)
    h_flow = max(h_true, 0.05)
    omega_y = v_body.x / h_flow + flow_rng.normal(noise.sigma_flow)
    omega_x = -v_body.y / h_flow + flow_rng.normal(noise.sigma_flow)
    flow = FlowSample(omega_x=omega_x, omega_y=omega_y, timestamp=world.t)

    depth_rng = streams.get("height/depth")
    depth_drop = depth_rng.uniform() < noise.height_dropout
    depth_noise = depth_rng.normal(noise.sigma_height_depth)
    depth_valid = on_vessel and 0.0 <= h_true <= 8.0 and not depth_drop
    depth = HeightMeasurement(
        source=HeightSource.DepthCamera,
        value=max(h_true + depth_noise, 0.0) if depth_valid else 0.0,
        valid=depth_valid,
    )

    lidar_rng = streams.get("height/lidar")
    lidar_drop = lidar_rng.uniform() < noise.height_dropout
    lidar_noise = lidar_rng.normal(noise.sigma_height_lidar)
    lidar_valid = 0.0 <= h_true <= 20.0 and not lidar_drop
    lidar = HeightMeasurement(
        source=HeightSource.Lidar2D,
        value=max(h_true + lidar_noise, 0.0) if lidar_valid else 0.0,
        valid=lidar_valid,
    )
    return flow, depth, lidar


def simulate_imu(world: WorldState, cfg: ScenarioConfig, streams: StreamSet) -> ImuSample:
    noise = cfg.sensor_noise
    att_rng = streams.get("imu/att")
    gyro_rng = streams.get("imu/gyro")
    att = world.uav_true_pose.attitude
    measured = Attitude(
        roll=att.roll + att_rng.normal(noise.sigma_imu_att),
        pitch=att.pitch + att_rng.normal(noise.sigma_imu_att),
        yaw=att.yaw + att_rng.normal(noise.sigma_imu_att),
    )
    gyro = (gyro_rng.normal(noise.sigma_gyro), gyro_rng.normal(noise.sigma_gyro))
    return ImuSample(attitude=measured, gyro=gyro, hexapod_tilt=hexapod_tilt(world))


def hexapod_tilt(world: WorldState) -> float:
    """Angle between the robot body z axis and the gravity vector."""
    if world.hexapod_mode is HexapodMode.OnDeck:
        att = world.vessel_pose.attitude
        nz = math.cos(att.pitch) * math.cos(att.roll)
        return math.acos(max(-1.0, min(1.0, nz)))
    return 0.02  # hanging or stowed: small pendulum deflection


def simulate_hexapod_sensors(world: WorldState, cfg: ScenarioConfig, streams: StreamSet) -> HexapodSensors:
    noise = cfg.sensor_noise
    ultra_rng = streams.get("hexapod/ultra")
    load_rng = streams.get("hexapod/load")

    hex_pos = world.hexapod_true_pose.position
    obj_pos = world.object_pose.position
    d = math.hypot(hex_pos.x - obj_pos.x, hex_pos.y - obj_pos.y)
    offset = 0.02  # sensors sit fore and aft of the grasp center

    readings: list[float | None] = []
    for base in (max(d - offset, 0.0), d + offset):
        dropped = ultra_rng.uniform() < noise.ultra_dropout
        n = ultra_rng.normal(noise.sigma_ultra)
        if dropped or base > noise.ultra_max_range or world.hexapod_mode is not HexapodMode.OnDeck:
            readings.append(None)
        else:
            readings.append(max(base + n, 0.0))

    held = world.attached is not Attachment.NoneAttached
    load = cfg.hexapod.object_weight if held else 0.0
    load = max(load + load_rng.normal(noise.sigma_load), 0.0)
    tilt = hexapod_tilt(world)
    return HexapodSensors(ultra_front=readings[0], ultra_rear=readings[1], load=load, tilt=tilt)


def simulate_winch_feedback(
    world: WorldState, cfg: ScenarioConfig, winch: WinchState, streams: StreamSet
) -> tuple[Vec3 | None, float | None]:
    """Docking-marker lateral offset and the UAV's downward ultrasonic range."""
    noise = cfg.sensor_noise
    rng = streams.get("winch/feedback")
    mx = rng.normal(noise.sigma_marker)
    my = rng.normal(noise.sigma_marker)
    rn = rng.normal(noise.sigma_ultra)
    uav = world.uav_true_pose.position
    hexp = world.hexapod_true_pose.position
    marker = None
    if world.hexapod_mode in (HexapodMode.Hanging, HexapodMode.Stowed) and winch.cable_length <= MARKER_VISIBLE_RANGE:
        marker = Vec3(hexp.x - uav.x + mx, hexp.y - uav.y + my, 0.0)
    rng_range = None
    dz = uav.z - hexp.z
    if 0.0 <= dz <= 8.0:
        rng_range = max(dz + rn, 0.0)
    return marker, rng_range


def scene_histogram(world: WorldState, cfg: ScenarioConfig, t_exp_applied: float) -> Histogram256:
    """Parametric brightness histogram of the camera scene.

    Exposure error shifts the mean; the shape is a discretized normal.
    Deterministic, no random draws.
    """
    t_ideal = ideal_exposure(world, cfg)
    mean = 255.0 * min(max(t_exp_applied / (2.0 * t_ideal), 0.02), 0.98)
    sigma = 30.0
    levels = np.arange(256, dtype=float)
    weights = np.exp(-0.5 * ((levels - mean) / sigma) ** 2)
    counts = np.floor(weights / weights.sum() * 4096.0).astype(np.int64)
    counts[int(round(mean))] += 4096 - int(counts.sum())
    return Histogram256(counts, int(counts.sum()))


def gather_sensors(
    world: WorldState, cfg: ScenarioConfig, winch: WinchState, t_exp_applied: float, streams: StreamSet
) -> SensorBundle:
    """All per-tick sensor outputs, drawn in the documented stream order."""
    imu = simulate_imu(world, cfg, streams)
    tags = simulate_tag_detections(world, cfg, t_exp_applied, streams)
    flow, depth, lidar = simulate_flow_and_heights(world, cfg, streams)
    hexapod = simulate_hexapod_sensors(world, cfg, streams)
    marker, winch_range = simulate_winch_feedback(world, cfg, winch, streams)
    pos = world.uav_true_pose.position
    on_vessel = over_deck(world.vessel_pose, cfg.deck_half_extent, pos.x, pos.y)
    surface_z = deck_surface_z(world.vessel_pose, pos.x, pos.y) if on_vessel else 0.0
    return SensorBundle(
        t=world.t,
        tags=tags,
        flow=flow,
        depth_height=depth,
        lidar_height=lidar,
        imu=imu,
        hexapod=hexapod,
        winch_marker_offset=marker,
        winch_range=winch_range,
        over_vessel=on_vessel,
        true_height_over_surface=pos.z - surface_z,
        camera_histogram=scene_histogram(world, cfg, t_exp_applied),
    )
