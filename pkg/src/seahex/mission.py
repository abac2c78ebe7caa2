"""Closed-loop mission driver: the full retrieval sequence at desk scale.

One world tick runs the pipeline

    world_step -> sensors -> channel step -> agent steps -> commands

with the aerial agent (exposure control, tag/flow localization, filter,
tracker, mission planner, winch) and the ground agent (command handling,
action selection, grasping, telemetry) exchanging frames only through
the simulated RF channels.  The planner, tracker, and telemetry run once
every ``planner_period_ticks`` world ticks.

The run log is JSON Lines: a meta record, then one record per planner
tick with estimated and true poses and the events that fired.  Identical
scenario and seed reproduce the log byte for byte.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from . import comms
from .comms import Channel, ChannelModel, LinkStatus, link_supervisor
from .geometry import Attitude, Pose, Vec3, ZERO3, rotate_z, inverse_transform_point
from .hexapod import (
    GraspState,
    HexapodSensors,
    LoadThresholds,
    WinchMode,
    WinchParams,
    WinchState,
    grasp_confirmed,
    stability_check,
    target_centered,
    winch_step,
)
from .localization import (
    LocalizationManager,
    ManagerParams,
    Modality,
    NoHeightAvailable,
    ekf_init,
    ekf_position,
    ekf_predict,
    ekf_update_position,
    ekf_update_velocity,
    flow_to_world_velocity,
    fuse_height,
    pose_from_tag,
)
from .perception import (
    CameraIntrinsics,
    DetectorConfig,
    SimulatedDetector,
    SortTracker,
    project_to_body,
)
from .photometry import ExposureCalibration, exposure_time
from .planning import (
    ActionCandidate,
    MissionContext,
    MissionStage,
    Observations,
    PlannerParams,
    PRIMITIVES,
    WinchDirective,
    action_affordances,
    goal_proximity_weights,
    mission_step,
    select_action,
)
from .rng import StreamSet, fnv1a64
from .scenario import ScenarioConfig, tag_map_world
from .simworld import (
    HexapodMode,
    SensorBundle,
    UavCommand,
    WorldState,
    gather_sensors,
    initial_world,
    world_step,
)

# Downward camera extrinsics: optical axis along -z body, image right
# along -y body (x right, y down, z forward in the camera frame).
CAMERA_IN_BODY = Pose(position=Vec3(0.0, 0.0, -0.05), attitude=Attitude(roll=math.pi, yaw=-math.pi / 2.0))

TARGET_CLASS = 0
COMMAND_RESEND_TICKS = 10  # planner ticks between command re-sends


def nominal_vessel_pose(cfg: ScenarioConfig) -> Pose:
    """Surveyed mean deck pose (no wave motion), used for the tag map."""
    wp = cfg.vessel_path[0]
    return Pose(position=Vec3(wp.x, wp.y, cfg.deck_height), attitude=Attitude(yaw=cfg.vessel_yaw))


@dataclass
class RunLogRecord:
    t: float
    stage: str
    modality: str
    est: tuple[float, float, float]
    true: tuple[float, float, float]
    err: float
    events: list[str]

    def to_json(self) -> str:
        return json.dumps(
            {
                "type": "rec",
                "t": self.t,
                "stage": self.stage,
                "modality": self.modality,
                "est": list(self.est),
                "true": list(self.true),
                "err": self.err,
                "events": self.events,
            }
        )


@dataclass
class MetricsSummary:
    mission_outcome: str  # Complete | Abort | Timeout
    total_time_s: float
    mean_position_error_m: float
    max_position_error_m: float
    modality_switch_count: int
    retry_count: int
    frames_sent: int
    frames_dropped: int

    def to_dict(self) -> dict:
        return {
            "mission_outcome": self.mission_outcome,
            "total_time_s": self.total_time_s,
            "mean_position_error_m": self.mean_position_error_m,
            "max_position_error_m": self.max_position_error_m,
            "modality_switch_count": self.modality_switch_count,
            "retry_count": self.retry_count,
            "frames_sent": self.frames_sent,
            "frames_dropped": self.frames_dropped,
        }


class UavAgent:
    """Aerial side: sensing, estimation, mission planning, winch, comms."""

    def __init__(self, cfg: ScenarioConfig, streams: StreamSet):
        self.cfg = cfg
        self.calib = ExposureCalibration(cfg.exposure_calib.t_exp_min, cfg.exposure_calib.t_exp_max)
        self.tag_map = tag_map_world(cfg, nominal_vessel_pose(cfg))
        self.manager = LocalizationManager(
            initial_pose=Pose(position=Vec3(cfg.uav.base.x, cfg.uav.base.y, 0.0)),
            params=ManagerParams(
                miss_threshold=cfg.localization.miss_threshold,
                good_threshold=cfg.localization.good_threshold,
                v_max=cfg.uav.v_max,
            ),
        )
        self.ekf = ekf_init(Vec3(cfg.uav.base.x, cfg.uav.base.y, 0.0), pos_var=0.25, vel_var=0.25)
        intr = cfg.detector.intrinsics
        self.intrinsics = CameraIntrinsics(intr.fx, intr.fy, intr.cx, intr.cy, intr.width, intr.height)
        self.detector = SimulatedDetector(
            DetectorConfig(
                intrinsics=self.intrinsics,
                sigma_px=cfg.detector.sigma_px,
                sigma_depth=cfg.detector.sigma_depth,
                miss_rate=cfg.detector.miss_rate,
                false_positive_rate=cfg.detector.false_positive_rate,
                max_depth=cfg.detector.max_depth,
            ),
            streams.get("detector"),
        )
        self.tracker = SortTracker(
            g_max=cfg.tracker.g_max,
            max_age=cfg.tracker.max_age,
            min_hits=cfg.tracker.min_hits,
            dt=cfg.planner_dt,
        )
        self.ctx = MissionContext()
        self.planner_params = PlannerParams(retry_limit=cfg.planner.retry_limit)
        self.winch = WinchState()
        self.winch_params = WinchParams(
            k_p=cfg.winch.k_p,
            rate_max=cfg.winch.rate_max,
            dock_epsilon=cfg.winch.dock_epsilon,
            dock_tolerance=cfg.winch.dock_tolerance,
        )
        self.winch_directive = WinchDirective.Hold
        self.t_exp = exposure_time(cfg.sun_heading, 0.0, self.calib)
        self.seq = 0
        self.sent_opcodes: dict[int, int] = {}  # seq -> opcode
        self.acked_opcodes: set[int] = set()
        self.last_report: comms.StateReport | None = None
        self.last_rx_planner_tick: int | None = None
        self.track_target: Vec3 | None = None  # body frame
        self.target_track_id: int | None = None
        self.h_meas: float | None = None
        self.winch_docked_latched = False
        self.hold_xy: Vec3 | None = None  # hover anchor while the robot hangs
        self.p_rel_latched: Vec3 | None = None  # drop-relative target vector
        self.pending_resend: dict[int, int] = {}  # opcode -> planner tick of last send
        self.events: list[str] = []
        self.est_position = self.manager.state.last_pose.position
        self.att_est = Attitude()
        self.modality = Modality.TagRelative
        self.hold_active = False
        self._planner_tick = 0

    # -- helpers ----------------------------------------------------------

    def _send(self, msg, outbox: list[bytes]) -> int:
        frame = comms.encode(msg, self.seq, comms.SYS_UAV)
        outbox.append(frame)
        seq = self.seq
        self.seq = (self.seq + 1) & 0xFF
        return seq

    def _send_command(self, opcode: int, planner_tick: int, outbox: list[bytes]) -> None:
        seq = self._send(comms.Command(opcode=opcode), outbox)
        self.sent_opcodes[seq] = opcode
        self.pending_resend[opcode] = planner_tick

    def _estimate(self, sensors: SensorBundle, dt: float) -> None:
        cfg = self.cfg
        imu = sensors.imu
        self.att_est = imu.attitude

        self.t_exp = exposure_time(cfg.sun_heading, imu.attitude.yaw, self.calib)

        tag_fix = None
        best = None
        for det in sensors.tags:
            if det.tag_id in self.tag_map.entries:
                r = det.p_tag_body.norm()
                if best is None or r < best[0]:
                    best = (r, det)
        if best is not None:
            tag_fix = pose_from_tag(best[1], self.tag_map, imu.attitude)

        over_vessel_belief = self._over_vessel_belief()
        try:
            self.h_meas = fuse_height(sensors.depth_height, sensors.lidar_height, over_vessel_belief)
        except NoHeightAvailable:
            self.h_meas = None

        flow_vel = None
        if self.h_meas is not None and self.h_meas > 0.05:
            v = flow_to_world_velocity(sensors.flow, imu.gyro, self.h_meas, imu.attitude)
            surface_z = nominal_vessel_pose(cfg).position.z if over_vessel_belief else 0.0
            z_meas = surface_z + self.h_meas
            vz = max(-0.5, min(0.5, (z_meas - self.manager.state.last_pose.position.z) / 0.5))
            flow_vel = Vec3(v.x, v.y, vz)

        est, modality, switched = self.manager.step(tag_fix, flow_vel, dt, self.ctx.stage)
        self.est_position = est
        self.modality = modality
        if switched:
            self.events.append(f"switch:{modality.value}")

        self.ekf = ekf_predict(self.ekf, dt, cfg.localization.q_accel)
        r_pos = cfg.localization.sigma_tag_fix**2
        if modality is Modality.OpticalFlow:
            r_pos = (4.0 * cfg.localization.sigma_tag_fix) ** 2
        self.ekf = ekf_update_position(self.ekf, est, r_pos)
        if flow_vel is not None:
            self.ekf = ekf_update_velocity(self.ekf, flow_vel, cfg.localization.sigma_flow_vel**2)

    def _over_vessel_belief(self) -> bool:
        anchor = nominal_vessel_pose(self.cfg).position
        p = self.est_position
        margin = 1.0
        return (
            abs(p.x - anchor.x) <= self.cfg.deck_half_extent + margin
            and abs(p.y - anchor.y) <= self.cfg.deck_half_extent + margin
        )

    def _run_tracker(self, world: WorldState) -> None:
        obj = world.object_pose.position
        uav = world.uav_true_pose
        p_body_true = rotate_z(-uav.attitude.yaw, obj - uav.position)
        p_cam = inverse_transform_point(CAMERA_IN_BODY, p_body_true)
        raw = self.detector.detect([(p_cam, TARGET_CLASS)])
        detections = [
            project_to_body(det2d, depth, self.intrinsics, CAMERA_IN_BODY) for det2d, depth in raw
        ]
        confirmed, _ = self.tracker.step(detections)
        self.track_target = None
        self.target_track_id = None
        for tr in confirmed:
            if tr.class_id == TARGET_CLASS:
                self.track_target = tr.position
                self.target_track_id = tr.id
                break

    def _observations(self, link: LinkStatus) -> Observations:
        cfg = self.cfg
        est = ekf_position(self.ekf)
        report = self.last_report
        grasp_ok = report is not None and report.grasp_state == GraspState.Holding.value
        stability = True
        if report is not None and self.ctx.stage in {
            MissionStage.HexapodApproach,
            MissionStage.Grasp,
            MissionStage.RetryPosture,
        }:
            stability = stability_check(
                HexapodSensors(None, None, report.load, report.tilt), cfg.hexapod.tilt_limit
            )
        target_xy_ok = False
        if self.track_target is not None:
            target_xy_ok = math.hypot(self.track_target.x, self.track_target.y) <= cfg.uav.arrive_tol
        hover_ok = self.h_meas is not None and abs(self.h_meas - cfg.uav.hover_alt) <= 0.3
        wp = cfg.uav.waypoint
        base = cfg.uav.base
        return Observations(
            takeoff_complete=est.z >= cfg.uav.takeoff_alt - 0.2,
            target_confirmed=self.target_track_id is not None,
            target_track_id=self.target_track_id,
            arrived_over_target=target_xy_ok and hover_ok,
            hexapod_on_deck=comms.OP_DEPLOY in self.acked_opcodes,
            hexapod_centered=comms.OP_APPROACH in self.acked_opcodes
            or (report is not None and report.grasp_state == GraspState.Centered.value),
            grasp_confirmed=grasp_ok,
            stability_ok=stability,
            winch_docked=self.winch_docked_latched,
            at_waypoint=math.hypot(est.x - wp.x, est.y - wp.y) <= cfg.uav.arrive_tol
            and abs(est.z - wp.z) <= 0.5,
            at_base=math.hypot(est.x - base.x, est.y - base.y) <= cfg.uav.arrive_tol,
            # The measured height is bias-free where the estimate can carry
            # a small re-anchoring offset, so prefer it for touchdown.
            landed=(self.h_meas is not None and self.h_meas <= 0.12) or est.z <= 0.15,
            link_ok=link is LinkStatus.Healthy,
        )

    def velocity_command(self) -> UavCommand:
        cfg = self.cfg
        stage = self.ctx.stage
        est = ekf_position(self.ekf)
        anchor = nominal_vessel_pose(cfg).position
        target = None
        yaw_sp = None

        if stage is MissionStage.Takeoff:
            target = Vec3(cfg.uav.base.x, cfg.uav.base.y, cfg.uav.takeoff_alt)
        elif stage is MissionStage.Search:
            target = cfg.planner.search_point
            yaw_sp = math.atan2(anchor.y - est.y, anchor.x - est.x)
        elif stage is MissionStage.NavigateToTarget:
            if self.track_target is not None:
                dz = 0.0
                if self.h_meas is not None:
                    dz = cfg.uav.hover_alt - self.h_meas
                offs = rotate_z(self.att_est.yaw, self.track_target)
                target = Vec3(est.x + offs.x, est.y + offs.y, est.z + dz)
            else:
                target = Vec3(anchor.x, anchor.y, est.z)
        elif stage in {
            MissionStage.DeployHexapod,
            MissionStage.HexapodApproach,
            MissionStage.Grasp,
            MissionStage.RetryPosture,
            MissionStage.WinchUp,
        }:
            dz = 0.0
            if self.h_meas is not None:
                dz = cfg.uav.hover_alt - self.h_meas
            track_report = stage in {MissionStage.HexapodApproach, MissionStage.Grasp}
            if track_report and self.last_report is not None:
                # Robot is walking the deck: keep the winch overhead.
                rp = self.last_report.pose
                target = Vec3(rp[0], rp[1], est.z + dz)
            else:
                # Robot hangs from the winch: its pose would just echo
                # ours, so station-keep on the latched anchor instead.
                anchor_xy = self.hold_xy if self.hold_xy is not None else est
                target = Vec3(anchor_xy.x, anchor_xy.y, est.z + dz)
        elif stage is MissionStage.NavigateWaypoint:
            target = cfg.uav.waypoint
        elif stage is MissionStage.ReturnToBase:
            target = Vec3(cfg.uav.base.x, cfg.uav.base.y, max(cfg.uav.takeoff_alt - 1.0, 3.0))
        elif stage is MissionStage.Land:
            target = Vec3(cfg.uav.base.x, cfg.uav.base.y, -1.0)

        if target is None or self.hold_active:
            return UavCommand(velocity=ZERO3, yaw=yaw_sp)
        err = target - est
        v = err * cfg.uav.k_nav
        n = v.norm()
        if n > cfg.uav.v_max:
            v = v * (cfg.uav.v_max / n)
        return UavCommand(velocity=v, yaw=yaw_sp)

    # -- per-tick entry points --------------------------------------------

    def sensor_tick(self, sensors: SensorBundle, rx_frames: list[bytes], dt: float) -> None:
        for frame in rx_frames:
            try:
                msg, seq, sys_id = comms.decode(frame)
            except comms.DecodeError:
                continue
            if sys_id != comms.SYS_HEXAPOD:
                continue
            self.last_rx_planner_tick = self._planner_tick
            if isinstance(msg, comms.StateReport):
                self.last_report = msg
            elif isinstance(msg, comms.Ack) and msg.ok:
                opcode = self.sent_opcodes.get(msg.seq_acked)
                if opcode is not None and opcode not in self.acked_opcodes:
                    self.acked_opcodes.add(opcode)
                    if opcode == comms.OP_GRASP:
                        self.events.append("grasp")
        self._estimate(sensors, dt)

    def planner_tick(self, world: WorldState, sensors: SensorBundle, planner_tick: int, outbox: list[bytes]) -> None:
        self._planner_tick = planner_tick
        cfg = self.cfg
        if self.ctx.stage in {
            MissionStage.Search,
            MissionStage.NavigateToTarget,
            MissionStage.HexapodApproach,
            MissionStage.RetryPosture,
        }:
            self._run_tracker(world)

        age = planner_tick - (self.last_rx_planner_tick if self.last_rx_planner_tick is not None else -10**9)
        link = link_supervisor(age, cfg.planner.link_timeout_ticks)

        obs = self._observations(link)
        prev_stage = self.ctx.stage
        self.ctx, commands = mission_step(self.ctx, obs, self.planner_params)
        self.hold_active = commands.hold
        if self.ctx.stage is not prev_stage:
            self.events.append(f"stage:{self.ctx.stage.value}")
            if self.ctx.stage is MissionStage.WinchUp:
                self.winch_docked_latched = False
            if self.ctx.stage in {
                MissionStage.DeployHexapod,
                MissionStage.RetryPosture,
                MissionStage.WinchUp,
            }:
                self.hold_xy = ekf_position(self.ekf)
                self.p_rel_latched = None
            if self.ctx.stage is MissionStage.RetryPosture:
                self.events.append("retry")
                # The robot must re-approach and re-grasp from scratch.
                self.acked_opcodes.discard(comms.OP_APPROACH)
                self.acked_opcodes.discard(comms.OP_GRASP)
        self.winch_directive = commands.winch

        self._send(comms.Heartbeat(stage=list(MissionStage).index(self.ctx.stage)), outbox)
        if commands.hexapod_opcode is not None:
            self._send_command(commands.hexapod_opcode, planner_tick, outbox)
        if commands.hold:
            self._send_command(comms.OP_HOLD, planner_tick, outbox)
        for opcode, sent_at in list(self.pending_resend.items()):
            if opcode in self.acked_opcodes or opcode in (comms.OP_HOLD, comms.OP_ABORT):
                self.pending_resend.pop(opcode, None)
            elif planner_tick - sent_at >= COMMAND_RESEND_TICKS:
                self._send_command(opcode, planner_tick, outbox)
        if commands.send_target_location:
            # The robot drops directly below us, so at approach entry the
            # body-frame track offset IS the robot-to-target vector.  That
            # keeps our absolute drift out of the handoff; the vector is
            # latched so re-sends describe the same deck point.
            if self.p_rel_latched is None and self.track_target is not None:
                self.p_rel_latched = rotate_z(self.att_est.yaw, self.track_target)
            if self.p_rel_latched is not None:
                p = self.p_rel_latched
                self._send(
                    comms.TargetLocation(
                        p_rel=(p.x, p.y, p.z), track_id=self.target_track_id or 0
                    ),
                    outbox,
                )

    def winch_tick(self, sensors: SensorBundle, dt: float) -> None:
        mode = {
            WinchDirective.Lower: WinchMode.Lower,
            WinchDirective.Raise: WinchMode.Raise,
            WinchDirective.Hold: WinchMode.Hold,
        }[self.winch_directive]
        height = self.h_meas if self._over_vessel_belief() else None
        self.winch = winch_step(
            self.winch,
            height,
            sensors.winch_marker_offset,
            sensors.winch_range,
            dt,
            mode,
            self.winch_params,
        )
        if self.winch.docked and not self.winch_docked_latched and self.ctx.stage is MissionStage.WinchUp:
            self.winch_docked_latched = True
            self.events.append("dock")


class HexapodAgent:
    """Ground side: executes commands, selects actions, reports state."""

    def __init__(self, cfg: ScenarioConfig, streams: StreamSet):
        self.cfg = cfg
        self.pose_rng = streams.get("hexapod/pose")
        self.thresholds = LoadThresholds(cfg.hexapod.load_threshold_ground, cfg.hexapod.load_threshold_air)
        self.seq = 0
        self.grasp_state = GraspState.Searching
        self.target: Vec3 | None = None
        self.deploy_cmd_seq: int | None = None
        self.approach_cmd_seq: int | None = None
        self.grasp_cmd_seq: int | None = None
        self.approaching = False
        self.grasping = False
        self.holding = False
        self.hold_cmd = False
        self.last_rx_planner_tick: int | None = None
        self.current_primitive: str | None = None
        self.pose_belief = Pose()

    def _send(self, msg, outbox: list[bytes]) -> None:
        outbox.append(comms.encode(msg, self.seq, comms.SYS_HEXAPOD))
        self.seq = (self.seq + 1) & 0xFF

    def _ack(self, seq_acked: int, outbox: list[bytes]) -> None:
        self._send(comms.Ack(seq_acked=seq_acked, ok=1), outbox)

    def handle_rx(self, rx_frames: list[bytes], planner_tick: int) -> None:
        for frame in rx_frames:
            try:
                msg, seq, sys_id = comms.decode(frame)
            except comms.DecodeError:
                continue
            if sys_id != comms.SYS_UAV:
                continue
            self.last_rx_planner_tick = planner_tick
            if isinstance(msg, comms.Command):
                self.hold_cmd = False
                if msg.opcode == comms.OP_DEPLOY:
                    self.deploy_cmd_seq = seq
                elif msg.opcode == comms.OP_APPROACH:
                    self.approach_cmd_seq = seq
                    if not self.approaching:  # re-sends must not restart a
                        self.approaching = True  # latched approach
                        self.grasping = False
                        self.holding = False
                        self.target = None  # re-latch from the next target message
                        self.grasp_state = GraspState.Searching
                elif msg.opcode == comms.OP_GRASP:
                    self.grasp_cmd_seq = seq
                    self.approaching = False
                    self.grasping = True
                elif msg.opcode == comms.OP_HOLD:
                    self.hold_cmd = True
                elif msg.opcode == comms.OP_ABORT:
                    self.approaching = False
                    self.grasping = False
                    self.current_primitive = None
            elif isinstance(msg, comms.TargetLocation):
                # Applied once per approach, before any walking, so the
                # relative vector anchors at the drop point.
                if self.target is None:
                    p = self.pose_belief.position
                    self.target = Vec3(p.x + msg.p_rel[0], p.y + msg.p_rel[1], p.z + msg.p_rel[2])

    def planner_tick(
        self,
        world: WorldState,
        sensors: SensorBundle,
        planner_tick: int,
        link_timeout: int,
        outbox: list[bytes],
    ) -> str | None:
        cfg = self.cfg
        hexapod = sensors.hexapod
        feet_contact = world.hexapod_mode is HexapodMode.OnDeck

        true_pos = world.hexapod_true_pose.position
        noise = cfg.sensor_noise.sigma_hexapod_pose
        self.pose_belief = Pose(
            position=Vec3(
                true_pos.x + self.pose_rng.normal(noise),
                true_pos.y + self.pose_rng.normal(noise),
                true_pos.z,
            ),
            attitude=world.hexapod_true_pose.attitude,
        )

        age = planner_tick - (self.last_rx_planner_tick if self.last_rx_planner_tick is not None else -(10**9))
        link_lost = link_supervisor(age, link_timeout) is LinkStatus.Lost

        centered = target_centered(hexapod, cfg.hexapod.grasp_range)
        airborne = not feet_contact
        grasped = grasp_confirmed(hexapod, airborne, self.thresholds)

        if self.holding and not grasped:
            self.holding = False
            self.grasping = False
            self.approaching = False  # wait for fresh commands after a slip
            self.grasp_state = GraspState.Lost
        if self.grasping and grasped:
            self.holding = True
            self.grasp_state = GraspState.Holding
            if self.grasp_cmd_seq is not None:
                self._ack(self.grasp_cmd_seq, outbox)
        elif centered and self.grasp_state in (GraspState.Searching, GraspState.Centered):
            self.grasp_state = GraspState.Centered
            if self.approach_cmd_seq is not None:
                self._ack(self.approach_cmd_seq, outbox)

        if self.deploy_cmd_seq is not None and feet_contact:
            self._ack(self.deploy_cmd_seq, outbox)

        primitive = None
        if feet_contact and not self.hold_cmd and not link_lost:
            if self.grasping and not self.holding:
                if centered:
                    self.grasp_state = GraspState.Closing
                    primitive = "grasp"
                elif self.target is not None:
                    primitive = self._select_primitive(centered)  # drifted off, re-center
            elif self.approaching and not self.holding and self.target is not None and not centered:
                primitive = self._select_primitive(centered)
        self.current_primitive = primitive

        pose = self.pose_belief
        report = comms.StateReport(
            pose=(
                pose.position.x,
                pose.position.y,
                pose.position.z,
                pose.attitude.roll,
                pose.attitude.pitch,
                pose.attitude.yaw,
            ),
            grasp_state=self.grasp_state.value,
            load=hexapod.load,
            tilt=hexapod.tilt,
        )
        self._send(report, outbox)
        return primitive

    def _select_primitive(self, centered: bool) -> str | None:
        cfg = self.cfg
        g = goal_proximity_weights(
            self.pose_belief, self.target, PRIMITIVES, cfg.hexapod.step_len, cfg.hexapod.rot_step
        )
        a = action_affordances(
            self.pose_belief,
            self.target,
            centered,
            nominal_deck_center(cfg),
            cfg.deck_half_extent,
            PRIMITIVES,
            cfg.hexapod.step_len,
            cfg.hexapod.rot_step,
        )
        candidates = [
            ActionCandidate(id=i, name=PRIMITIVES[i].name, goal_weight=g[i], affordance=a[i])
            for i in range(len(PRIMITIVES))
        ]
        choice = PRIMITIVES[select_action(candidates)]
        if choice.is_hold:
            return None
        return choice.name


def nominal_deck_center(cfg: ScenarioConfig) -> Vec3:
    wp = cfg.vessel_path[0]
    return Vec3(wp.x, wp.y, cfg.deck_height)


class MissionRunner:
    """Steps the world and both agents until the mission ends."""

    def __init__(self, cfg: ScenarioConfig):
        self.cfg = cfg
        self.streams = StreamSet(cfg.seed)
        self.world = initial_world(cfg)
        self.uav = UavAgent(cfg, self.streams)
        self.hexapod = HexapodAgent(cfg, self.streams)
        self.ch_uav2hex = Channel(
            ChannelModel(cfg.channel.drop_prob, cfg.channel.latency, fnv1a64("channel/uav2hex") ^ cfg.seed)
        )
        self.ch_hex2uav = Channel(
            ChannelModel(cfg.channel.drop_prob, cfg.channel.latency, fnv1a64("channel/hex2uav") ^ cfg.seed)
        )
        self.records: list[RunLogRecord] = []
        self.retry_total = 0
        self.uav_cmd = UavCommand()
        self.hexapod_cmd: str | None = None
        self.uav_outbox: list[bytes] = []
        self.hex_outbox: list[bytes] = []

    def meta_record(self) -> dict:
        return {
            "type": "meta",
            "seed": self.cfg.seed,
            "dt": self.cfg.dt,
            "planner_period_ticks": self.cfg.planner_period_ticks,
            "v_max": self.cfg.uav.v_max,
            "stages": [s.value for s in MissionStage],
        }

    def run(self) -> tuple[list[RunLogRecord], MetricsSummary]:
        cfg = self.cfg
        period = cfg.planner_period_ticks
        max_ticks = int(round(cfg.duration_s / cfg.dt))
        tick = 0
        while tick < max_ticks and self.uav.ctx.stage not in (MissionStage.Complete, MissionStage.Abort):
            tick += 1
            self.world = world_step(self.world, cfg, self.uav_cmd, self.hexapod_cmd, self.uav.winch)
            sensors = gather_sensors(self.world, cfg, self.uav.winch, self.uav.t_exp, self.streams)

            uav_rx = self.ch_hex2uav.step(self.hex_outbox, tick)
            hex_rx = self.ch_uav2hex.step(self.uav_outbox, tick)
            self.hex_outbox = []
            self.uav_outbox = []

            self.uav.sensor_tick(sensors, uav_rx, cfg.dt)
            planner_tick_index = tick // period
            if tick % period == 0:
                prev_retry = self.uav.ctx.retry_count
                self.uav.planner_tick(self.world, sensors, planner_tick_index, self.uav_outbox)
                if self.uav.ctx.retry_count > prev_retry:
                    self.retry_total += 1
                self.hexapod.handle_rx(hex_rx, planner_tick_index)
                self.hexapod_cmd = self.hexapod.planner_tick(
                    self.world, sensors, planner_tick_index, cfg.planner.link_timeout_ticks, self.hex_outbox
                )
                self._record(sensors)
            else:
                self.hexapod.handle_rx(hex_rx, planner_tick_index)
            self.uav.winch_tick(sensors, cfg.dt)
            self.uav_cmd = self.uav.velocity_command()

        outcome = {
            MissionStage.Complete: "Complete",
            MissionStage.Abort: "Abort",
        }.get(self.uav.ctx.stage, "Timeout")
        errs = [r.err for r in self.records] or [0.0]
        metrics = MetricsSummary(
            mission_outcome=outcome,
            total_time_s=self.world.t,
            mean_position_error_m=sum(errs) / len(errs),
            max_position_error_m=max(errs),
            modality_switch_count=self.uav.manager.state.switch_count,
            retry_count=self.retry_total,
            frames_sent=self.ch_uav2hex.sent + self.ch_hex2uav.sent,
            frames_dropped=self.ch_uav2hex.dropped + self.ch_hex2uav.dropped,
        )
        return self.records, metrics

    def _record(self, sensors: SensorBundle) -> None:
        est = self.uav.est_position
        true = self.world.uav_true_pose.position
        err = (est - true).norm()
        self.records.append(
            RunLogRecord(
                t=self.world.t,
                stage=self.uav.ctx.stage.value,
                modality=self.uav.modality.value,
                est=(est.x, est.y, est.z),
                true=(true.x, true.y, true.z),
                err=err,
                events=self.uav.events,
            )
        )
        self.uav.events = []


def run_mission(cfg: ScenarioConfig) -> tuple[list[RunLogRecord], MetricsSummary, MissionRunner]:
    runner = MissionRunner(cfg)
    records, metrics = runner.run()
    return records, metrics, runner


def write_runlog(path: str, runner: MissionRunner, records: list[RunLogRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(runner.meta_record()) + "\n")
        for rec in records:
            fh.write(rec.to_json() + "\n")


def write_metrics(path: str, metrics: MetricsSummary) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(metrics.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
