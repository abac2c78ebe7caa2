"""Desk-scale simulator of a tethered UAV + hexapod maritime retrieval team.

GNSS-denied localization (tag-relative, optical flow, dual height
sources), heading-aware exposure control with histogram-weighted gamma
enhancement, 3D detection tracking, priority-based mission planning,
grasp and winch logic, and a byte-exact telemetry protocol, all driven
by one deterministic, seeded world model.
"""

from .geometry import Attitude, FrameId, Pose, Vec3, rotation_matrix, transform_point, wrap_angle
from .photometry import (
    ExposureCalibration,
    GammaTable,
    GrayImage,
    Histogram256,
    agcwd_apply,
    agcwd_gamma,
    exposure_time,
    histogram,
    load_pgm,
    save_pgm,
)
from .localization import (
    EkfState,
    FlowSample,
    HeightMeasurement,
    HeightSource,
    LocalizationManager,
    ManagerParams,
    Modality,
    TagDetection,
    TagMap,
    ekf_init,
    ekf_predict,
    ekf_update_position,
    ekf_update_velocity,
    flow_to_world_velocity,
    fuse_height,
    pose_from_tag,
)
from .perception import (
    CameraIntrinsics,
    Detection2D,
    Detection3D,
    SortTracker,
    project_to_body,
)
from .planning import (
    ActionCandidate,
    MissionContext,
    MissionStage,
    Observations,
    goal_proximity_weights,
    mission_step,
    select_action,
)
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
from .comms import (
    Ack,
    Channel,
    ChannelModel,
    Command,
    Heartbeat,
    LinkStatus,
    StateReport,
    TargetLocation,
    crc16_x25,
    decode,
    decode_stream,
    encode,
    link_supervisor,
)
from .scenario import ScenarioConfig, load_scenario, save_scenario, scenario_from_dict, scenario_to_dict
from .simworld import SensorBundle, UavCommand, WorldState, initial_world, vessel_pose_at, world_step
from .mission import MetricsSummary, MissionRunner, RunLogRecord, run_mission

__version__ = "0.1.0"
