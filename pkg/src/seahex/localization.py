"""GNSS-denied localization: tag fixes, flow velocity, height fusion,
modality management, and the position/velocity Kalman filter.

Position fixes come from fiducial tags on the vessel reference frame:

    p_uav = p_tag_world - R(attitude) @ p_tag_body

Velocity comes from a downward optical-flow sensor.  The sensor perceives
rotational rates; after removing the gyro rates and scaling by height the
body-plane velocity is

    v_body = ((omega_y - gyro_y) * h, -(omega_x - gyro_x) * h, 0)

rotated into the world by yaw only.  Positive forward motion produces
positive omega_y.

The localization manager owns modality selection.  Task stages in the
retrieval phase force optical flow; otherwise tag loss beyond a miss
threshold falls back to flow and a stretch of good fixes recovers
tag-relative operation.  Whenever the modality switches, the reference
origin is re-anchored to the last reported pose, and every reported step
is rate-limited to v_max * dt, so the pose stream stays continuous for
the downstream filter no matter how noisy the raw fixes are.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .geometry import Attitude, Pose, Vec3, ZERO3, rotate, rotate_z
from .planning import MissionStage, RETRIEVAL_STAGES


class UnknownTag(KeyError):
    pass


class InvalidHeight(ValueError):
    pass


class NoHeightAvailable(RuntimeError):
    pass


class NonFiniteMeasurement(ValueError):
    pass


# Hardware range limits for the two height sources (meters).
DEPTH_CAMERA_MAX_RANGE = 8.0
LIDAR_MAX_RANGE = 20.0


@dataclass(frozen=True)
class TagDetection:
    tag_id: int
    p_tag_body: Vec3  # tag position expressed in the body frame
    timestamp: float


@dataclass(frozen=True)
class TagMap:
    """Known world poses of the fiducial tags, keyed by id."""

    entries: dict[int, Pose]


class HeightSource(Enum):
    DepthCamera = "DepthCamera"
    Lidar2D = "Lidar2D"


@dataclass(frozen=True)
class HeightMeasurement:
    source: HeightSource
    value: float
    valid: bool


@dataclass(frozen=True)
class FlowSample:
    omega_x: float  # rad/s about body x
    omega_y: float  # rad/s about body y
    timestamp: float


class Modality(Enum):
    TagRelative = "TagRelative"
    OpticalFlow = "OpticalFlow"


def pose_from_tag(det: TagDetection, tag_map: TagMap, attitude: Attitude) -> Vec3:
    """UAV world position from one tag detection, by rigid inversion."""
    entry = tag_map.entries.get(det.tag_id)
    if entry is None:
        raise UnknownTag(det.tag_id)
    return entry.position - rotate(attitude, det.p_tag_body)


def flow_to_world_velocity(
    flow: FlowSample, gyro: tuple[float, float], height: float, attitude: Attitude
) -> Vec3:
    """World-frame translational velocity from a flow sample.

    Gyro rates about body x and y are subtracted to compensate vehicle
    rotation; the residual rates scale with height above the surface.
    """
    if not (height > 0.0 and math.isfinite(height)):
        raise InvalidHeight(f"height must be positive and finite, got {height}")
    vx = (flow.omega_y - gyro[1]) * height
    vy = -(flow.omega_x - gyro[0]) * height
    return rotate_z(attitude.yaw, Vec3(vx, vy, 0.0))


def fuse_height(
    depth: HeightMeasurement | None,
    lidar: HeightMeasurement | None,
    over_vessel: bool,
) -> float:
    """Pick the height source for the current situation.

    The depth camera only counts above the vessel and inside its 8 m
    range; the 2D lidar counts inside 20 m.  Over the vessel the depth
    camera wins, over water the lidar does.
    """
    depth_ok = (
        depth is not None
        and depth.valid
        and depth.value <= DEPTH_CAMERA_MAX_RANGE
        and over_vessel
    )
    lidar_ok = lidar is not None and lidar.valid and lidar.value <= LIDAR_MAX_RANGE
    if depth_ok:
        return depth.value
    if lidar_ok:
        return lidar.value
    raise NoHeightAvailable("no height source accepted")


# ---------------------------------------------------------------------------
# Localization manager


@dataclass
class LocalizationManagerState:
    active: Modality = Modality.TagRelative
    origin_offset: Vec3 = ZERO3  # correction added to raw tag fixes
    last_pose: Pose = Pose()
    tag_miss_count: int = 0
    switch_count: int = 0
    tag_good_count: int = 0
    last_velocity: Vec3 = ZERO3
    coasting: bool = False


@dataclass(frozen=True)
class ManagerParams:
    miss_threshold: int = 5  # consecutive misses before falling back to flow
    good_threshold: int = 10  # consecutive fixes before recovering tags
    v_max: float = 2.0  # m/s bound on the reported pose rate
    flow_stages: frozenset = RETRIEVAL_STAGES


class LocalizationManager:
    """Single-owner modality manager producing a continuous pose stream."""

    def __init__(self, initial_pose: Pose = Pose(), params: ManagerParams = ManagerParams()):
        self.params = params
        self.state = LocalizationManagerState(last_pose=initial_pose)

    def step(
        self,
        tag_fix: Vec3 | None,
        flow_velocity: Vec3 | None,
        dt: float,
        stage: MissionStage = MissionStage.Search,
    ) -> tuple[Vec3, Modality, bool]:
        """One estimator tick.  Returns (position, modality, switched)."""
        if not dt > 0.0:
            raise ValueError("dt must be positive")
        st, p = self.state, self.params

        if tag_fix is not None:
            st.tag_miss_count = 0
            st.tag_good_count += 1
        else:
            st.tag_miss_count += 1
            st.tag_good_count = 0

        if stage in p.flow_stages:
            desired = Modality.OpticalFlow
        elif st.active is Modality.TagRelative and st.tag_miss_count > p.miss_threshold:
            desired = Modality.OpticalFlow
        elif st.active is Modality.OpticalFlow and st.tag_good_count >= p.good_threshold:
            desired = Modality.TagRelative
        else:
            desired = st.active

        switched = desired is not st.active
        last = st.last_pose.position
        velocity = flow_velocity if flow_velocity is not None else st.last_velocity
        st.coasting = False

        if desired is Modality.OpticalFlow:
            # Integrate from the last reported pose; on a switch this
            # re-anchors the flow origin there, so the only step is the
            # motion increment itself.
            st.coasting = flow_velocity is None
            candidate = last + velocity * dt
        else:
            if switched:
                # tag_good_count >= good_threshold implies a fix this tick
                st.origin_offset = last - tag_fix
                candidate = last
            elif tag_fix is not None:
                candidate = tag_fix + st.origin_offset
            else:
                st.coasting = flow_velocity is None
                candidate = last + velocity * dt

        step = candidate - last
        limit = p.v_max * dt
        n = step.norm()
        if n > limit:
            candidate = last + step * (limit / n)

        st.last_velocity = flow_velocity if flow_velocity is not None else (candidate - last) * (1.0 / dt)
        st.last_pose = replace(st.last_pose, position=candidate)
        if switched:
            st.active = desired
            st.switch_count += 1
        return candidate, st.active, switched


# ---------------------------------------------------------------------------
# Constant-velocity Kalman filter over [position, velocity]


@dataclass
class EkfState:
    """6-state estimate: x = [px py pz vx vy vz], P its covariance."""

    x: np.ndarray
    P: np.ndarray


def ekf_init(
    position: Vec3 = ZERO3,
    velocity: Vec3 = ZERO3,
    pos_var: float = 1.0,
    vel_var: float = 1.0,
) -> EkfState:
    x = np.concatenate([position.as_array(), velocity.as_array()])
    P = np.diag([pos_var] * 3 + [vel_var] * 3).astype(float)
    return EkfState(x=x, P=P)


def _symmetrize(P: np.ndarray) -> np.ndarray:
    return 0.5 * (P + P.T)


def ekf_predict(s: EkfState, dt: float, q_accel: float) -> EkfState:
    """Constant-velocity propagation with white-acceleration process noise."""
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    F = np.eye(6)
    F[0, 3] = F[1, 4] = F[2, 5] = dt
    q2 = q_accel * q_accel
    I3 = np.eye(3)
    Q = np.block(
        [
            [q2 * dt**3 / 3.0 * I3, q2 * dt**2 / 2.0 * I3],
            [q2 * dt**2 / 2.0 * I3, q2 * dt * I3],
        ]
    )
    x = F @ s.x
    P = _symmetrize(F @ s.P @ F.T + Q)
    return EkfState(x=x, P=P)


def _ekf_update(s: EkfState, z: Vec3, r: float, block: slice) -> EkfState:
    if not (z.is_finite()):
        raise NonFiniteMeasurement(f"measurement {z} is not finite")
    if not (r > 0.0 and math.isfinite(r)):
        raise ValueError("measurement variance must be positive and finite")
    H = np.zeros((3, 6))
    H[:, block] = np.eye(3)
    P = s.P
    S = H @ P @ H.T + r * np.eye(3)
    K = P @ H.T @ np.linalg.inv(S)
    innovation = z.as_array() - H @ s.x
    x = s.x + K @ innovation
    IKH = np.eye(6) - K @ H
    P = _symmetrize(IKH @ P @ IKH.T + r * (K @ K.T))  # Joseph form
    return EkfState(x=x, P=P)


def ekf_update_position(s: EkfState, z: Vec3, r: float) -> EkfState:
    """Fuse a position fix with variance r (m^2)."""
    return _ekf_update(s, z, r, slice(0, 3))


def ekf_update_velocity(s: EkfState, z: Vec3, r: float) -> EkfState:
    """Fuse a velocity measurement with variance r ((m/s)^2)."""
    return _ekf_update(s, z, r, slice(3, 6))


def ekf_position(s: EkfState) -> Vec3:
    return Vec3.from_array(s.x[:3])


def ekf_velocity(s: EkfState) -> Vec3:
    return Vec3.from_array(s.x[3:])
