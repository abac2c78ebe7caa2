"""2D-to-3D detection projection and online multi-object tracking.

Detections arrive as pixel boxes; with a depth value they back-project
through the pinhole model

    X = (u - cx) * d / fx,   Y = (v - cy) * d / fy,   Z = d

(camera frame: x right, y down, z forward) and are carried into the body
frame by the camera extrinsic pose.

Tracking follows the SORT recipe adapted to 3D points: one constant
velocity Kalman filter per track, detections associated to predicted
track positions by a globally optimal minimum-cost assignment on
Euclidean distance.  Pairs farther apart than the gate are charged a
large fixed penalty and never matched; leftover detections spawn tracks,
and tracks unseen for max_age steps are dropped.  A track is reported
once it has min_hits updates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import Pose, Vec3, transform_point
from .localization import (
    EkfState,
    ekf_init,
    ekf_position,
    ekf_predict,
    ekf_update_position,
)
from .rng import Xoshiro256StarStar

GATE_PENALTY = 1.0e6


class InvalidDepth(ValueError):
    pass


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")


@dataclass(frozen=True)
class Detection2D:
    u: float
    v: float
    w: float
    h: float
    class_id: int
    confidence: float


@dataclass(frozen=True)
class Detection3D:
    p_body: Vec3
    class_id: int
    confidence: float


def project_to_body(
    det: Detection2D, depth: float, intr: CameraIntrinsics, cam_pose_in_body: Pose
) -> Detection3D:
    """Back-project a pixel detection at the given depth into the body frame."""
    if not (depth > 0.0 and math.isfinite(depth)):
        raise InvalidDepth(f"depth must be positive and finite, got {depth}")
    x = (det.u - intr.cx) * depth / intr.fx
    y = (det.v - intr.cy) * depth / intr.fy
    p_cam = Vec3(x, y, depth)
    return Detection3D(
        p_body=transform_point(cam_pose_in_body, p_cam),
        class_id=det.class_id,
        confidence=det.confidence,
    )


def project_to_pixel(p_cam: Vec3, intr: CameraIntrinsics) -> tuple[float, float]:
    """Forward pinhole projection of a camera-frame point."""
    if p_cam.z <= 0.0:
        raise InvalidDepth("point is behind the camera")
    return (
        intr.fx * p_cam.x / p_cam.z + intr.cx,
        intr.fy * p_cam.y / p_cam.z + intr.cy,
    )


@dataclass
class Track:
    id: int
    kf: EkfState
    class_id: int
    hits: int = 1
    age: int = 1
    time_since_update: int = 0

    @property
    def position(self) -> Vec3:
        return ekf_position(self.kf)


class SortTracker:
    """Single-owner 3D point tracker.  Ids are never reused by an instance."""

    def __init__(
        self,
        g_max: float = 1.0,
        max_age: int = 5,
        min_hits: int = 3,
        dt: float = 0.1,
        q_accel: float = 1.0,
        r_meas: float = 0.01,
        init_pos_var: float = 0.05,
        init_vel_var: float = 1.0,
    ):
        self.g_max = g_max
        self.max_age = max_age
        self.min_hits = min_hits
        self.dt = dt
        self.q_accel = q_accel
        self.r_meas = r_meas
        self.init_pos_var = init_pos_var
        self.init_vel_var = init_vel_var
        self.tracks: list[Track] = []
        self._next_id = 0

    def _new_track(self, det: Detection3D) -> Track:
        kf = ekf_init(det.p_body, pos_var=self.init_pos_var, vel_var=self.init_vel_var)
        track = Track(id=self._next_id, kf=kf, class_id=det.class_id)
        self._next_id += 1
        return track

    def step(self, detections: list[Detection3D]) -> tuple[list[Track], dict[int, int]]:
        """Advance one frame.

        Returns (confirmed tracks, detection index -> track id for every
        detection, matched or newly spawned).
        """
        for tr in self.tracks:
            tr.kf = ekf_predict(tr.kf, self.dt, self.q_accel)
            tr.age += 1
            tr.time_since_update += 1

        matches, unmatched_dets = associate(
            [tr.position for tr in self.tracks],
            [d.p_body for d in detections],
            self.g_max,
        )

        assignments: dict[int, int] = {}
        for ti, di in matches:
            tr = self.tracks[ti]
            tr.kf = ekf_update_position(tr.kf, detections[di].p_body, self.r_meas)
            tr.hits += 1
            tr.time_since_update = 0
            assignments[di] = tr.id

        for di in unmatched_dets:
            tr = self._new_track(detections[di])
            self.tracks.append(tr)
            assignments[di] = tr.id

        self.tracks = [tr for tr in self.tracks if tr.time_since_update <= self.max_age]
        confirmed = [tr for tr in self.tracks if tr.hits >= self.min_hits]
        return confirmed, assignments


def associate(
    track_positions: list[Vec3], detections: list[Vec3], g_max: float
) -> tuple[list[tuple[int, int]], list[int]]:
    """Min-total-distance assignment with a hard gate.

    Pairs beyond g_max cost GATE_PENALTY and are discarded from the
    optimal solution, so they end up unmatched.  Returns the matched
    (track index, detection index) pairs and the unmatched detection
    indices.
    """
    if not track_positions or not detections:
        return [], list(range(len(detections)))
    cost = np.empty((len(track_positions), len(detections)))
    for i, tp in enumerate(track_positions):
        for j, dp in enumerate(detections):
            d = (tp - dp).norm()
            cost[i, j] = d if d <= g_max else GATE_PENALTY
    rows, cols = linear_sum_assignment(cost)
    matches = [(int(i), int(j)) for i, j in zip(rows, cols) if cost[i, j] < GATE_PENALTY]
    matched_dets = {j for _, j in matches}
    unmatched = [j for j in range(len(detections)) if j not in matched_dets]
    return matches, unmatched


@dataclass(frozen=True)
class DetectorConfig:
    intrinsics: CameraIntrinsics
    sigma_px: float = 2.0
    sigma_depth: float = 0.05
    miss_rate: float = 0.05
    false_positive_rate: float = 0.02
    max_depth: float = 8.0
    box_px: float = 24.0


class SimulatedDetector:
    """Stand-in for the onboard neural detector.

    Emits the true targets' pixel projections with Gaussian pixel and
    depth noise, drops each with the miss rate, and sprinkles false
    positives uniformly over the image.
    """

    FALSE_POSITIVE_CLASS = -1

    def __init__(self, cfg: DetectorConfig, rng: Xoshiro256StarStar):
        self.cfg = cfg
        self.rng = rng

    def detect(self, targets_cam: list[tuple[Vec3, int]]) -> list[tuple[Detection2D, float]]:
        """Detections (with measured depth) for targets given in camera frame."""
        cfg = self.cfg
        intr = cfg.intrinsics
        out: list[tuple[Detection2D, float]] = []
        for p_cam, class_id in targets_cam:
            if p_cam.z <= 0.0 or p_cam.z > cfg.max_depth:
                continue
            u, v = project_to_pixel(p_cam, intr)
            if not (0.0 <= u < intr.width and 0.0 <= v < intr.height):
                continue
            if self.rng.uniform() < cfg.miss_rate:
                continue
            u_n = u + self.rng.normal(cfg.sigma_px)
            v_n = v + self.rng.normal(cfg.sigma_px)
            d_n = max(p_cam.z + self.rng.normal(cfg.sigma_depth), 1e-3)
            u_n = min(max(u_n, 0.0), intr.width - 1.0)
            v_n = min(max(v_n, 0.0), intr.height - 1.0)
            out.append(
                (Detection2D(u_n, v_n, cfg.box_px, cfg.box_px, class_id, 0.9), d_n)
            )
        if self.rng.uniform() < cfg.false_positive_rate:
            u = self.rng.uniform() * (intr.width - 1)
            v = self.rng.uniform() * (intr.height - 1)
            d = 1.0 + self.rng.uniform() * (cfg.max_depth - 1.0)
            out.append(
                (Detection2D(u, v, cfg.box_px, cfg.box_px, self.FALSE_POSITIVE_CLASS, 0.3), d)
            )
        return out
