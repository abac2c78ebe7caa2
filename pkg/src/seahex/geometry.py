"""Rigid-body poses, frames, and rotation utilities.

Conventions used across the project:

* World frame: x east, y north, z up.  Heights are positive altitudes.
* Body frame: x forward, y left, z up (FLU).
* Euler angles are intrinsic Z-Y-X: yaw about z, then pitch about the new
  y, then roll about the newest x, so ``R = Rz(yaw) @ Ry(pitch) @ Rx(roll)``
  maps body coordinates into the parent frame.
* Angles are radians and are kept in the half-open interval (-pi, pi].

Scenarios keep pitch well away from +-pi/2, so no gimbal-lock handling is
attempted here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    r = a % TWO_PI  # sign of divisor, so r in [0, 2*pi)
    if r > math.pi:
        r -= TWO_PI
    return r


class FrameId(Enum):
    World = "World"
    Body = "Body"
    Camera = "Camera"
    ReferenceFrame = "ReferenceFrame"


@dataclass(frozen=True, slots=True)
class Vec3:
    """Position in meters, or velocity in meters/second."""

    x: float
    y: float
    z: float

    def __add__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def __mul__(self, k: float) -> "Vec3":
        return Vec3(self.x * k, self.y * k, self.z * k)

    __rmul__ = __mul__

    def __neg__(self) -> "Vec3":
        return Vec3(-self.x, -self.y, -self.z)

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def horizontal_norm(self) -> float:
        return math.hypot(self.x, self.y)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)

    @staticmethod
    def from_array(a) -> "Vec3":
        return Vec3(float(a[0]), float(a[1]), float(a[2]))

    def is_finite(self) -> bool:
        return math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)


ZERO3 = Vec3(0.0, 0.0, 0.0)


@dataclass(frozen=True, slots=True)
class Attitude:
    """Roll, pitch, yaw in radians, each wrapped to (-pi, pi]."""

    roll: float = 0.0
    pitch: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "roll", wrap_angle(self.roll))
        object.__setattr__(self, "pitch", wrap_angle(self.pitch))
        object.__setattr__(self, "yaw", wrap_angle(self.yaw))


IDENTITY_ATTITUDE = Attitude(0.0, 0.0, 0.0)


@dataclass(frozen=True, slots=True)
class Pose:
    position: Vec3 = ZERO3
    attitude: Attitude = IDENTITY_ATTITUDE
    frame: FrameId = FrameId.World


IDENTITY_POSE = Pose()


def rotation_matrix(att: Attitude) -> np.ndarray:
    """Body-to-parent rotation, R = Rz(yaw) @ Ry(pitch) @ Rx(roll)."""
    cr, sr = math.cos(att.roll), math.sin(att.roll)
    cp, sp = math.cos(att.pitch), math.sin(att.pitch)
    cy, sy = math.cos(att.yaw), math.sin(att.yaw)
    return np.array(
        [
            [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
            [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
            [-sp, cp * sr, cp * cr],
        ],
        dtype=float,
    )


def rotate(att: Attitude, p: Vec3) -> Vec3:
    """Apply the body-to-parent rotation to a vector."""
    cr, sr = math.cos(att.roll), math.sin(att.roll)
    cp, sp = math.cos(att.pitch), math.sin(att.pitch)
    cy, sy = math.cos(att.yaw), math.sin(att.yaw)
    x, y, z = p.x, p.y, p.z
    return Vec3(
        cy * cp * x + (cy * sp * sr - sy * cr) * y + (cy * sp * cr + sy * sr) * z,
        sy * cp * x + (sy * sp * sr + cy * cr) * y + (sy * sp * cr - cy * sr) * z,
        -sp * x + cp * sr * y + cp * cr * z,
    )


def rotate_inverse(att: Attitude, p: Vec3) -> Vec3:
    """Apply the parent-to-body rotation (transpose of ``rotate``)."""
    cr, sr = math.cos(att.roll), math.sin(att.roll)
    cp, sp = math.cos(att.pitch), math.sin(att.pitch)
    cy, sy = math.cos(att.yaw), math.sin(att.yaw)
    x, y, z = p.x, p.y, p.z
    return Vec3(
        cy * cp * x + sy * cp * y - sp * z,
        (cy * sp * sr - sy * cr) * x + (sy * sp * sr + cy * cr) * y + cp * sr * z,
        (cy * sp * cr + sy * sr) * x + (sy * sp * cr - cy * sr) * y + cp * cr * z,
    )


def transform_point(pose: Pose, p_local: Vec3) -> Vec3:
    """Local coordinates -> parent-frame coordinates."""
    return rotate(pose.attitude, p_local) + pose.position


def inverse_transform_point(pose: Pose, p_parent: Vec3) -> Vec3:
    """Parent-frame coordinates -> local coordinates."""
    return rotate_inverse(pose.attitude, p_parent - pose.position)


def rotate_z(yaw: float, p: Vec3) -> Vec3:
    """Rotate a vector about the z axis only."""
    c, s = math.cos(yaw), math.sin(yaw)
    return Vec3(c * p.x - s * p.y, s * p.x + c * p.y, p.z)
