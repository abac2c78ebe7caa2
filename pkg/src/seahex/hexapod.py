"""Ground-robot grasp predicates and the UAV-side winch controller.

Two ultrasonic rangefinders (front and rear) decide when the target sits
inside grasping range; either one suffices, so a single sensor failure
does not blind the robot.  A load cell confirms the grasp against a
threshold profile (a hanging robot must carry the full object weight, so
the airborne threshold is the higher one), and the IMU tilt against the
gravity vector gates stability.

The winch is a rate-limited proportional controller on cable length with
feedback from the UAV's downward ultrasonic and the docking markers on
the robot's back.  Missing feedback degrades to open loop at half rate.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .geometry import Vec3


@dataclass(frozen=True)
class HexapodSensors:
    ultra_front: float | None  # meters, None when the sensor dropped out
    ultra_rear: float | None
    load: float  # newtons, aggregate over the legs
    tilt: float  # radians between body z and the gravity vector


class GraspState(Enum):
    Searching = 0
    Centered = 1
    Closing = 2
    Holding = 3
    Lost = 4


@dataclass(frozen=True)
class LoadThresholds:
    grounded: float = 5.0
    airborne: float = 10.0

    def __post_init__(self):
        if not (0.0 < self.grounded <= self.airborne):
            raise ValueError("require 0 < grounded <= airborne threshold")


def target_centered(s: HexapodSensors, grasp_range: float) -> bool:
    """True when every valid rangefinder agrees the target is in range.

    One valid reading is enough (redundancy against sensor failure);
    both invalid means no information, so False.
    """
    readings = [r for r in (s.ultra_front, s.ultra_rear) if r is not None]
    if not readings:
        return False
    return all(r <= grasp_range for r in readings)


def grasp_confirmed(
    s: HexapodSensors, airborne: bool, thresholds: LoadThresholds = LoadThresholds()
) -> bool:
    """Load-cell grasp confirmation with the profile picked by flight state."""
    threshold = thresholds.airborne if airborne else thresholds.grounded
    return s.load >= threshold


def stability_check(s: HexapodSensors, tilt_limit: float = 0.35) -> bool:
    """True while the tilt stays at or below the limit."""
    return s.tilt <= tilt_limit


# ---------------------------------------------------------------------------
# Winch


class WinchMode(Enum):
    Lower = "Lower"
    Raise = "Raise"
    Hold = "Hold"


@dataclass(frozen=True)
class WinchParams:
    k_p: float = 1.0  # 1/s
    rate_max: float = 0.5  # m/s
    dock_epsilon: float = 0.01  # m of cable left when docked
    dock_tolerance: float = 0.05  # m of lateral marker offset allowed


@dataclass(frozen=True)
class WinchState:
    cable_length: float = 0.0
    rate: float = 0.0
    docked: bool = False
    degraded: bool = False  # feedback missing, running open loop


def _clamp(v: float, lo: float, hi: float) -> float:
    return min(max(v, lo), hi)


def winch_step(
    w: WinchState,
    uav_height_over_deck: float | None,
    hexapod_marker_offset: Vec3 | None,
    ultra_range_to_hexapod: float | None,
    dt: float,
    mode: WinchMode,
    params: WinchParams = WinchParams(),
) -> WinchState:
    """One winch control step.

    Lower pays out cable toward the measured height over the deck; Raise
    reels toward zero.  Docked requires the cable nearly home and the
    marker seen inside the lateral tolerance.
    """
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    degraded = False
    if mode is WinchMode.Hold:
        rate = 0.0
    elif mode is WinchMode.Lower:
        target = uav_height_over_deck
        if target is None and ultra_range_to_hexapod is not None:
            target = ultra_range_to_hexapod
        if target is None:
            degraded = True
            rate = params.rate_max / 2.0
        else:
            rate = _clamp(params.k_p * (target - w.cable_length), -params.rate_max, params.rate_max)
    else:  # Raise
        rate = _clamp(params.k_p * (0.0 - w.cable_length), -params.rate_max, params.rate_max)
        if hexapod_marker_offset is None:
            degraded = True
            rate = _clamp(rate, -params.rate_max / 2.0, params.rate_max / 2.0)

    cable = max(w.cable_length + rate * dt, 0.0)
    docked = (
        cable <= params.dock_epsilon
        and hexapod_marker_offset is not None
        and hexapod_marker_offset.norm() <= params.dock_tolerance
    )
    return WinchState(cable_length=cable, rate=rate, docked=docked, degraded=degraded)
