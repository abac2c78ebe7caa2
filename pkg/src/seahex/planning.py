"""Mission state machine and priority-based action selection.

The mission walks a fixed stage graph from takeoff through search,
deployment, grasping, winch retrieval, and return.  Ground-robot actions
during the approach phase are chosen each planner tick as

    P = argmax_i  g_i * a_i

over a set of primitive actions, where g_i = 1 / (1 + d_i) rewards
actions whose predicted endpoint is close to the target and a_i in [0, 1]
scores feasibility (deck bounds, target keep-out, heading alignment,
grasp readiness).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum

from .geometry import Pose, Vec3, wrap_angle


class EmptyCandidateSet(ValueError):
    pass


class NoTarget(ValueError):
    pass


class IllegalTransition(RuntimeError):
    """A transition outside the mission edge set; indicates a planner bug."""


class MissionStage(Enum):
    Idle = "Idle"
    Takeoff = "Takeoff"
    Search = "Search"
    NavigateToTarget = "NavigateToTarget"
    DeployHexapod = "DeployHexapod"
    HexapodApproach = "HexapodApproach"
    Grasp = "Grasp"
    RetryPosture = "RetryPosture"
    WinchUp = "WinchUp"
    NavigateWaypoint = "NavigateWaypoint"
    ReturnToBase = "ReturnToBase"
    Land = "Land"
    Complete = "Complete"
    Abort = "Abort"


S = MissionStage

LEGAL_EDGES: dict[MissionStage, frozenset[MissionStage]] = {
    S.Idle: frozenset({S.Takeoff}),
    S.Takeoff: frozenset({S.Search}),
    S.Search: frozenset({S.NavigateToTarget}),
    S.NavigateToTarget: frozenset({S.DeployHexapod}),
    S.DeployHexapod: frozenset({S.HexapodApproach}),
    S.HexapodApproach: frozenset({S.Grasp, S.RetryPosture}),
    S.Grasp: frozenset({S.WinchUp, S.RetryPosture}),
    S.RetryPosture: frozenset({S.HexapodApproach, S.Abort}),
    S.WinchUp: frozenset({S.NavigateWaypoint, S.RetryPosture}),
    S.NavigateWaypoint: frozenset({S.ReturnToBase}),
    S.ReturnToBase: frozenset({S.Land}),
    S.Land: frozenset({S.Complete}),
    S.Complete: frozenset(),
    S.Abort: frozenset(),
}

# Stages where the UAV hovers over the moving deck, so following the tag
# reference frame is pointless and optical flow is used instead.
RETRIEVAL_STAGES = frozenset(
    {S.NavigateToTarget, S.DeployHexapod, S.HexapodApproach, S.Grasp, S.RetryPosture, S.WinchUp}
)

# Stages with the ground robot off the winch hook.
HEXAPOD_DEPLOYED_STAGES = frozenset(
    {S.DeployHexapod, S.HexapodApproach, S.Grasp, S.RetryPosture, S.WinchUp}
)

# On-deck stages where a tilt violation triggers a posture retry.
STABILITY_GATED_STAGES = frozenset({S.HexapodApproach, S.Grasp})

TERMINAL_STAGES = frozenset({S.Complete, S.Abort})


@dataclass(frozen=True)
class ActionCandidate:
    id: int
    name: str
    goal_weight: float  # >= 0
    affordance: float  # in [0, 1]


def select_action(candidates: list[ActionCandidate]) -> int:
    """Index of the candidate maximizing goal_weight * affordance.

    Ties go to the lowest index.
    """
    if not candidates:
        raise EmptyCandidateSet("no candidates to select from")
    best_i = 0
    best_p = candidates[0].goal_weight * candidates[0].affordance
    for i in range(1, len(candidates)):
        p = candidates[i].goal_weight * candidates[i].affordance
        if p > best_p:
            best_p = p
            best_i = i
    return best_i


# ---------------------------------------------------------------------------
# Primitive actions for the deck approach phase


@dataclass(frozen=True)
class MotionPrimitive:
    name: str
    forward: float = 0.0  # body-frame step, units of step length
    lateral: float = 0.0  # positive left
    dyaw: float = 0.0  # units of rotation step
    is_grasp: bool = False
    is_hold: bool = False


PRIMITIVES: tuple[MotionPrimitive, ...] = (
    MotionPrimitive("step-forward", forward=1.0),
    MotionPrimitive("step-backward", forward=-1.0),
    MotionPrimitive("rotate-left", dyaw=1.0),
    MotionPrimitive("rotate-right", dyaw=-1.0),
    MotionPrimitive("strafe-left", lateral=1.0),
    MotionPrimitive("strafe-right", lateral=-1.0),
    MotionPrimitive("grasp", is_grasp=True),
    MotionPrimitive("hold", is_hold=True),
)

HOLD_AFFORDANCE = 0.1


def predict_primitive(pose: Pose, prim: MotionPrimitive, step_len: float, rot_step: float) -> tuple[Vec3, float]:
    """Predicted (position, yaw) after executing one primitive."""
    yaw = pose.attitude.yaw + prim.dyaw * rot_step
    c, s = math.cos(pose.attitude.yaw), math.sin(pose.attitude.yaw)
    dx = prim.forward * step_len
    dy = prim.lateral * step_len
    p = pose.position
    return Vec3(p.x + c * dx - s * dy, p.y + s * dx + c * dy, p.z), wrap_angle(yaw)


def goal_proximity_weights(
    pose: Pose,
    target: Vec3 | None,
    primitives: tuple[MotionPrimitive, ...] = PRIMITIVES,
    step_len: float = 0.1,
    rot_step: float = 0.3,
) -> list[float]:
    """g_i = 1 / (1 + d_i) with d_i the predicted deck-plane distance to target."""
    if target is None:
        raise NoTarget("goal weights need a target position")
    weights = []
    for prim in primitives:
        predicted, _ = predict_primitive(pose, prim, step_len, rot_step)
        d = math.hypot(predicted.x - target.x, predicted.y - target.y)
        weights.append(1.0 / (1.0 + d))
    return weights


def action_affordances(
    pose: Pose,
    target: Vec3,
    centered: bool,
    deck_center: Vec3,
    deck_half_extent: float,
    primitives: tuple[MotionPrimitive, ...] = PRIMITIVES,
    step_len: float = 0.1,
    rot_step: float = 0.3,
) -> list[float]:
    """Feasibility scores in [0, 1] for each primitive.

    Motion is afforded when the predicted endpoint stays on the deck and
    clear of the target keep-out radius (stepping onto the object would
    foul the grasp).  Rotations are afforded only while the target bearing
    is misaligned in their direction.  Grasping is afforded once the
    target is centered.
    """
    keep_out = 0.5 * step_len
    bearing = math.atan2(target.y - pose.position.y, target.x - pose.position.x)
    heading_err = wrap_angle(bearing - pose.attitude.yaw)
    scores = []
    for prim in primitives:
        if prim.is_grasp:
            scores.append(1.0 if centered else 0.0)
            continue
        if prim.is_hold:
            scores.append(HOLD_AFFORDANCE)
            continue
        if prim.dyaw != 0.0:
            aligned_enough = abs(heading_err) <= 0.5 * rot_step
            helps = (heading_err > 0) == (prim.dyaw > 0)
            scores.append(1.0 if (helps and not aligned_enough) else 0.0)
            continue
        predicted, _ = predict_primitive(pose, prim, step_len, rot_step)
        on_deck = (
            abs(predicted.x - deck_center.x) <= deck_half_extent
            and abs(predicted.y - deck_center.y) <= deck_half_extent
        )
        clear = math.hypot(predicted.x - target.x, predicted.y - target.y) >= keep_out
        scores.append(1.0 if (on_deck and clear) else 0.0)
    return scores


# ---------------------------------------------------------------------------
# Mission state machine


@dataclass(frozen=True)
class MissionContext:
    stage: MissionStage = MissionStage.Idle
    uav_pose: Pose = Pose()
    hexapod_pose: Pose = Pose()
    target_track_id: int | None = None
    grasp_confirmed: bool = False
    stability_ok: bool = True
    retry_count: int = 0
    elapsed: float = 0.0


@dataclass(frozen=True)
class Observations:
    """Planner-tick inputs, derived from estimates and telemetry."""

    takeoff_complete: bool = False
    target_confirmed: bool = False
    target_track_id: int | None = None
    arrived_over_target: bool = False
    hexapod_on_deck: bool = False
    hexapod_centered: bool = False
    grasp_confirmed: bool = False
    stability_ok: bool = True
    winch_docked: bool = False
    at_waypoint: bool = False
    at_base: bool = False
    landed: bool = False
    link_ok: bool = True


class WinchDirective(Enum):
    Lower = "Lower"
    Raise = "Raise"
    Hold = "Hold"


@dataclass(frozen=True)
class Commands:
    """Symbolic planner outputs; the mission driver turns them into actuation."""

    winch: WinchDirective = WinchDirective.Hold
    hexapod_opcode: int | None = None  # comms Command opcode to transmit
    send_target_location: bool = False
    hold: bool = False  # link lost, pause everything


@dataclass(frozen=True)
class PlannerParams:
    retry_limit: int = 3


_STAGE_WINCH = {
    S.DeployHexapod: WinchDirective.Lower,
    S.HexapodApproach: WinchDirective.Lower,
    S.Grasp: WinchDirective.Lower,
    S.RetryPosture: WinchDirective.Lower,
    S.WinchUp: WinchDirective.Raise,
}


def _next_stage(ctx: MissionContext, obs: Observations, params: PlannerParams) -> tuple[MissionStage, int]:
    """Target stage and new retry count for one planner tick."""
    stage = ctx.stage
    retries = ctx.retry_count

    if stage in STABILITY_GATED_STAGES and not obs.stability_ok:
        return S.RetryPosture, retries + 1

    if stage is S.Idle:
        return S.Takeoff, retries
    if stage is S.Takeoff:
        return (S.Search, retries) if obs.takeoff_complete else (stage, retries)
    if stage is S.Search:
        return (S.NavigateToTarget, retries) if obs.target_confirmed else (stage, retries)
    if stage is S.NavigateToTarget:
        return (S.DeployHexapod, retries) if obs.arrived_over_target else (stage, retries)
    if stage is S.DeployHexapod:
        return (S.HexapodApproach, retries) if obs.hexapod_on_deck else (stage, retries)
    if stage is S.HexapodApproach:
        return (S.Grasp, retries) if obs.hexapod_centered else (stage, retries)
    if stage is S.Grasp:
        return (S.WinchUp, retries) if obs.grasp_confirmed else (stage, retries)
    if stage is S.RetryPosture:
        if retries >= params.retry_limit:
            return S.Abort, retries
        return S.HexapodApproach, retries
    if stage is S.WinchUp:
        if not obs.grasp_confirmed:
            return S.RetryPosture, retries + 1  # load dropped, object slipped
        return (S.NavigateWaypoint, retries) if obs.winch_docked else (stage, retries)
    if stage is S.NavigateWaypoint:
        return (S.ReturnToBase, retries) if obs.at_waypoint else (stage, retries)
    if stage is S.ReturnToBase:
        return (S.Land, retries) if obs.at_base else (stage, retries)
    if stage is S.Land:
        return (S.Complete, retries) if obs.landed else (stage, retries)
    raise IllegalTransition(f"mission_step called in terminal stage {stage.value}")


def mission_step(
    ctx: MissionContext, obs: Observations, params: PlannerParams = PlannerParams()
) -> tuple[MissionContext, Commands]:
    """Advance the mission by one planner tick.

    At most one stage transition happens per call.  A lost link while the
    ground robot is off the hook freezes progression and emits a hold.
    """
    if ctx.stage in TERMINAL_STAGES:
        raise IllegalTransition(f"mission_step called in terminal stage {ctx.stage.value}")

    if not obs.link_ok and ctx.stage in HEXAPOD_DEPLOYED_STAGES:
        return replace(ctx, grasp_confirmed=obs.grasp_confirmed, stability_ok=obs.stability_ok), Commands(
            winch=WinchDirective.Hold, hexapod_opcode=None, hold=True
        )

    nxt, retries = _next_stage(ctx, obs, params)
    if nxt is not ctx.stage and nxt not in LEGAL_EDGES[ctx.stage]:
        raise IllegalTransition(f"{ctx.stage.value} -> {nxt.value}")
    if retries > params.retry_limit:
        retries = params.retry_limit

    new_ctx = replace(
        ctx,
        stage=nxt,
        retry_count=retries,
        grasp_confirmed=obs.grasp_confirmed,
        stability_ok=obs.stability_ok,
        target_track_id=obs.target_track_id if obs.target_track_id is not None else ctx.target_track_id,
    )

    entered = nxt is not ctx.stage
    opcode = None
    send_target = False
    if entered:
        # Opcodes match the comms Command table.
        if nxt is S.DeployHexapod:
            opcode = 1  # Deploy
        elif nxt is S.HexapodApproach:
            opcode = 2  # Approach
            send_target = True
        elif nxt is S.Grasp:
            opcode = 3  # Grasp
        elif nxt is S.Abort:
            opcode = 4  # Abort
    if nxt is S.HexapodApproach:
        send_target = True

    return new_ctx, Commands(
        winch=_STAGE_WINCH.get(nxt, WinchDirective.Hold),
        hexapod_opcode=opcode,
        send_target_location=send_target,
    )
