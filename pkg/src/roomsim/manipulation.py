"""Furniture pickup, transport, and placement.

Each robot runs a strict phase cycle: drive to the docking entry, align, slide
under, lift until contact, carry to a goal chosen so that the final rotation
drops the cargo exactly on target, rotate to the target yaw, lower, and
retreat out the exit side. Attach and detach fire on the lift height crossing
the furniture underside, in physics time, so cargo never teleports.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .controller import reset_pid
from .geometry import Pose2D, wrap_angle
from .world import FurnitureSpec, FurnitureState, Phase, RobotState, World

LIFT_OVERSHOOT = 0.02   # m above the underside before carrying
LIFT_CLEARANCE = 0.03   # platform must sit this far below a deck to pass beneath it


@dataclass(frozen=True)
class LiftKinematics:
    """Scissor linkage behind the lift: height = base + links * length * sin(angle)."""

    n_links: int = 2
    link_length: float = 0.35
    base_height: float = 0.30
    angle_min: float = 0.0
    angle_max: float = math.pi / 2.0

    @property
    def travel(self) -> float:
        return self.n_links * self.link_length

    def height_range(self) -> tuple[float, float]:
        return (
            self.base_height + self.travel * math.sin(self.angle_min),
            self.base_height + self.travel * math.sin(self.angle_max),
        )


def lift_height_from_angle(angle: float, kin: LiftKinematics = LiftKinematics()) -> float:
    """Platform height for a linkage angle read off the side markers."""
    if not (kin.angle_min <= angle <= kin.angle_max):
        raise ValueError(f"linkage angle {angle!r} outside [{kin.angle_min}, {kin.angle_max}]")
    return kin.base_height + kin.travel * math.sin(angle)


def lift_angle_from_height(height: float, kin: LiftKinematics = LiftKinematics()) -> float:
    """Inverse of lift_height_from_angle over the valid height range."""
    lo, hi = kin.height_range()
    if not (lo <= height <= hi):
        raise ValueError(f"height {height!r} outside [{lo}, {hi}]")
    return math.asin((height - kin.base_height) / kin.travel)


def entry_pose(spec: FurnitureSpec, furniture_pose: Pose2D) -> Pose2D:
    """World docking pose: position to reach, heading to face before sliding under."""
    return furniture_pose.compose(spec.entry)


def exit_pose(spec: FurnitureSpec, furniture_pose: Pose2D) -> Pose2D:
    """World departure pose after placement; defaults to passing straight through."""
    ex = spec.exit
    if ex is None:
        ex = Pose2D(-spec.entry.x, -spec.entry.y, spec.entry.heading)
    return furniture_pose.compose(ex)


def carry_goal(robot: RobotState, target: Pose2D) -> tuple[float, float, float]:
    """Robot position and final heading that put the attached cargo on `target`.

    The robot rotates in place after arriving, so the goal anticipates the
    final heading: driving there with any heading and then aligning lands the
    cargo center exactly on the target.
    """
    theta_r = wrap_angle(target.heading - robot.carry_heading_offset)
    ox, oy = robot.carry_offset
    c = math.cos(theta_r)
    s = math.sin(theta_r)
    gx = target.x - (c * ox - s * oy)
    gy = target.y - (s * ox + c * oy)
    return (gx, gy, theta_r)


def attach(robot: RobotState, furniture: FurnitureState, spec: FurnitureSpec) -> None:
    """Latch cargo to the robot, recording its pose in the robot frame."""
    robot.carrying = furniture.id
    furniture.carried_by = robot.id
    dx = furniture.pose.x - robot.pose.x
    dy = furniture.pose.y - robot.pose.y
    c = math.cos(-robot.pose.heading)
    s = math.sin(-robot.pose.heading)
    robot.carry_offset = (c * dx - s * dy, s * dx + c * dy)
    robot.carry_heading_offset = wrap_angle(furniture.pose.heading - robot.pose.heading)
    off = math.sqrt(dx * dx + dy * dy)
    robot.carry_radius = max(robot.spec.body_radius, off + spec.circumradius)


def detach(robot: RobotState, furniture: FurnitureState) -> None:
    robot.carrying = None
    robot.carry_offset = (0.0, 0.0)
    robot.carry_heading_offset = 0.0
    robot.carry_radius = 0.0
    furniture.carried_by = None
    furniture.elevation = 0.0


def carried_pose(robot: RobotState) -> Pose2D:
    """Cargo pose implied by the carrier's pose and the attach-time offset."""
    ox, oy = robot.carry_offset
    c = math.cos(robot.pose.heading)
    s = math.sin(robot.pose.heading)
    return Pose2D(
        robot.pose.x + c * ox - s * oy,
        robot.pose.y + s * ox + c * oy,
        robot.pose.heading + robot.carry_heading_offset,
    )


def tracked_pose_while_carrying(robot: RobotState, furniture: FurnitureState) -> Pose2D:
    """Recover the robot pose from its cargo's markers when its own are hidden."""
    theta_r = wrap_angle(furniture.pose.heading - robot.carry_heading_offset)
    ox, oy = robot.carry_offset
    c = math.cos(theta_r)
    s = math.sin(theta_r)
    return Pose2D(furniture.pose.x - (c * ox - s * oy), furniture.pose.y - (s * ox + c * oy), theta_r)


def lift_cycle_seconds(spec: FurnitureSpec, robot: RobotState) -> float:
    """Blocking lift time per move: full raise, then lower far enough to slip out.

    The remaining retraction happens while driving away, so only the travel
    down to clearance depth counts here.
    """
    top = min(spec.underside_height + LIFT_OVERSHOOT, robot.spec.lift_max)
    up = top - robot.spec.lift_min
    down = top - (spec.underside_height - LIFT_CLEARANCE)
    return (up + down) / robot.spec.lift_speed


def _arrived(robot: RobotState, goal: tuple[float, float], d_stop: float) -> bool:
    dx = goal[0] - robot.est_pose.x
    dy = goal[1] - robot.est_pose.y
    return math.sqrt(dx * dx + dy * dy) < d_stop


def _abort_to_idle(robot: RobotState) -> None:
    robot.phase = Phase.IDLE
    robot.job = None
    robot.goal = None
    robot.align_heading = None
    robot.exclude_fid = None
    reset_pid(robot)


def update_phase(world: World, robot: RobotState) -> None:
    """Advance one robot's manipulation cycle at a control tick.

    Sets robot.goal and robot.align_heading for the planner and controller;
    never moves anything itself. Lift and lower progress happens in physics.
    Should the job vanish mid-cycle the robot sets its cargo down where it
    stands and clears out instead of carrying a ghost task forever.
    """
    cfg = world.control_cfg

    if robot.phase == Phase.IDLE:
        if robot.job is not None and robot.job in world.jobs:
            robot.phase = Phase.NAVIGATE_TO_ENTRY
            reset_pid(robot)
        else:
            return

    fid = robot.job
    job = world.jobs.get(fid) if fid is not None else None

    if robot.phase == Phase.NAVIGATE_TO_ENTRY:
        if job is None:
            _abort_to_idle(robot)
            return
        f = world.furniture[fid]
        if f.carried_by is not None:
            _abort_to_idle(robot)
            return
        spec = world.spec_of(fid)
        dock = entry_pose(spec, f.pose)
        robot.goal = dock.xy
        if robot.align_heading is not None:
            err = wrap_angle(robot.align_heading - robot.est_pose.heading)
            if abs(err) < cfg.align_tol:
                if robot.lift_height > spec.underside_height - LIFT_CLEARANCE:
                    return  # still retracting from the last job; hold at the dock
                robot.align_heading = None
                robot.phase = Phase.APPROACH_UNDER
                robot.exclude_fid = fid
                robot.goal = f.pose.xy
                reset_pid(robot)
        elif _arrived(robot, dock.xy, cfg.d_stop):
            robot.align_heading = dock.heading
        return

    if robot.phase == Phase.APPROACH_UNDER:
        if job is None:
            _abort_to_idle(robot)
            return
        f = world.furniture[fid]
        if f.carried_by is not None:
            _abort_to_idle(robot)
            return
        robot.goal = f.pose.xy
        if _arrived(robot, f.pose.xy, cfg.d_stop):
            spec = world.spec_of(fid)
            robot.goal = None
            robot.phase = Phase.LIFT
            robot.lift_target = min(spec.underside_height + LIFT_OVERSHOOT, robot.spec.lift_max)
        return

    if robot.phase == Phase.LIFT:
        if job is None and robot.carrying is None:
            # cancelled before contact: retract and walk away
            robot.lift_target = robot.spec.lift_min
            robot.phase = Phase.LOWER
            return
        if robot.lift_height >= robot.lift_target - 1e-12:
            robot.phase = Phase.CARRY
            reset_pid(robot)
        return

    if robot.phase == Phase.CARRY:
        if job is None:
            # cancelled mid-carry: put it down right here
            robot.goal = None
            robot.align_heading = robot.est_pose.heading
            robot.phase = Phase.NAVIGATE_TO_EXIT_ALIGNED
            return
        gx, gy, theta_r = carry_goal(robot, job.target)
        robot.goal = (gx, gy)
        if _arrived(robot, (gx, gy), cfg.d_stop) and not job.hold:
            robot.goal = None
            robot.align_heading = theta_r
            robot.phase = Phase.NAVIGATE_TO_EXIT_ALIGNED
        return

    if robot.phase == Phase.NAVIGATE_TO_EXIT_ALIGNED:
        err = wrap_angle(robot.align_heading - robot.est_pose.heading)
        if abs(err) < cfg.place_align_tol:
            robot.align_heading = None
            robot.phase = Phase.LOWER
            robot.lift_target = robot.spec.lift_min
        return

    if robot.phase == Phase.LOWER:
        anchor = fid if fid is not None else robot.carrying
        done = robot.lift_height <= robot.spec.lift_min + 1e-12
        if not done and robot.carrying is None and anchor is not None and anchor in world.furniture:
            # cargo is grounded; the rest of the retraction happens in transit
            done = robot.lift_height <= world.spec_of(anchor).underside_height - LIFT_CLEARANCE
        if done:
            robot.phase = Phase.RETREAT
            if anchor is not None and anchor in world.furniture:
                spec = world.spec_of(anchor)
                f_pose = world.furniture[anchor].pose
                # back off far enough that the user can claim the spot freely.
                # Sideways, not away: the user approaches this spot head on,
                # and a slower robot cannot outrun them along their own path.
                clear = world.user.safety_radius + world.rvo_cfg.user_buffer + robot.spec.body_radius + 0.15
                dx = f_pose.x - world.user.pose.x
                dy = f_pose.y - world.user.pose.y
                d = math.sqrt(dx * dx + dy * dy)
                if d > 1e-9:
                    robot.goal = (f_pose.x + dy / d * clear, f_pose.y - dx / d * clear)
                else:
                    ex = exit_pose(spec, f_pose)
                    dx = ex.x - f_pose.x
                    dy = ex.y - f_pose.y
                    d = math.sqrt(dx * dx + dy * dy)
                    if d < 1e-9:
                        dx, dy, d = 1.0, 0.0, 1.0
                    robot.goal = (f_pose.x + dx / d * clear, f_pose.y + dy / d * clear)
            if fid is not None and fid in world.jobs:
                del world.jobs[fid]
            robot.job = None
            reset_pid(robot)
        return

    if robot.phase == Phase.RETREAT:
        # no pre-align: clearing the drop-off beats exiting straight
        if robot.goal is None or _arrived(robot, robot.goal, cfg.d_stop):
            robot.phase = Phase.IDLE
            robot.goal = None
            robot.exclude_fid = None
        return
