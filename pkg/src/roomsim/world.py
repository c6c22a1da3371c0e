"""Core state types: the room, the robot fleet, furniture, the tracked user, and the virtual scene.

Everything the simulation mutates lives in a World instance so a single object
can be stepped, snapshotted, and hashed. Specs are frozen value types; states
are plain mutable dataclasses owned by the engine.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

from .geometry import (
    Polygon,
    Pose2D,
    circumradius as _circumradius,
    inradius_convex,
    normalize_ccw,
    polygon_centroid,
    transform_polygon,
)


class Phase(Enum):
    """Manipulation cycle of one robot. Transitions are strictly sequential."""

    IDLE = "idle"
    NAVIGATE_TO_ENTRY = "navigate_to_entry"
    APPROACH_UNDER = "approach_under"
    LIFT = "lift"
    CARRY = "carry"
    NAVIGATE_TO_EXIT_ALIGNED = "navigate_to_exit_aligned"
    LOWER = "lower"
    RETREAT = "retreat"


# Phases during which a robot is legitimately inside its target furniture's
# footprint and must be excluded from collision pairs with it.
UNDER_FURNITURE_PHASES = frozenset(
    {Phase.APPROACH_UNDER, Phase.LIFT, Phase.CARRY, Phase.NAVIGATE_TO_EXIT_ALIGNED, Phase.LOWER, Phase.RETREAT}
)

# Once the robot has committed to driving under furniture, reassignment is off
# the table until the cycle finishes.
LOCKED_PHASES = frozenset(
    {Phase.APPROACH_UNDER, Phase.LIFT, Phase.CARRY, Phase.NAVIGATE_TO_EXIT_ALIGNED, Phase.LOWER}
)


@dataclass(frozen=True)
class RobotSpec:
    """Mechanical capabilities of one robot platform."""

    body_radius: float = 0.175
    max_speed: float = 0.20           # m/s at full wheel command
    wheel_cmd_max: int = 255          # wheel commands live in [-wheel_cmd_max, wheel_cmd_max]
    track_width: float = 0.30
    lift_min: float = 0.30            # platform height fully retracted, m
    lift_max: float = 1.00            # fully extended, m
    lift_speed: float = 0.013         # m/s of vertical travel
    max_payload: float = 22.0         # kg

    def __post_init__(self):
        if self.body_radius <= 0 or self.max_speed <= 0 or self.track_width <= 0:
            raise ValueError("robot dimensions and speed must be positive")
        if self.wheel_cmd_max <= 0:
            raise ValueError("wheel_cmd_max must be positive")
        if not (0 < self.lift_min < self.lift_max):
            raise ValueError("lift range must satisfy 0 < lift_min < lift_max")
        if self.lift_speed <= 0:
            raise ValueError("lift_speed must be positive")

    def wheel_speed(self, cmd: int) -> float:
        """Linear speed of one wheel for an integer command."""
        return (cmd * self.max_speed) / self.wheel_cmd_max


@dataclass(frozen=True)
class FurnitureSpec:
    """Geometry and mass of one furniture kind.

    footprint: convex CCW polygon in the furniture frame, meters.
    underside_height: clearance under the piece; a robot must fit below this to dock.
    entry/exit: docking approach and departure poses in the furniture frame.
    interior_radius: how far the robot center may wander from the furniture
    center while underneath; defaults to the footprint inradius minus 5 cm.
    """

    id: str
    kind: str
    footprint: Polygon
    underside_height: float
    weight: float
    entry: Pose2D
    exit: Pose2D | None = None
    interior_radius: float | None = None
    touch_height: float = 0.0  # informational; tops are matched in the virtual scene

    def __post_init__(self):
        if len(self.footprint) < 3:
            raise ValueError(f"furniture {self.id}: footprint needs at least 3 vertices")
        object.__setattr__(self, "footprint", normalize_ccw(self.footprint))
        if self.underside_height <= 0:
            raise ValueError(f"furniture {self.id}: underside_height must be positive")
        if self.weight <= 0:
            raise ValueError(f"furniture {self.id}: weight must be positive")
        if self.interior_radius is None:
            cx, cy = polygon_centroid(self.footprint)
            object.__setattr__(self, "interior_radius", max(inradius_convex(self.footprint, (cx, cy)) - 0.05, 0.0))

    def footprint_at(self, pose: Pose2D) -> Polygon:
        return transform_polygon(self.footprint, pose)

    @cached_property
    def centroid(self) -> tuple[float, float]:
        return polygon_centroid(self.footprint)

    @cached_property
    def circumradius(self) -> float:
        """Covering disc radius about the frame origin, used for planning."""
        return _circumradius(self.footprint, (0.0, 0.0))


def furniture_footprint(spec: FurnitureSpec, pose: Pose2D) -> Polygon:
    """World-frame footprint polygon of a furniture piece at a pose."""
    return spec.footprint_at(pose)


def clearance_check(spec: FurnitureSpec, robot: RobotSpec, clearance_margin: float = 0.0) -> bool:
    """Whether a robot can dock under, fit inside, and lift this furniture."""
    if spec.underside_height < robot.lift_min + clearance_margin:
        return False
    if spec.interior_radius < robot.body_radius:
        return False
    if spec.weight > robot.max_payload:
        return False
    return True


@dataclass
class RobotState:
    """Mutable state of one robot."""

    id: str
    spec: RobotSpec
    pose: Pose2D
    wheel_left: int = 0
    wheel_right: int = 0
    lift_height: float | None = None   # defaults to spec.lift_min
    lift_target: float | None = None
    carrying: str | None = None        # furniture id while attached
    phase: Phase = Phase.IDLE
    job: str | None = None             # furniture id of the active move job
    goal: tuple[float, float] | None = None
    align_heading: float | None = None  # set while rotating in place
    carry_offset: tuple[float, float] = (0.0, 0.0)  # furniture center in the robot frame at attach
    carry_heading_offset: float = 0.0
    carry_radius: float = 0.0          # planning radius while loaded
    exclude_fid: str | None = None     # furniture legally overlapped from docking until retreat ends
    est_pose: Pose2D | None = None     # tracked pose; None means tracking lost
    tracking_lost: bool = False
    patrol: list[tuple[float, float]] = field(default_factory=list)
    patrol_idx: int = 0
    home: tuple[float, float] | None = None
    # controller scratch
    pid_integral: float = 0.0
    pid_prev_error: float = 0.0
    pid_derivative: float = 0.0

    def __post_init__(self):
        if self.lift_height is None:
            self.lift_height = self.spec.lift_min
        if self.lift_target is None:
            self.lift_target = self.lift_height
        if self.est_pose is None:
            self.est_pose = self.pose

    @property
    def effective_radius(self) -> float:
        return self.carry_radius if self.carrying else self.spec.body_radius

    def wheel_speeds(self) -> tuple[float, float]:
        return (self.spec.wheel_speed(self.wheel_left), self.spec.wheel_speed(self.wheel_right))

    def velocity(self) -> tuple[float, float]:
        """Room-frame velocity implied by the current wheel commands."""
        vl, vr = self.wheel_speeds()
        v = 0.5 * (vl + vr)
        return (v * math.cos(self.pose.heading), v * math.sin(self.pose.heading))


@dataclass
class FurnitureState:
    """Placement of one furniture instance."""

    id: str
    spec_id: str
    pose: Pose2D
    carried_by: str | None = None
    elevation: float = 0.0  # extra height while lifted


class UserMode(Enum):
    SEATED = "seated"
    WALKING = "walking"
    IDLE = "idle"


@dataclass
class ItineraryLeg:
    target: tuple[float, float]
    speed: float = 1.0
    dwell: float = 0.0  # seconds to hold position after arriving


@dataclass
class UserAvatar:
    """The tracked person sharing the room with the fleet."""

    pose: Pose2D
    safety_radius: float = 0.6
    reach_radius: float = 1.5
    mode: UserMode = UserMode.IDLE
    itinerary: list[ItineraryLeg] = field(default_factory=list)
    leg_idx: int = 0
    dwell_until: float = -1.0

    def current_leg(self) -> ItineraryLeg | None:
        if self.leg_idx < len(self.itinerary):
            return self.itinerary[self.leg_idx]
        return None

    def announced_destination(self) -> tuple[float, float] | None:
        """Where the avatar is headed next: the future leg while dwelling, else the current one."""
        leg = self.current_leg()
        if leg is None:
            return None
        if self.dwell_until >= 0.0:
            nxt = self.leg_idx + 1
            return self.itinerary[nxt].target if nxt < len(self.itinerary) else None
        return leg.target

    def velocity(self, now: float) -> tuple[float, float]:
        leg = self.current_leg()
        if leg is None or now < self.dwell_until:
            return (0.0, 0.0)
        dx = leg.target[0] - self.pose.x
        dy = leg.target[1] - self.pose.y
        d = math.sqrt(dx * dx + dy * dy)
        if d < 1e-9:
            return (0.0, 0.0)
        return (leg.speed * dx / d, leg.speed * dy / d)


@dataclass
class VirtualObject:
    """One object of the virtual scene, posed in the scene frame."""

    id: str
    kind: str
    pose: Pose2D
    size: tuple[float, float, float]  # width (long axis), depth, height
    touchable: bool = True
    edit_seq: int = 0  # last applied remote edit sequence number

    def world_pose(self, origin: Pose2D) -> Pose2D:
        return origin.compose(self.pose)


@dataclass
class VirtualScene:
    """Virtual environment mapped into the room via `origin` (scene frame -> room frame)."""

    origin: Pose2D = field(default_factory=lambda: Pose2D(0.0, 0.0, 0.0))
    objects: dict[str, VirtualObject] = field(default_factory=dict)

    def object_world_pose(self, vid: str) -> Pose2D:
        return self.objects[vid].world_pose(self.origin)


@dataclass(frozen=True)
class PlayArea:
    """Rectangular active region [0,width] x [0,depth] plus a surrounding parking margin."""

    width: float
    depth: float
    margin: float = 1.5

    def __post_init__(self):
        if self.width <= 0 or self.depth <= 0 or self.margin < 0:
            raise ValueError("play area dimensions must be positive")

    def contains(self, x: float, y: float, pad: float = 0.0) -> bool:
        return pad <= x <= self.width - pad and pad <= y <= self.depth - pad

    def in_margin_band(self, x: float, y: float) -> bool:
        """Inside the outer rectangle but outside the active region."""
        if not (-self.margin <= x <= self.width + self.margin):
            return False
        if not (-self.margin <= y <= self.depth + self.margin):
            return False
        return not self.contains(x, y)


@dataclass(frozen=True)
class ControlConfig:
    """Heading PID plus the distance-based speed envelope."""

    k_p: float = 1.2
    k_i: float = 0.0
    k_d: float = 0.15
    integral_clamp: float = 1.0
    derivative_smoothing: float = 0.5  # pole of the derivative low-pass
    output_clamp: float = 1.0
    k_a: float = 510.0                 # envelope slope, command units per meter
    d_stop: float = 0.05               # inside this distance the robot parks
    d_sat: float = 0.5                 # envelope saturates at max command beyond this
    turn_cmd: int = 100                # wheel command while rotating in place
    align_tol: float = 0.15            # rad, docking approach alignment
    place_align_tol: float = 0.05      # rad, placement yaw alignment


@dataclass(frozen=True)
class RvoConfig:
    """Sampled reciprocal velocity obstacle parameters."""

    tau: float = 4.0         # collision lookahead horizon, s
    cull_distance: float = 3.0
    n_directions: int = 16
    n_magnitudes: int = 5
    user_buffer: float = 0.3  # extra planner-side padding around the user disc


@dataclass(frozen=True)
class SchedulerConfig:
    """Physical proxy scheduling for the virtual scene."""

    placement_tol_pos: float = 0.10   # m
    placement_tol_yaw: float = math.radians(10.0)
    assumed_user_speed: float = 1.0   # m/s, for task priorities
    reassign_hysteresis: float = 0.2  # m of cost improvement needed to switch tasks
    slide_length_ratio: float = 1.25  # virtual object this much longer than proxy slides
    slide_epsilon: float = 0.01       # m of target motion before a slide retarget
    eta_slack: float = 1.5            # multiplier on the kinematic time estimate
    eta_constant: float = 10.0        # s added on top


@dataclass(frozen=True)
class SimClock:
    """Fixed-step timing: physics at 1/physics_dt Hz, control every control_divisor ticks."""

    physics_dt: float = 1.0 / 60.0
    control_divisor: int = 2

    def __post_init__(self):
        if self.physics_dt <= 0 or self.control_divisor < 1:
            raise ValueError("invalid clock parameters")

    @property
    def control_dt(self) -> float:
        return self.physics_dt * self.control_divisor


@dataclass
class MoveJob:
    """Desired relocation of one furniture piece. Keyed by furniture id: one job per piece."""

    furniture_id: str
    target: Pose2D
    kind: str = "place"              # place | remove_to_parking | slide_update
    virtual_id: str | None = None    # binding this job serves, if any
    robot_id: str | None = None
    priority: float = 0.0            # lower sorts first (seconds until the user needs it)
    hold: bool = False               # sliding proxies stay attached and track the target
    eta_bound: float = math.inf      # promised completion time, sim seconds
    created_tick: int = 0


@dataclass
class World:
    """Complete simulation state."""

    play_area: PlayArea
    robots: dict[str, RobotState]
    furniture_specs: dict[str, FurnitureSpec]
    furniture: dict[str, FurnitureState]
    scene: VirtualScene
    user: UserAvatar
    control_cfg: ControlConfig = field(default_factory=ControlConfig)
    rvo_cfg: RvoConfig = field(default_factory=RvoConfig)
    sched_cfg: SchedulerConfig = field(default_factory=SchedulerConfig)
    clock: SimClock = field(default_factory=SimClock)
    jobs: dict[str, MoveJob] = field(default_factory=dict)
    seed: int = 0
    tick: int = 0

    @property
    def now(self) -> float:
        return self.tick * self.clock.physics_dt

    def spec_of(self, furniture_id: str) -> FurnitureSpec:
        return self.furniture_specs[self.furniture[furniture_id].spec_id]

    def robot_ids(self) -> list[str]:
        return sorted(self.robots)

    def furniture_ids(self) -> list[str]:
        return sorted(self.furniture)
