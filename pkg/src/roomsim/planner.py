"""Local velocity planning with sampled reciprocal velocity obstacles.

Every control tick the fleet, the static furniture, and the tracked user are
flattened into one disc array; each driving robot then picks the sampled
velocity closest to its preferred one whose first collision lies beyond the
lookahead horizon. Robots split avoidance evenly with each other and take the
full share against the user and static obstacles. A robot docked under its own
cargo ignores that one piece; everyone else still sees it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .geometry import wrap_angle
from .world import Phase, RvoConfig, UNDER_FURNITURE_PHASES, UserMode, World

USER_TAG = -2
NO_EXCLUSION = -1
FURNITURE_TAG_BASE = 1000

ORBIT_STEP = 0.9      # rad of bearing advanced per replan while rounding an obstacle
DETOUR_MARGIN = 0.02  # ring clearance beyond physical contact
CAPTURE_RADIUS = 0.45  # within this of the dock, the target stops being an obstacle


@dataclass(frozen=True)
class AgentDisc:
    """One entry of the planning array."""

    x: float
    y: float
    vx: float
    vy: float
    radius: float
    reciprocity: float  # share of the avoidance this agent performs against the deciding one
    tag: int


def preferred_velocity(
    pos: tuple[float, float],
    goal: tuple[float, float],
    max_speed: float,
    control_dt: float,
) -> tuple[float, float]:
    """Straight shot at the goal, slowing only to avoid overshooting in one tick."""
    dx = goal[0] - pos[0]
    dy = goal[1] - pos[1]
    d = math.sqrt(dx * dx + dy * dy)
    if d < 1e-12:
        return (0.0, 0.0)
    speed = min(max_speed, d / control_dt)
    return (speed * dx / d, speed * dy / d)


def detour_goal(
    start: tuple[float, float],
    goal: tuple[float, float],
    obstacles: list[tuple[float, float, float]],
    own_radius: float,
) -> tuple[float, float]:
    """Waypoint that rounds the first grounded disc squarely blocking the goal.

    The velocity sampler refuses candidates aimed through an obstacle, but its
    closest-to-preferred ranking then favors stopping over sidestepping, so a
    goal on the far side of a disc becomes a stable trap. Replanned each
    control tick, this walks the bearing around the blocker's clearance ring
    toward the goal side; exact opposition breaks to the right like the
    sampler's own tie rule. Discs whose ring contains the goal are left alone:
    terminal approaches are allowed to touch.

    obstacles holds (x, y, physical_radius) triples.
    """
    sx, sy = start
    gx, gy = goal
    ex = gx - sx
    ey = gy - sy
    seg2 = ex * ex + ey * ey
    if seg2 < 1e-18:
        return goal
    best: tuple[float, float, float] | None = None
    best_d = math.inf
    for cx, cy, radius in obstacles:
        ring = radius + own_radius + DETOUR_MARGIN
        d_start = math.hypot(cx - sx, cy - sy)
        if d_start <= radius + own_radius:
            continue  # physical contact: the sampler's overlap recovery owns this
        if math.hypot(cx - gx, cy - gy) < ring:
            continue  # docking onto this disc on purpose
        t = ((cx - sx) * ex + (cy - sy) * ey) / seg2
        if t <= 0.0:
            continue
        t = min(t, 1.0)
        px = sx + t * ex
        py = sy + t * ey
        if math.hypot(px - cx, py - cy) >= ring:
            continue
        if d_start < best_d:
            best = (cx, cy, ring)
            best_d = d_start
    if best is None:
        return goal
    cx, cy, ring = best
    bearing = math.atan2(sy - cy, sx - cx)
    want = math.atan2(gy - cy, gx - cx)
    d = wrap_angle(want - bearing)  # exact opposition wraps to -pi: right-hand orbit
    step = max(-ORBIT_STEP, min(ORBIT_STEP, d))
    a = bearing + step
    return (cx + ring * math.cos(a), cy + ring * math.sin(a))


def pack_agents(discs: list[AgentDisc]) -> np.ndarray:
    arr = np.empty((len(discs), 7), dtype=np.float64)
    for i, d in enumerate(discs):
        arr[i, 0] = d.x
        arr[i, 1] = d.y
        arr[i, 2] = d.vx
        arr[i, 3] = d.vy
        arr[i, 4] = d.radius
        arr[i, 5] = d.reciprocity
        arr[i, 6] = d.tag
    return arr


def rvo_velocity(
    self_disc: AgentDisc,
    neighbors: list[AgentDisc],
    pref: tuple[float, float],
    max_speed: float,
    cfg: RvoConfig,
    excluded_tag: int = NO_EXCLUSION,
) -> tuple[float, float]:
    """Single-agent query against an explicit neighbor list."""
    arr = pack_agents([self_disc] + neighbors)
    return _kernels.choose_velocity(
        arr, 0, pref[0], pref[1], max_speed, excluded_tag,
        cfg.tau, cfg.cull_distance, cfg.n_directions, cfg.n_magnitudes,
    )


def plan_step(world: World) -> dict[str, tuple[float, float]]:
    """Choose velocities for every robot that has a drive goal this tick."""
    cfg = world.rvo_cfg
    robot_ids = world.robot_ids()

    rows: list[AgentDisc] = []
    row_of: dict[str, int] = {}
    for i, rid in enumerate(robot_ids):
        r = world.robots[rid]
        vx, vy = r.velocity()
        rows.append(AgentDisc(r.pose.x, r.pose.y, vx, vy, r.effective_radius, 0.5, i))
        row_of[rid] = i

    furniture_tag: dict[str, int] = {}
    grounded: list[tuple[str, float, float, float]] = []
    for k, fid in enumerate(world.furniture_ids()):
        f = world.furniture[fid]
        if f.carried_by is not None:
            continue
        spec = world.furniture_specs[f.spec_id]
        tag = FURNITURE_TAG_BASE + k
        furniture_tag[fid] = tag
        grounded.append((fid, f.pose.x, f.pose.y, spec.circumradius))
        rows.append(AgentDisc(f.pose.x, f.pose.y, 0.0, 0.0, spec.circumradius, 1.0, tag))

    uvx, uvy = world.user.velocity(world.now)
    rows.append(
        AgentDisc(
            world.user.pose.x, world.user.pose.y, uvx, uvy,
            world.user.safety_radius + cfg.user_buffer, 1.0, USER_TAG,
        )
    )

    arr = pack_agents(rows)

    out: dict[str, tuple[float, float]] = {}
    for rid in robot_ids:
        r = world.robots[rid]
        if r.align_heading is not None or r.tracking_lost:
            continue
        if r.phase in (Phase.LIFT, Phase.LOWER):
            continue
        excluded = NO_EXCLUSION
        excluded_fid = None
        if r.phase in UNDER_FURNITURE_PHASES and r.exclude_fid is not None:
            excluded_fid = r.exclude_fid
        elif r.phase == Phase.NAVIGATE_TO_ENTRY and r.job is not None and r.goal is not None:
            # docks hug the target's avoidance ring, inside the sampler's
            # infeasibility shell for static discs; the last stretch has to
            # treat the target as claimed or no approach speed is ever legal
            dx = r.goal[0] - r.est_pose.x
            dy = r.goal[1] - r.est_pose.y
            if dx * dx + dy * dy < CAPTURE_RADIUS * CAPTURE_RADIUS:
                excluded_fid = r.job
        if excluded_fid is not None:
            excluded = furniture_tag.get(excluded_fid, NO_EXCLUSION)
        if r.goal is not None:
            obstacles = [(x, y, rad) for fid, x, y, rad in grounded if fid != excluded_fid]
            if world.user.mode is UserMode.SEATED:
                obstacles.append(
                    (world.user.pose.x, world.user.pose.y, world.user.safety_radius + cfg.user_buffer)
                )
            goal = detour_goal((r.est_pose.x, r.est_pose.y), r.goal, obstacles, r.effective_radius)
            pref = preferred_velocity(
                (r.est_pose.x, r.est_pose.y), goal, r.spec.max_speed, world.clock.control_dt
            )
        else:
            # no destination: hold position, but still dodge approaching traffic
            pref = (0.0, 0.0)
        out[rid] = _kernels.choose_velocity(
            arr, row_of[rid], pref[0], pref[1], r.spec.max_speed, excluded,
            cfg.tau, cfg.cull_distance, cfg.n_directions, cfg.n_magnitudes,
        )
    return out
