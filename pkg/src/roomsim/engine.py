"""Fixed-step simulation loop.

Physics integrates every tick; planning, control, scheduling, and event
application happen on control ticks (every control_divisor-th physics tick).
The engine draws no randomness anywhere: identical scenario plus identical
event stream yields a bit-identical trace. External commands enter through a
queue and are applied only at control tick boundaries, in arrival order.
"""
from __future__ import annotations

import heapq
import math
from typing import Callable

from . import assignment, manipulation, planner, trace
from .controller import drive_step, turn_step
from .geometry import Pose2D, point_segment_distance
from .scheduler import HapticScheduler
from .world import Phase, UserMode, World


class EventError(ValueError):
    pass


def _need(event: dict, key: str, types) -> object:
    if key not in event:
        raise EventError(f"event {event.get('type')!r} missing field {key!r}")
    v = event[key]
    if not isinstance(v, types):
        raise EventError(f"event field {key!r} has wrong type {type(v).__name__}")
    return v


def _check_xy(v) -> tuple[float, float]:
    if not (isinstance(v, (list, tuple)) and len(v) == 2 and all(isinstance(c, (int, float)) for c in v)):
        raise EventError(f"expected [x, y], got {v!r}")
    return (float(v[0]), float(v[1]))


def _check_pose(v) -> Pose2D:
    if not (isinstance(v, (list, tuple)) and len(v) == 3 and all(isinstance(c, (int, float)) for c in v)):
        raise EventError(f"expected [x, y, heading], got {v!r}")
    return Pose2D(float(v[0]), float(v[1]), float(v[2]))


def validate_event(event: dict) -> None:
    """Shape-check an event. Id existence is checked at application time."""
    if not isinstance(event, dict):
        raise EventError("event must be an object")
    etype = event.get("type")
    if etype == "user_path":
        wps = _need(event, "waypoints", list)
        if not wps:
            raise EventError("user_path needs at least one waypoint")
        for w in wps:
            _check_xy(w)
    elif etype == "teleport":
        _check_xy(_need(event, "virtual", (list, tuple)))
    elif etype == "virtual_move":
        _need(event, "id", str)
        _check_pose(_need(event, "pose", (list, tuple)))
    elif etype == "remote_edit":
        _need(event, "id", str)
        _check_pose(_need(event, "pose", (list, tuple)))
        _need(event, "seq", int)
    elif etype == "occlusion":
        _need(event, "robot", str)
        _need(event, "lost", bool)
    elif etype == "scene_load":
        _need(event, "objects", list)
    else:
        raise EventError(f"unknown event type {etype!r}")
    at = event.get("at")
    if at is not None and not isinstance(at, (int, float)):
        raise EventError("event field 'at' must be a number")


class Engine:
    """Steps one World deterministically and emits canonical trace records."""

    def __init__(
        self,
        world: World,
        events: list[dict] | None = None,
        record_trace: bool = False,
        trace_path: str | None = None,
    ):
        self.world = world
        self.scheduler = HapticScheduler(world)
        self._pending: list[tuple[float, int, dict]] = []
        self._event_seq = 0
        self._applied: list[dict] = []
        self.writer = trace.TraceWriter(trace_path) if (record_trace or trace_path) else None
        self.on_control_tick: Callable[[dict], None] | None = None
        self.control_ticks = 0
        for ev in events or []:
            self.inject_event(ev)

    # events ----------------------------------------------------------------

    def inject_event(self, event: dict) -> None:
        """Queue an event for the next control tick (or its 'at' time if later)."""
        validate_event(event)
        at = float(event.get("at", -1.0))
        heapq.heappush(self._pending, (at, self._event_seq, event))
        self._event_seq += 1

    def _apply_due_events(self) -> None:
        now = self.world.now
        self._applied = []
        while self._pending and self._pending[0][0] <= now:
            _, _, ev = heapq.heappop(self._pending)
            try:
                self._apply_event(ev)
                self._applied.append(ev)
            except EventError as e:
                self._applied.append({"type": ev.get("type"), "rejected": str(e)})

    def _apply_event(self, ev: dict) -> None:
        w = self.world
        etype = ev["type"]
        if etype == "user_path":
            from .world import ItineraryLeg

            legs = [
                ItineraryLeg(
                    _check_xy(wp),
                    float(ev.get("speed", 1.0)),
                    float(ev.get("dwell", 0.0)),
                )
                for wp in ev["waypoints"]
            ]
            w.user.itinerary = legs
            w.user.leg_idx = 0
            w.user.dwell_until = -1.0
        elif etype == "teleport":
            self.scheduler.handle_teleport(w, _check_xy(ev["virtual"]))
        elif etype == "virtual_move":
            vid = ev["id"]
            if vid not in w.scene.objects:
                raise EventError(f"unknown virtual object {vid!r}")
            self.scheduler.handle_virtual_move(w, vid, _check_pose(ev["pose"]))
        elif etype == "remote_edit":
            vid = ev["id"]
            if vid not in w.scene.objects:
                raise EventError(f"unknown virtual object {vid!r}")
            self.scheduler.mirror_remote_edit(w, vid, _check_pose(ev["pose"]), int(ev["seq"]))
        elif etype == "occlusion":
            rid = ev["robot"]
            if rid not in w.robots:
                raise EventError(f"unknown robot {rid!r}")
            w.robots[rid].tracking_lost = bool(ev["lost"])
        elif etype == "scene_load":
            from .world import VirtualObject

            objs = {}
            for o in ev["objects"]:
                pose = _check_pose(o.get("pose", (0.0, 0.0, 0.0)))
                size = o.get("size", (0.5, 0.5, 0.5))
                objs[o["id"]] = VirtualObject(
                    id=o["id"], kind=o.get("kind", "prop"), pose=pose,
                    size=tuple(float(c) for c in size), touchable=o.get("touchable", True),
                )
            if "origin" in ev:
                w.scene.origin = _check_pose(ev["origin"])
            w.scene.objects = objs
            self.scheduler.bindings.clear()

    # per-tick stages ---------------------------------------------------------

    def _update_tracking(self) -> None:
        w = self.world
        for rid in w.robot_ids():
            r = w.robots[rid]
            if not r.tracking_lost:
                r.est_pose = r.pose
            elif r.carrying is not None:
                # cargo markers stay visible; recover the carrier pose from them
                r.est_pose = manipulation.tracked_pose_while_carrying(r, w.furniture[r.carrying])
            # else: est_pose freezes at the last seen value

    def _apply_assignment(self) -> None:
        w = self.world
        result = assignment.rebalance(w)
        paired = dict(result.pairs)
        for rid, fid in paired.items():
            r = w.robots[rid]
            if r.job == fid:
                continue
            if r.job is not None and r.job in w.jobs and w.jobs[r.job].robot_id == rid:
                w.jobs[r.job].robot_id = None
            r.job = fid
            w.jobs[fid].robot_id = rid
            if r.phase == Phase.NAVIGATE_TO_ENTRY:
                r.align_heading = None
        for rid in result.unassigned_robots:
            r = w.robots[rid]
            if r.phase == Phase.NAVIGATE_TO_ENTRY and r.job is not None:
                if r.job in w.jobs and w.jobs[r.job].robot_id == rid:
                    w.jobs[r.job].robot_id = None
                r.job = None

    def _staging_dock(self) -> tuple[float, float] | None:
        """Dock of the piece a seated user occupies, the likeliest next fetch.

        When they move on, that binding goes stale and gets stolen for the
        following destination, so a free robot waiting by its dock turns the
        next fetch leg into a few steps.
        """
        w = self.world
        if w.user.mode is not UserMode.SEATED:
            return None
        best: tuple[float, str] | None = None
        for vid in sorted(self.scheduler.bindings):
            b = self.scheduler.bindings[vid]
            fid = b.furniture_id
            if fid in w.jobs or fid not in w.furniture:
                continue
            f = w.furniture[fid]
            if f.carried_by is not None:
                continue
            d = math.dist(w.user.pose.xy, f.pose.xy)
            if d > 0.75:
                continue
            if best is None or (d, fid) < best:
                best = (d, fid)
        if best is None:
            return None
        f = w.furniture[best[1]]
        return manipulation.entry_pose(w.spec_of(best[1]), f.pose).xy

    def _staging_spot(self, dock: tuple[float, float], clear: float) -> tuple[float, float]:
        """Waiting spot near the dock, outside the user's bubble and off their
        announced walk line: once they stand up, a robot parked on that line
        cannot outrun them."""
        w = self.world
        ux, uy = w.user.pose.x, w.user.pose.y
        bearing = math.atan2(dock[1] - uy, dock[0] - ux)
        dest = w.user.announced_destination()
        for off in (0.0, -0.5, 0.5, -1.0, 1.0, -1.5708, 1.5708):
            a = bearing + off
            px = ux + clear * math.cos(a)
            py = uy + clear * math.sin(a)
            if dest is None:
                return (px, py)
            if point_segment_distance(px, py, ux, uy, dest[0], dest[1]) >= clear:
                return (px, py)
        a = bearing - 1.5708
        return (ux + clear * math.cos(a), uy + clear * math.sin(a))

    def _idle_goals(self) -> None:
        w = self.world
        d_stop = w.control_cfg.d_stop
        stage = self._staging_dock()
        stager = None
        if stage is not None:
            idle = [
                rid for rid in w.robot_ids()
                if w.robots[rid].phase == Phase.IDLE
                and w.robots[rid].job is None
                and not w.robots[rid].patrol
                and not w.robots[rid].tracking_lost
            ]
            if idle:
                stager = min(idle, key=lambda rid: (math.dist(w.robots[rid].est_pose.xy, stage), rid))
        for rid in w.robot_ids():
            r = w.robots[rid]
            if r.phase != Phase.IDLE or r.job is not None:
                continue
            ux, uy = w.user.pose.x, w.user.pose.y
            clear = w.user.safety_radius + w.rvo_cfg.user_buffer + r.spec.body_radius + 0.2
            if r.patrol:
                wp = r.patrol[r.patrol_idx]
                dx = wp[0] - r.est_pose.x
                dy = wp[1] - r.est_pose.y
                if math.sqrt(dx * dx + dy * dy) < d_stop:
                    r.patrol_idx = (r.patrol_idx + 1) % len(r.patrol)
                    wp = r.patrol[r.patrol_idx]
                r.goal = wp
            elif rid == stager:
                sx, sy = self._staging_spot(stage, clear)
                dx = sx - r.est_pose.x
                dy = sy - r.est_pose.y
                r.goal = (sx, sy) if math.sqrt(dx * dx + dy * dy) >= d_stop else None
            else:
                # hold position between jobs: the last drop-off spot is usually
                # close to the next fetch. Step out of the user's way though,
                # so the next leg does not begin with an orbit around them.
                dx = r.est_pose.x - ux
                dy = r.est_pose.y - uy
                d = math.sqrt(dx * dx + dy * dy)
                uvx, uvy = w.user.velocity(w.now)
                uspeed = math.sqrt(uvx * uvx + uvy * uvy)
                if uspeed > 1e-9:
                    # moving user: it is the lateral offset from their track
                    # that must clear, and well before they pass
                    tx = uvx / uspeed
                    ty = uvy / uspeed
                    along = dx * tx + dy * ty
                    lat = dx * -ty + dy * tx
                    if along > -clear and abs(lat) < clear and d < clear + 3.0 * uspeed:
                        s = 1.0 if lat >= 0.0 else -1.0
                        r.goal = (
                            r.est_pose.x + (-ty * s) * (clear - abs(lat)),
                            r.est_pose.y + (tx * s) * (clear - abs(lat)),
                        )
                    else:
                        r.goal = None
                elif d < clear:
                    if d < 1e-9:
                        dx, dy, d = 1.0, 0.0, 1.0
                    r.goal = (ux + dx / d * clear, uy + dy / d * clear)
                else:
                    r.goal = None

    def _control_tick(self) -> None:
        w = self.world
        self._apply_due_events()
        self._update_tracking()
        self.scheduler.tick(w)
        self._apply_assignment()
        self._idle_goals()
        for rid in w.robot_ids():
            manipulation.update_phase(w, w.robots[rid])
        velocities = planner.plan_step(w)
        dt = w.clock.control_dt
        for rid in w.robot_ids():
            r = w.robots[rid]
            if r.tracking_lost and r.carrying is None:
                r.wheel_left = 0
                r.wheel_right = 0
                continue
            if r.align_heading is not None:
                tol = w.control_cfg.place_align_tol if r.phase == Phase.NAVIGATE_TO_EXIT_ALIGNED else w.control_cfg.align_tol
                left, right, _ = turn_step(r, r.align_heading, w.control_cfg, tol)
                r.wheel_left = left
                r.wheel_right = right
                continue
            if rid not in velocities:
                r.wheel_left = 0
                r.wheel_right = 0
                continue
            if r.goal is not None:
                dist = math.dist(r.est_pose.xy, r.goal)
            else:
                dist = w.play_area.width + w.play_area.depth  # evasion only: no goal to brake for
            left, right = drive_step(r, velocities[rid], dist, w.control_cfg, dt)
            r.wheel_left = left
            r.wheel_right = right
        self.control_ticks += 1
        if self.writer is not None or self.on_control_tick is not None:
            snap = trace.snapshot(w, self.scheduler, self._applied)
            if self.writer is not None:
                self.writer.append(snap)
            if self.on_control_tick is not None:
                self.on_control_tick(snap)

    def _physics_tick(self) -> None:
        w = self.world
        dt = w.clock.physics_dt
        from . import _kernels

        for rid in w.robot_ids():
            r = w.robots[rid]
            if r.wheel_left != 0 or r.wheel_right != 0:
                vl, vr = r.wheel_speeds()
                x, y, heading = _kernels.integrate_arc(
                    r.pose.x, r.pose.y, r.pose.heading, vl, vr, r.spec.track_width, dt
                )
                r.pose = Pose2D(x, y, heading)
            self._advance_lift(r, dt)
            if r.carrying is not None:
                f = w.furniture[r.carrying]
                f.pose = manipulation.carried_pose(r)
                f.elevation = max(0.0, r.lift_height - w.spec_of(r.carrying).underside_height)
        self._advance_avatar(dt)
        w.tick += 1

    def _advance_lift(self, r, dt: float) -> None:
        w = self.world
        if r.lift_height == r.lift_target:
            return
        old = r.lift_height
        if r.lift_target > old:
            new = old + r.spec.lift_speed * dt
            if new > r.lift_target:
                new = r.lift_target
        else:
            new = old - r.spec.lift_speed * dt
            if new < r.lift_target:
                new = r.lift_target
        r.lift_height = new
        anchor = r.exclude_fid
        if anchor is None or anchor not in w.furniture:
            return
        spec = w.spec_of(anchor)
        f = w.furniture[anchor]
        if r.phase == Phase.LIFT and r.carrying is None and f.carried_by is None:
            if old <= spec.underside_height < new:
                manipulation.attach(r, f, spec)
        elif r.phase == Phase.LOWER and r.carrying == anchor:
            if new < spec.underside_height <= old:
                f.pose = manipulation.carried_pose(r)
                manipulation.detach(r, f)

    def _advance_avatar(self, dt: float) -> None:
        w = self.world
        u = w.user
        now = w.now
        leg = u.current_leg()
        if leg is None:
            u.mode = UserMode.IDLE
            return
        if u.dwell_until > now:
            u.mode = UserMode.SEATED
            return
        if u.dwell_until >= 0.0:
            # dwell finished: step to the next leg
            u.leg_idx += 1
            u.dwell_until = -1.0
            leg = u.current_leg()
            if leg is None:
                u.mode = UserMode.IDLE
                return
        dx = leg.target[0] - u.pose.x
        dy = leg.target[1] - u.pose.y
        d = math.sqrt(dx * dx + dy * dy)
        step = leg.speed * dt
        if d <= step:
            u.pose = Pose2D(leg.target[0], leg.target[1], u.pose.heading)
            u.dwell_until = now + leg.dwell
            u.mode = UserMode.SEATED if leg.dwell > 0.0 else UserMode.WALKING
        else:
            u.pose = Pose2D(u.pose.x + dx / d * step, u.pose.y + dy / d * step, math.atan2(dy, dx))
            u.mode = UserMode.WALKING

    # loop --------------------------------------------------------------------

    def step(self) -> None:
        """One physics tick; runs the control stage first when due."""
        if self.world.tick % self.world.clock.control_divisor == 0:
            self._control_tick()
        self._physics_tick()

    def run(self, duration: float) -> None:
        """Advance by a sim-time duration (whole ticks)."""
        end = self.world.now + duration
        while self.world.now < end - 1e-12:
            self.step()

    def run_ticks(self, n: int) -> None:
        for _ in range(n):
            self.step()

    def digest(self) -> str:
        if self.writer is None:
            raise RuntimeError("engine was created without trace recording")
        return self.writer.digest()
