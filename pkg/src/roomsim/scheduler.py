"""Physical proxy scheduling for the virtual scene.

Every control tick the scheduler derives which touchable virtual objects the
user could reach, both from where they stand and from where they have
announced they are going, and reconciles that demand against its bindings of
virtual objects to physical furniture. The diff emits tasks; tasks become move
jobs keyed by furniture, which the assignment layer hands to robots. Bindings
whose virtual object left the demand set stay where they are as steal
candidates; furniture is only sent to the parking band when a scene jump
invalidates it wholesale.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .geometry import Pose2D, point_polygon_distance, transform_polygon, wrap_angle
from .manipulation import lift_cycle_seconds
from .world import Phase, SchedulerConfig, VirtualScene, World


@dataclass
class ProxyBinding:
    virtual_id: str
    furniture_id: str
    target: Pose2D
    status: str = "pending"  # pending | enroute | placed
    sliding: bool = False


@dataclass(frozen=True)
class ProxyTask:
    furniture_id: str
    target: Pose2D
    priority: float            # seconds until the user plausibly needs it; lower is sooner
    kind: str                  # place | remove_to_parking | slide_update
    virtual_id: str | None = None


@dataclass(frozen=True)
class PoolEntry:
    furniture_id: str
    kind: str
    xy: tuple[float, float]
    bound_to: str | None = None  # stale binding this furniture could be stolen from


def object_footprint(obj, origin: Pose2D):
    """World-frame rectangle of a virtual object."""
    w, d = obj.size[0], obj.size[1]
    hw, hd = 0.5 * w, 0.5 * d
    rect = ((-hw, -hd), (hw, -hd), (hw, hd), (-hw, hd))
    return transform_polygon(rect, obj.world_pose(origin))


def required_proxies(
    scene: VirtualScene, stand_point: tuple[float, float], reach_radius: float
) -> dict[str, Pose2D]:
    """Touchable virtual objects whose footprint intersects the closed reach disc."""
    out: dict[str, Pose2D] = {}
    for vid in sorted(scene.objects):
        obj = scene.objects[vid]
        if not obj.touchable:
            continue
        poly = object_footprint(obj, scene.origin)
        if point_polygon_distance(stand_point[0], stand_point[1], poly) <= reach_radius:
            out[vid] = obj.world_pose(scene.origin)
    return out


def sliding_proxy_target(
    seg_a: tuple[float, float],
    seg_b: tuple[float, float],
    proxy_width: float,
    user_point: tuple[float, float],
) -> Pose2D:
    """Closest pose on a long virtual surface a width-limited proxy can cover.

    Projects the user onto the segment and clamps so the proxy never hangs
    past either end; the heading follows the segment direction.
    """
    ax, ay = seg_a
    bx, by = seg_b
    ex = bx - ax
    ey = by - ay
    L = math.sqrt(ex * ex + ey * ey)
    if L < 1e-12:
        return Pose2D(ax, ay, 0.0)
    t = ((user_point[0] - ax) * ex + (user_point[1] - ay) * ey) / (L * L)
    half = min(0.5 * proxy_width / L, 0.5)
    if t < half:
        t = half
    elif t > 1.0 - half:
        t = 1.0 - half
    return Pose2D(ax + t * ex, ay + t * ey, math.atan2(ey, ex))


def diff_tasks(
    bindings: dict[str, ProxyBinding],
    required: dict[str, Pose2D],
    pool: list[PoolEntry],
    kinds: dict[str, str],
    cfg: SchedulerConfig,
    user_point: tuple[float, float],
) -> list[ProxyTask]:
    """Tasks that close the gap between demand and bindings. Pure; applies nothing.

    Re-places bound proxies whose target drifted, then claims furniture for
    unbound demand: free pieces first, then steals from stale bindings (a
    steal shows up as a remove/place pair on the same furniture so the intent
    is explicit; the pair collapses into one physical move when applied).
    """
    tasks: list[ProxyTask] = []
    taken: set[str] = set()

    def urgency(target: Pose2D) -> float:
        return math.dist(user_point, target.xy) / cfg.assumed_user_speed

    for vid in sorted(required):
        b = bindings.get(vid)
        if b is None:
            continue
        target = required[vid]
        taken.add(b.furniture_id)
        drift_pos = math.dist(b.target.xy, target.xy)
        drift_yaw = abs(wrap_angle(b.target.heading - target.heading))
        if drift_pos > cfg.slide_epsilon or drift_yaw > 1e-9:
            kind = "slide_update" if b.sliding else "place"
            tasks.append(ProxyTask(b.furniture_id, target, urgency(target), kind, vid))

    unbound = [vid for vid in sorted(required) if vid not in bindings]
    unbound.sort(key=lambda vid: (urgency(required[vid]), vid))
    for vid in unbound:
        target = required[vid]
        want_kind = kinds[vid]
        free = [p for p in pool if p.bound_to is None and p.kind == want_kind and p.furniture_id not in taken]
        steal = [p for p in pool if p.bound_to is not None and p.kind == want_kind and p.furniture_id not in taken]
        choice = None
        for group in (free, steal):
            if group:
                choice = min(group, key=lambda p: (math.dist(p.xy, target.xy), p.furniture_id))
                break
        if choice is None:
            continue
        taken.add(choice.furniture_id)
        pri = urgency(target)
        if choice.bound_to is not None:
            tasks.append(ProxyTask(choice.furniture_id, target, pri, "remove_to_parking", choice.bound_to))
        tasks.append(ProxyTask(choice.furniture_id, target, pri, "place", vid))
    return tasks


class HapticScheduler:
    """Owns bindings, parking space, and the translation of tasks into move jobs."""

    def __init__(self, world: World):
        self.cfg = world.sched_cfg
        self.bindings: dict[str, ProxyBinding] = {}
        self.unmet: list[str] = []
        self.parking_slots = self._build_parking_slots(world)
        self.last_teleport_plan: dict | None = None

    @staticmethod
    def _build_parking_slots(world: World) -> list[tuple[float, float]]:
        area = world.play_area
        if area.margin <= 0.0:
            return []
        inset = 0.5 * area.margin
        pitch = 1.2
        slots: list[tuple[float, float]] = []
        n = max(1, int(area.width // pitch))
        for i in range(n):
            x = (i + 0.5) * area.width / n
            slots.append((x, -inset))
            slots.append((x, area.depth + inset))
        m = max(1, int(area.depth // pitch))
        for i in range(m):
            y = (i + 0.5) * area.depth / m
            slots.append((-inset, y))
            slots.append((area.width + inset, y))
        return slots

    def free_parking_slot(self, world: World, near: tuple[float, float]) -> Pose2D | None:
        """Nearest unoccupied slot; robot homes and parked furniture block slots."""
        blocked: list[tuple[float, float]] = []
        for f in world.furniture.values():
            blocked.append(f.pose.xy)
        for job in world.jobs.values():
            if job.kind == "remove_to_parking":
                blocked.append(job.target.xy)
        for r in world.robots.values():
            if r.home is not None:
                blocked.append(r.home)
        ranked = sorted(
            (s for s in self.parking_slots),
            key=lambda s: (math.dist(s, near), s),
        )
        for s in ranked:
            if all(math.dist(s, b) > 0.6 for b in blocked):
                return Pose2D(s[0], s[1], 0.0)
        return None

    # demand ---------------------------------------------------------------

    def current_requirements(self, world: World) -> dict[str, Pose2D]:
        """Reach demand from the user's position and their announced destination."""
        reach = world.user.reach_radius
        req = required_proxies(world.scene, world.user.pose.xy, reach)
        dest = world.user.announced_destination()
        if dest is not None:
            for vid, pose in required_proxies(world.scene, dest, reach).items():
                req.setdefault(vid, pose)
        # sliding proxies track the user along the long surface
        for vid in list(req):
            b = self.bindings.get(vid)
            if b is not None and b.sliding:
                req[vid] = self._slide_target(world, vid)
        return req

    def _slide_target(self, world: World, vid: str) -> Pose2D:
        obj = world.scene.objects[vid]
        wp = obj.world_pose(world.scene.origin)
        half = 0.5 * obj.size[0]
        c = math.cos(wp.heading)
        s = math.sin(wp.heading)
        a = (wp.x - c * half, wp.y - s * half)
        b = (wp.x + c * half, wp.y + s * half)
        spec = world.spec_of(self.bindings[vid].furniture_id)
        xs = [v[0] for v in spec.footprint]
        proxy_len = max(xs) - min(xs)
        return sliding_proxy_target(a, b, proxy_len, world.user.pose.xy)

    def _is_sliding(self, world: World, vid: str, fid: str) -> bool:
        obj = world.scene.objects[vid]
        spec = world.spec_of(fid)
        xs = [v[0] for v in spec.footprint]
        ys = [v[1] for v in spec.footprint]
        proxy_long = max(max(xs) - min(xs), max(ys) - min(ys))
        return obj.size[0] > self.cfg.slide_length_ratio * proxy_long

    def _user_blocked(self, world: World, fid: str, target: Pose2D) -> bool:
        """Placement would push the cargo or carrier into the user right now."""
        spec = world.spec_of(fid)
        keep_out = world.user.safety_radius + world.rvo_cfg.user_buffer + spec.circumradius
        return math.dist(world.user.pose.xy, target.xy) < keep_out

    # main loop ------------------------------------------------------------

    def tick(self, world: World) -> None:
        scene = world.scene
        for vid in list(self.bindings):
            b = self.bindings[vid]
            if vid not in scene.objects or b.furniture_id not in world.furniture:
                del self.bindings[vid]

        required = self.current_requirements(world)
        self._refresh_statuses(world, required)

        pool: list[PoolEntry] = []
        bound_fids = {b.furniture_id: vid for vid, b in self.bindings.items()}
        for fid in world.furniture_ids():
            f = world.furniture[fid]
            if f.carried_by is not None or fid in world.jobs:
                continue
            spec = world.furniture_specs[f.spec_id]
            if fid not in bound_fids:
                pool.append(PoolEntry(fid, spec.kind, f.pose.xy))
            else:
                vid = bound_fids[fid]
                if vid not in required:
                    pool.append(PoolEntry(fid, spec.kind, f.pose.xy, bound_to=vid))

        kinds = {vid: scene.objects[vid].kind for vid in required}
        tasks = diff_tasks(self.bindings, required, pool, kinds, self.cfg, world.user.pose.xy)
        self._apply_tasks(world, tasks)

        # diff only sees target drift; a proxy knocked out of tolerance
        # physically gets a restoring move once nothing else claims it
        for vid in sorted(required):
            b = self.bindings.get(vid)
            if b is None or b.status != "pending":
                continue
            fid = b.furniture_id
            if fid in world.jobs or world.furniture[fid].carried_by is not None:
                continue
            if self._user_blocked(world, fid, b.target):
                continue
            kind = "slide_update" if b.sliding else "place"
            pri = math.dist(world.user.pose.xy, b.target.xy) / self.cfg.assumed_user_speed
            self._upsert_job(world, fid, b.target, kind, vid, pri, hold=b.sliding)

        self.unmet = sorted(vid for vid in required if vid not in self.bindings)

    def _refresh_statuses(self, world: World, required: dict[str, Pose2D]) -> None:
        for vid, b in self.bindings.items():
            job = world.jobs.get(b.furniture_id)
            if job is not None and job.virtual_id == vid:
                b.status = "enroute" if job.robot_id is not None else "pending"
                continue
            b.status = "placed" if self._in_place(world, b.furniture_id, b.target) else "pending"

    def _apply_tasks(self, world: World, tasks: list[ProxyTask]) -> None:
        # a remove/place pair on one furniture collapses into the place move
        place_fids = {t.furniture_id for t in tasks if t.kind in ("place", "slide_update")}
        for task in tasks:
            fid = task.furniture_id
            if task.kind == "remove_to_parking":
                if fid in place_fids:
                    # superseded: the steal moves it straight to its new duty
                    if task.virtual_id is not None:
                        self.bindings.pop(task.virtual_id, None)
                    continue
                slot = self.free_parking_slot(world, world.furniture[fid].pose.xy)
                if slot is None:
                    continue
                if task.virtual_id is not None:
                    self.bindings.pop(task.virtual_id, None)
                self._upsert_job(world, fid, slot, "remove_to_parking", None, task.priority, hold=False)
                continue

            if task.virtual_id is None:
                continue
            sliding = self._is_sliding(world, task.virtual_id, fid)
            if self._in_place(world, fid, task.target):
                # nothing has to move, so the user standing on the target is fine
                b = self.bindings.get(task.virtual_id)
                if b is None or b.furniture_id != fid:
                    self.bindings[task.virtual_id] = ProxyBinding(
                        task.virtual_id, fid, task.target, "placed", sliding
                    )
                else:
                    b.target = task.target
                    b.sliding = sliding
                    b.status = "placed"
                job = world.jobs.get(fid)
                if job is not None and job.virtual_id == task.virtual_id:
                    del world.jobs[fid]
                continue
            if self._user_blocked(world, fid, task.target):
                continue  # binding stays absent; retried once the user clears out
            b = self.bindings.get(task.virtual_id)
            if b is None or b.furniture_id != fid:
                self.bindings[task.virtual_id] = ProxyBinding(task.virtual_id, fid, task.target, "pending", sliding)
            else:
                b.target = task.target
                b.sliding = sliding
            hold = sliding
            self._upsert_job(world, fid, task.target, task.kind, task.virtual_id, task.priority, hold)

    def _in_place(self, world: World, fid: str, target: Pose2D) -> bool:
        f = world.furniture[fid]
        if f.carried_by is not None:
            return False
        pos_ok = math.dist(f.pose.xy, target.xy) <= self.cfg.placement_tol_pos
        yaw_ok = abs(wrap_angle(f.pose.heading - target.heading)) <= self.cfg.placement_tol_yaw
        return pos_ok and yaw_ok

    def _upsert_job(
        self,
        world: World,
        fid: str,
        target: Pose2D,
        kind: str,
        vid: str | None,
        priority: float,
        hold: bool,
    ) -> None:
        from .world import MoveJob

        job = world.jobs.get(fid)
        if job is None:
            world.jobs[fid] = MoveJob(
                furniture_id=fid,
                target=target,
                kind=kind,
                virtual_id=vid,
                priority=priority,
                hold=hold,
                eta_bound=self.estimate_eta(world, fid, target),
                created_tick=world.tick,
            )
        else:
            job.target = target
            job.kind = kind
            job.virtual_id = vid
            job.priority = priority
            job.hold = hold

    # estimates ------------------------------------------------------------

    def estimate_eta(self, world: World, fid: str, target: Pose2D) -> float:
        """Promised completion time (sim seconds from now) for moving fid to target."""
        f = world.furniture[fid]
        spec = world.spec_of(fid)
        free = [
            r for r in world.robots.values()
            if r.phase == Phase.IDLE and not r.tracking_lost
        ]
        if free:
            d_fetch = min(math.dist(r.est_pose.xy, f.pose.xy) for r in free)
        else:
            d_fetch = math.hypot(world.play_area.width, world.play_area.depth)
        d_carry = math.dist(f.pose.xy, target.xy)
        any_robot = next(iter(world.robots.values()), None)
        if any_robot is None:
            return math.inf
        v = any_robot.spec.max_speed
        turn_speed = (world.control_cfg.turn_cmd * any_robot.spec.max_speed) / any_robot.spec.wheel_cmd_max
        omega = 2.0 * turn_speed / any_robot.spec.track_width
        t_align = 2.0 * (math.pi / omega)
        t_kin = (d_fetch + d_carry) / v + lift_cycle_seconds(spec, any_robot) + t_align
        return world.now + self.cfg.eta_slack * t_kin + self.cfg.eta_constant

    # events ---------------------------------------------------------------

    def handle_teleport(self, world: World, virtual_point: tuple[float, float]) -> dict:
        """Jump the user's virtual location while they stand still physically.

        The scene origin is retranslated so the requested virtual point lands
        on the user's physical spot, every binding target is recomputed, and
        furniture serving no requirement afterwards is sent to the parking
        band. Everything is staged in this one call so the next control tick
        already plans against the new scene.
        """
        scene = world.scene
        c = math.cos(scene.origin.heading)
        s = math.sin(scene.origin.heading)
        vx, vy = virtual_point
        scene.origin = Pose2D(
            world.user.pose.x - (c * vx - s * vy),
            world.user.pose.y - (s * vx + c * vy),
            scene.origin.heading,
        )

        required = self.current_requirements(world)
        parked: list[str] = []
        for vid in list(self.bindings):
            b = self.bindings[vid]
            if vid in required:
                b.target = required[vid]
            else:
                del self.bindings[vid]
                fid = b.furniture_id
                f = world.furniture[fid]
                if f.carried_by is None and world.play_area.contains(f.pose.x, f.pose.y):
                    slot = self.free_parking_slot(world, f.pose.xy)
                    if slot is not None:
                        self._upsert_job(world, fid, slot, "remove_to_parking", None, 1e6, False)
                        parked.append(fid)
                elif fid in world.jobs:
                    # carried: redirect to a parking slot instead of the stale target
                    slot = self.free_parking_slot(world, f.pose.xy)
                    if slot is not None:
                        job = world.jobs[fid]
                        job.target = slot
                        job.kind = "remove_to_parking"
                        job.virtual_id = None
                        job.hold = False
                        parked.append(fid)

        self.tick(world)
        etas = [world.jobs[fid].eta_bound for fid in world.jobs]
        plan = {
            "virtual_point": [vx, vy],
            "required": sorted(required),
            "parked": sorted(parked),
            "eta_bound": max(etas) if etas else world.now,
        }
        self.last_teleport_plan = plan
        return plan

    def handle_virtual_move(self, world: World, vid: str, new_pose: Pose2D) -> None:
        """Local (in-room) edit of a virtual object's scene-frame pose."""
        obj = world.scene.objects[vid]
        obj.pose = new_pose
        obj.edit_seq += 1

    def mirror_remote_edit(self, world: World, vid: str, new_pose: Pose2D, seq: int) -> bool:
        """Apply a collaborator's edit unless an equal-or-newer one already landed."""
        obj = world.scene.objects.get(vid)
        if obj is None:
            return False
        if seq < obj.edit_seq:
            return False
        obj.pose = new_pose
        obj.edit_seq = seq
        return True

    # snapshot support -----------------------------------------------------

    def state_dict(self) -> dict:
        return {
            "bindings": [
                {
                    "virtual": b.virtual_id,
                    "furniture": b.furniture_id,
                    "target": [b.target.x, b.target.y, b.target.heading],
                    "status": b.status,
                    "sliding": b.sliding,
                }
                for _, b in sorted(self.bindings.items())
            ],
            "unmet": list(self.unmet),
        }
