"""Scenario files: schema, validation, and world construction.

A scenario is plain JSON. All randomness is resolved by whoever generates the
file; loading one is purely deterministic. Validation is two layers: schema
shape first, then semantic checks (docking clearances, reachable entry points,
an initial layout free of contacts).
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import jsonschema

from . import planner
from .geometry import Pose2D
from .world import (
    ControlConfig,
    FurnitureSpec,
    FurnitureState,
    ItineraryLeg,
    PlayArea,
    RobotSpec,
    RobotState,
    RvoConfig,
    SchedulerConfig,
    SimClock,
    UserAvatar,
    UserMode,
    VirtualObject,
    VirtualScene,
    World,
    clearance_check,
)

_pose = {"type": "array", "minItems": 3, "maxItems": 3, "items": {"type": "number"}}
_xy = {"type": "array", "minItems": 2, "maxItems": 2, "items": {"type": "number"}}

SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["play_area", "robots", "furniture_specs", "furniture", "virtual_scene", "user"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "seed": {"type": "integer"},
        "play_area": {
            "type": "object",
            "required": ["width", "depth"],
            "additionalProperties": False,
            "properties": {
                "width": {"type": "number", "exclusiveMinimum": 0},
                "depth": {"type": "number", "exclusiveMinimum": 0},
                "margin": {"type": "number", "minimum": 0},
            },
        },
        "robot_spec": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "body_radius": {"type": "number", "exclusiveMinimum": 0},
                "max_speed": {"type": "number", "exclusiveMinimum": 0},
                "wheel_cmd_max": {"type": "integer", "exclusiveMinimum": 0},
                "track_width": {"type": "number", "exclusiveMinimum": 0},
                "lift_min": {"type": "number", "exclusiveMinimum": 0},
                "lift_max": {"type": "number", "exclusiveMinimum": 0},
                "lift_speed": {"type": "number", "exclusiveMinimum": 0},
                "max_payload": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "robots": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "x", "y"],
                "additionalProperties": False,
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "x": {"type": "number"},
                    "y": {"type": "number"},
                    "heading": {"type": "number"},
                    "home": _xy,
                    "patrol": {"type": "array", "items": _xy},
                },
            },
        },
        "furniture_specs": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "kind", "footprint", "underside_height", "weight", "entry"],
                "additionalProperties": False,
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "kind": {"type": "string", "minLength": 1},
                    "footprint": {"type": "array", "minItems": 3, "items": _xy},
                    "underside_height": {"type": "number", "exclusiveMinimum": 0},
                    "weight": {"type": "number", "exclusiveMinimum": 0},
                    "entry": _pose,
                    "exit": {"oneOf": [_pose, {"type": "null"}]},
                    "interior_radius": {"type": "number", "exclusiveMinimum": 0},
                    "touch_height": {"type": "number", "minimum": 0},
                },
            },
        },
        "furniture": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["id", "spec", "x", "y"],
                "additionalProperties": False,
                "properties": {
                    "id": {"type": "string", "minLength": 1},
                    "spec": {"type": "string", "minLength": 1},
                    "x": {"type": "number"},
                    "y": {"type": "number"},
                    "heading": {"type": "number"},
                },
            },
        },
        "virtual_scene": {
            "type": "object",
            "required": ["objects"],
            "additionalProperties": False,
            "properties": {
                "origin": _pose,
                "objects": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["id", "kind", "pose", "size"],
                        "additionalProperties": False,
                        "properties": {
                            "id": {"type": "string", "minLength": 1},
                            "kind": {"type": "string", "minLength": 1},
                            "pose": _pose,
                            "size": {
                                "type": "array",
                                "minItems": 3,
                                "maxItems": 3,
                                "items": {"type": "number", "exclusiveMinimum": 0},
                            },
                            "touchable": {"type": "boolean"},
                        },
                    },
                },
            },
        },
        "user": {
            "type": "object",
            "required": ["x", "y"],
            "additionalProperties": False,
            "properties": {
                "x": {"type": "number"},
                "y": {"type": "number"},
                "heading": {"type": "number"},
                "safety_radius": {"type": "number", "exclusiveMinimum": 0},
                "reach_radius": {"type": "number", "exclusiveMinimum": 0},
                "mode": {"enum": ["seated", "walking", "idle"]},
                "script": {
                    "type": "array",
                    "items": {
                        "type": "object",
                        "required": ["goto"],
                        "additionalProperties": False,
                        "properties": {
                            "goto": _xy,
                            "speed": {"type": "number", "exclusiveMinimum": 0},
                            "dwell": {"type": "number", "minimum": 0},
                        },
                    },
                },
            },
        },
        "control": {"type": "object"},
        "rvo": {"type": "object"},
        "scheduler": {"type": "object"},
        "clock": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "physics_dt": {"type": "number", "exclusiveMinimum": 0},
                "control_divisor": {"type": "integer", "minimum": 1},
            },
        },
        "events": {"type": "array", "items": {"type": "object"}},
    },
}


class ScenarioError(ValueError):
    pass


def _cfg(cls, data: dict | None):
    if not data:
        return cls()
    valid = {f for f in cls.__dataclass_fields__}
    unknown = set(data) - valid
    if unknown:
        raise ScenarioError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    return cls(**data)


def load_scenario(source: dict | str | Path) -> tuple[World, list[dict]]:
    """Build a world from a scenario dict or a path to one.

    Returns the world plus any scripted events. Raises ScenarioError when the
    file is malformed or describes a physically invalid layout.
    """
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8") as fh:
            data = json.load(fh)
    else:
        data = source

    try:
        jsonschema.validate(data, SCENARIO_SCHEMA)
    except jsonschema.ValidationError as e:
        raise ScenarioError(f"scenario schema: {e.message}") from e

    pa = data["play_area"]
    play_area = PlayArea(pa["width"], pa["depth"], pa.get("margin", 1.5))

    spec = _cfg(RobotSpec, data.get("robot_spec"))

    specs: dict[str, FurnitureSpec] = {}
    for s in data["furniture_specs"]:
        if s["id"] in specs:
            raise ScenarioError(f"duplicate furniture spec id {s['id']!r}")
        entry = Pose2D(*s["entry"])
        ex = Pose2D(*s["exit"]) if s.get("exit") is not None else None
        specs[s["id"]] = FurnitureSpec(
            id=s["id"],
            kind=s["kind"],
            footprint=tuple((float(x), float(y)) for x, y in s["footprint"]),
            underside_height=s["underside_height"],
            weight=s["weight"],
            entry=entry,
            exit=ex,
            interior_radius=s.get("interior_radius"),
            touch_height=s.get("touch_height", 0.0),
        )

    robots: dict[str, RobotState] = {}
    for r in data["robots"]:
        if r["id"] in robots:
            raise ScenarioError(f"duplicate robot id {r['id']!r}")
        robots[r["id"]] = RobotState(
            id=r["id"],
            spec=spec,
            pose=Pose2D(r["x"], r["y"], r.get("heading", 0.0)),
            home=tuple(r["home"]) if "home" in r else None,
            patrol=[tuple(p) for p in r.get("patrol", [])],
        )

    furniture: dict[str, FurnitureState] = {}
    for f in data["furniture"]:
        if f["id"] in furniture:
            raise ScenarioError(f"duplicate furniture id {f['id']!r}")
        if f["spec"] not in specs:
            raise ScenarioError(f"furniture {f['id']!r} references unknown spec {f['spec']!r}")
        furniture[f["id"]] = FurnitureState(
            id=f["id"], spec_id=f["spec"], pose=Pose2D(f["x"], f["y"], f.get("heading", 0.0))
        )

    vs = data["virtual_scene"]
    origin = Pose2D(*vs.get("origin", (0.0, 0.0, 0.0)))
    objects: dict[str, VirtualObject] = {}
    for o in vs["objects"]:
        if o["id"] in objects:
            raise ScenarioError(f"duplicate virtual object id {o['id']!r}")
        objects[o["id"]] = VirtualObject(
            id=o["id"],
            kind=o["kind"],
            pose=Pose2D(*o["pose"]),
            size=tuple(o["size"]),
            touchable=o.get("touchable", True),
        )
    scene = VirtualScene(origin=origin, objects=objects)

    u = data["user"]
    user = UserAvatar(
        pose=Pose2D(u["x"], u["y"], u.get("heading", 0.0)),
        safety_radius=u.get("safety_radius", 0.6),
        reach_radius=u.get("reach_radius", 1.5),
        mode=UserMode(u.get("mode", "idle")),
        itinerary=[
            ItineraryLeg(tuple(leg["goto"]), leg.get("speed", 1.0), leg.get("dwell", 0.0))
            for leg in u.get("script", [])
        ],
    )

    world = World(
        play_area=play_area,
        robots=robots,
        furniture_specs=specs,
        furniture=furniture,
        scene=scene,
        user=user,
        control_cfg=_cfg(ControlConfig, data.get("control")),
        rvo_cfg=_cfg(RvoConfig, data.get("rvo")),
        sched_cfg=_cfg(SchedulerConfig, data.get("scheduler")),
        clock=_cfg(SimClock, data.get("clock")),
        seed=data.get("seed", 0),
    )

    _validate_world(world)
    return world, list(data.get("events", []))


def _validate_world(world: World) -> None:
    from .collisions import check_collisions

    spec_used = {f.spec_id for f in world.furniture.values()}
    for sid in spec_used:
        fs = world.furniture_specs[sid]
        robot_spec = next(iter(world.robots.values())).spec if world.robots else RobotSpec()
        if not clearance_check(fs, robot_spec):
            raise ScenarioError(
                f"furniture spec {sid!r} cannot be serviced: needs underside >= lift_min, "
                f"interior room for the robot body, and weight within payload"
            )
        # the docking point must be reachable from outside the planner's covering
        # disc, with room for the detour ring it steers around
        entry_dist = math.hypot(fs.entry.x, fs.entry.y)
        floor = fs.circumradius + robot_spec.body_radius + planner.DETOUR_MARGIN
        if entry_dist <= floor + 1e-9:
            raise ScenarioError(
                f"furniture spec {sid!r}: entry point {entry_dist:.3f} m from center is inside "
                f"the avoidance ring ({floor:.3f} m)"
            )

    for rid, r in world.robots.items():
        x, y = r.pose.x, r.pose.y
        if not (world.play_area.contains(x, y) or world.play_area.in_margin_band(x, y)):
            raise ScenarioError(f"robot {rid!r} starts outside the playable region")

    violations = check_collisions(world, include_static_pairs=True)
    if violations:
        raise ScenarioError("initial layout has contacts: " + "; ".join(str(v) for v in violations[:5]))
