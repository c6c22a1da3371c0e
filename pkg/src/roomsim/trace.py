"""Canonical trace records and hashing.

One JSON line per control tick. Keys are sorted, floats are rendered with
'%.9g' (negative zero folded to zero), so byte-identical runs hash to the same
SHA-256 regardless of platform or kernel backend.
"""
from __future__ import annotations

import hashlib
import math
from typing import Iterable

from .world import World


def format_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        raise ValueError(f"non-finite value in trace: {x!r}")
    if x == 0.0:
        x = 0.0  # fold -0.0
    return "%.9g" % x


_ESCAPES = {
    '"': '\\"',
    "\\": "\\\\",
    "\n": "\\n",
    "\r": "\\r",
    "\t": "\\t",
}


def _dump_str(s: str) -> str:
    parts = ['"']
    for ch in s:
        if ch in _ESCAPES:
            parts.append(_ESCAPES[ch])
        elif ord(ch) < 0x20:
            parts.append("\\u%04x" % ord(ch))
        else:
            parts.append(ch)
    parts.append('"')
    return "".join(parts)


def canonical_dumps(obj) -> str:
    """Deterministic JSON text: sorted keys, fixed float formatting, no whitespace."""
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return format_float(obj)
    if isinstance(obj, str):
        return _dump_str(obj)
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(canonical_dumps(v) for v in obj) + "]"
    if isinstance(obj, dict):
        items = []
        for k in sorted(obj):
            if not isinstance(k, str):
                raise TypeError(f"trace keys must be strings, got {k!r}")
            items.append(_dump_str(k) + ":" + canonical_dumps(obj[k]))
        return "{" + ",".join(items) + "}"
    raise TypeError(f"unserializable value in trace: {type(obj).__name__}")


def snapshot(world: World, scheduler=None, events: list | None = None) -> dict:
    """Full observable state at a control tick."""
    robots = []
    for rid in world.robot_ids():
        r = world.robots[rid]
        robots.append(
            {
                "id": rid,
                "x": r.pose.x,
                "y": r.pose.y,
                "heading": r.pose.heading,
                "wheel_left": r.wheel_left,
                "wheel_right": r.wheel_right,
                "lift": r.lift_height,
                "carrying": r.carrying,
                "phase": r.phase.value,
                "job": r.job,
                "goal": list(r.goal) if r.goal is not None else None,
            }
        )
    furniture = []
    for fid in world.furniture_ids():
        f = world.furniture[fid]
        furniture.append(
            {
                "id": fid,
                "spec": f.spec_id,
                "x": f.pose.x,
                "y": f.pose.y,
                "heading": f.pose.heading,
                "carried_by": f.carried_by,
                "elevation": f.elevation,
            }
        )
    jobs = []
    for fid in sorted(world.jobs):
        j = world.jobs[fid]
        jobs.append(
            {
                "furniture": fid,
                "target": [j.target.x, j.target.y, j.target.heading],
                "kind": j.kind,
                "virtual": j.virtual_id,
                "robot": j.robot_id,
                "priority": j.priority,
                "hold": j.hold,
            }
        )
    rec = {
        "tick": world.tick,
        "t": world.now,
        "robots": robots,
        "furniture": furniture,
        "user": {
            "x": world.user.pose.x,
            "y": world.user.pose.y,
            "heading": world.user.pose.heading,
            "mode": world.user.mode.value,
        },
        "scene_origin": [world.scene.origin.x, world.scene.origin.y, world.scene.origin.heading],
        "jobs": jobs,
        "events": events or [],
    }
    if scheduler is not None:
        rec.update(scheduler.state_dict())
    return rec


def trace_digest(lines: Iterable[str]) -> str:
    h = hashlib.sha256()
    for line in lines:
        h.update(line.encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()


class TraceWriter:
    """Accumulates canonical lines and hashes them incrementally."""

    def __init__(self, path: str | None = None):
        self._hash = hashlib.sha256()
        self._lines: list[str] = []
        self._path = path
        self._fh = open(path, "w", encoding="utf-8") if path else None
        self.count = 0

    def append(self, record: dict) -> str:
        line = canonical_dumps(record)
        self._hash.update(line.encode("utf-8"))
        self._hash.update(b"\n")
        self.count += 1
        if self._fh is not None:
            self._fh.write(line + "\n")
        else:
            self._lines.append(line)
        return line

    @property
    def lines(self) -> list[str]:
        return self._lines

    def digest(self) -> str:
        return self._hash.hexdigest()

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None
