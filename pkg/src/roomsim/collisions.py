"""Independent contact oracle.

Checks true shapes: robot bodies as discs, furniture as convex polygons, the
user as a disc. None of the planner's disc approximations or kernel code is
reused here; separating-axis and point-to-edge tests are written against
numpy directly so planner bugs cannot hide themselves.

Intended contacts are excluded: a robot docked under (or carrying, or backing
out from under) the one piece it is working on, and grounded furniture touched
by the user, since placed proxies exist to be touched.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .world import UNDER_FURNITURE_PHASES, World
from .manipulation import carried_pose

SLACK = 1e-9  # penetration below this is numerical noise, not contact


@dataclass(frozen=True)
class Violation:
    kind: str
    a: str
    b: str
    depth: float

    def __str__(self) -> str:
        return f"{self.kind}: {self.a} vs {self.b} depth={self.depth:.4f}"


def _poly_array(verts) -> np.ndarray:
    return np.asarray(verts, dtype=np.float64)


def _point_poly_depth(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Signed distance from each point to the polygon boundary: negative inside."""
    a = poly
    b = np.roll(poly, -1, axis=0)
    e = b - a
    # distances to every edge segment
    ap = points[:, None, :] - a[None, :, :]
    L2 = np.einsum("ij,ij->i", e, e)
    t = np.clip(np.einsum("pij,ij->pi", ap, e) / np.maximum(L2, 1e-300), 0.0, 1.0)
    closest = a[None, :, :] + t[:, :, None] * e[None, :, :]
    d = np.linalg.norm(points[:, None, :] - closest, axis=2).min(axis=1)
    # inside when left of every edge (CCW winding)
    cross = e[None, :, 0] * ap[:, :, 1] - e[None, :, 1] * ap[:, :, 0]
    inside = (cross >= 0.0).all(axis=1)
    return np.where(inside, -d, d)


def _polys_overlap(p: np.ndarray, q: np.ndarray) -> float:
    """Separating-axis depth for convex polygons: positive overlap, else 0."""
    best = np.inf
    for poly in (p, q):
        edges = np.roll(poly, -1, axis=0) - poly
        normals = np.stack([-edges[:, 1], edges[:, 0]], axis=1)
        lengths = np.linalg.norm(normals, axis=1)
        normals = normals / np.maximum(lengths[:, None], 1e-300)
        proj_p = normals @ p.T
        proj_q = normals @ q.T
        overlap = np.minimum(proj_p.max(axis=1), proj_q.max(axis=1)) - np.maximum(
            proj_p.min(axis=1), proj_q.min(axis=1)
        )
        m = overlap.min()
        if m <= 0.0:
            return 0.0
        if m < best:
            best = m
    return float(best)


def check_collisions(world: World, include_static_pairs: bool = False) -> list[Violation]:
    """All current contact violations, sorted for stable reporting.

    Per-tick callers leave include_static_pairs off: grounded furniture only
    moves through placements, which are themselves checked, so grounded pairs
    are only rechecked when something is being carried near them. Scenario
    validation turns it on to vet the initial layout.
    """
    out: list[Violation] = []

    robot_ids = world.robot_ids()
    rpos = np.array(
        [[world.robots[r].pose.x, world.robots[r].pose.y] for r in robot_ids], dtype=np.float64
    ).reshape(len(robot_ids), 2)
    rrad = np.array([world.robots[r].spec.body_radius for r in robot_ids], dtype=np.float64)

    # robot vs robot
    for i in range(len(robot_ids)):
        for j in range(i + 1, len(robot_ids)):
            d = float(np.hypot(*(rpos[j] - rpos[i])))
            need = rrad[i] + rrad[j]
            if d < need - SLACK:
                out.append(Violation("robot_robot", robot_ids[i], robot_ids[j], need - d))

    # robot vs user
    ux, uy = world.user.pose.x, world.user.pose.y
    for i, rid in enumerate(robot_ids):
        d = float(np.hypot(rpos[i, 0] - ux, rpos[i, 1] - uy))
        need = rrad[i] + world.user.safety_radius
        if d < need - SLACK:
            out.append(Violation("robot_user", rid, "user", need - d))

    # furniture polygons in their current poses
    polys: dict[str, np.ndarray] = {}
    carried: dict[str, bool] = {}
    for fid in world.furniture_ids():
        f = world.furniture[fid]
        spec = world.furniture_specs[f.spec_id]
        if f.carried_by is not None:
            pose = carried_pose(world.robots[f.carried_by])
        else:
            pose = f.pose
        polys[fid] = _poly_array(spec.footprint_at(pose))
        carried[fid] = f.carried_by is not None

    legal_under: set[tuple[str, str]] = set()
    for rid in robot_ids:
        r = world.robots[rid]
        if r.phase in UNDER_FURNITURE_PHASES and r.exclude_fid is not None:
            legal_under.add((rid, r.exclude_fid))
        if r.carrying is not None:
            legal_under.add((rid, r.carrying))

    # robot discs vs furniture polygons
    for fid, poly in polys.items():
        depth = _point_poly_depth(rpos, poly)
        for i, rid in enumerate(robot_ids):
            if (rid, fid) in legal_under:
                continue
            pen = rrad[i] - depth[i]
            if pen > SLACK:
                out.append(Violation("robot_furniture", rid, fid, float(pen)))

    # carried cargo vs the user
    upoint = np.array([[ux, uy]], dtype=np.float64)
    for fid, poly in polys.items():
        if not carried[fid]:
            continue
        pen = world.user.safety_radius - float(_point_poly_depth(upoint, poly)[0])
        if pen > SLACK:
            out.append(Violation("furniture_user", fid, "user", pen))

    # furniture vs furniture: every pair with a carried piece, or all when asked
    fids = sorted(polys)
    centers = {fid: polys[fid].mean(axis=0) for fid in fids}
    radii = {fid: float(np.linalg.norm(polys[fid] - centers[fid], axis=1).max()) for fid in fids}
    for i in range(len(fids)):
        for j in range(i + 1, len(fids)):
            a, b = fids[i], fids[j]
            if not (carried[a] or carried[b] or include_static_pairs):
                continue
            gap = float(np.hypot(*(centers[b] - centers[a])))
            if gap > radii[a] + radii[b] + SLACK:
                continue
            depth = _polys_overlap(polys[a], polys[b])
            if depth > SLACK:
                out.append(Violation("furniture_furniture", a, b, depth))

    out.sort(key=lambda v: (v.kind, v.a, v.b))
    return out
