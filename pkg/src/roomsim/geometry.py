"""Planar poses, angle arithmetic, and convex polygon helpers."""
from __future__ import annotations

import math
from dataclasses import dataclass

TWO_PI = 2.0 * math.pi


def wrap_angle(theta: float) -> float:
    """Fold an angle into [-pi, pi)."""
    if -math.pi <= theta < math.pi:
        return theta
    return theta - TWO_PI * math.floor((theta + math.pi) / TWO_PI)


@dataclass(frozen=True)
class Pose2D:
    """Position plus heading in the room frame. Heading is normalized on construction."""

    x: float
    y: float
    heading: float = 0.0

    def __post_init__(self):
        for v in (self.x, self.y, self.heading):
            if not math.isfinite(v):
                raise ValueError(f"non-finite pose component: {v!r}")
        object.__setattr__(self, "heading", wrap_angle(self.heading))

    @property
    def xy(self) -> tuple[float, float]:
        return (self.x, self.y)

    def transform_point(self, px: float, py: float) -> tuple[float, float]:
        """Map a point from this pose's local frame into the parent frame."""
        c = math.cos(self.heading)
        s = math.sin(self.heading)
        return (self.x + c * px - s * py, self.y + s * px + c * py)

    def compose(self, local: "Pose2D") -> "Pose2D":
        """Chain a local pose onto this one (this acting as the parent frame)."""
        x, y = self.transform_point(local.x, local.y)
        return Pose2D(x, y, self.heading + local.heading)

    def inverse(self) -> "Pose2D":
        c = math.cos(self.heading)
        s = math.sin(self.heading)
        return Pose2D(-(c * self.x + s * self.y), -(-s * self.x + c * self.y), -self.heading)

    def distance_to(self, other: "Pose2D") -> float:
        dx = other.x - self.x
        dy = other.y - self.y
        return math.sqrt(dx * dx + dy * dy)


def dist(a: tuple[float, float], b: tuple[float, float]) -> float:
    dx = b[0] - a[0]
    dy = b[1] - a[1]
    return math.sqrt(dx * dx + dy * dy)


Polygon = tuple[tuple[float, float], ...]


def normalize_ccw(verts: Polygon) -> Polygon:
    """Return the polygon with counter-clockwise winding."""
    if signed_area(verts) < 0.0:
        return tuple(reversed(verts))
    return tuple(verts)


def signed_area(verts: Polygon) -> float:
    acc = 0.0
    n = len(verts)
    for i in range(n):
        x0, y0 = verts[i]
        x1, y1 = verts[(i + 1) % n]
        acc += x0 * y1 - x1 * y0
    return 0.5 * acc


def polygon_centroid(verts: Polygon) -> tuple[float, float]:
    """Area-weighted centroid. Falls back to the vertex mean for degenerate polygons."""
    a = signed_area(verts)
    if abs(a) < 1e-12:
        n = len(verts)
        return (sum(v[0] for v in verts) / n, sum(v[1] for v in verts) / n)
    cx = 0.0
    cy = 0.0
    n = len(verts)
    for i in range(n):
        x0, y0 = verts[i]
        x1, y1 = verts[(i + 1) % n]
        w = x0 * y1 - x1 * y0
        cx += (x0 + x1) * w
        cy += (y0 + y1) * w
    return (cx / (6.0 * a), cy / (6.0 * a))


def transform_polygon(verts: Polygon, pose: Pose2D) -> Polygon:
    c = math.cos(pose.heading)
    s = math.sin(pose.heading)
    return tuple((pose.x + c * x - s * y, pose.y + s * x + c * y) for x, y in verts)


def circumradius(verts: Polygon, about: tuple[float, float] | None = None) -> float:
    """Largest vertex distance from `about` (default: the centroid)."""
    cx, cy = about if about is not None else polygon_centroid(verts)
    return max(math.sqrt((x - cx) ** 2 + (y - cy) ** 2) for x, y in verts)


def inradius_convex(verts: Polygon, about: tuple[float, float] | None = None) -> float:
    """Smallest edge distance from `about` for a convex polygon containing it."""
    cx, cy = about if about is not None else polygon_centroid(verts)
    best = math.inf
    n = len(verts)
    for i in range(n):
        d = point_segment_distance(cx, cy, *verts[i], *verts[(i + 1) % n])
        if d < best:
            best = d
    return best


def point_segment_distance(px: float, py: float, ax: float, ay: float, bx: float, by: float) -> float:
    ex = bx - ax
    ey = by - ay
    L2 = ex * ex + ey * ey
    if L2 <= 0.0:
        return math.sqrt((px - ax) ** 2 + (py - ay) ** 2)
    t = ((px - ax) * ex + (py - ay) * ey) / L2
    if t < 0.0:
        t = 0.0
    elif t > 1.0:
        t = 1.0
    qx = ax + t * ex
    qy = ay + t * ey
    return math.sqrt((px - qx) ** 2 + (py - qy) ** 2)


def point_in_convex(px: float, py: float, verts: Polygon) -> bool:
    """Inclusion test for a CCW convex polygon; boundary counts as inside."""
    n = len(verts)
    for i in range(n):
        ax, ay = verts[i]
        bx, by = verts[(i + 1) % n]
        if (bx - ax) * (py - ay) - (by - ay) * (px - ax) < 0.0:
            return False
    return True


def point_polygon_distance(px: float, py: float, verts: Polygon) -> float:
    """Distance from a point to a CCW convex polygon; 0 when the point is inside."""
    if point_in_convex(px, py, verts):
        return 0.0
    best = math.inf
    n = len(verts)
    for i in range(n):
        d = point_segment_distance(px, py, *verts[i], *verts[(i + 1) % n])
        if d < best:
            best = d
    return best
