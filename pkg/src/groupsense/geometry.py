"""Rays, range-truncated cones and the intersection predicates used for
gaze and pointing target resolution.

The deixis "frustum" is modeled as a solid cone truncated at ``range``.  The
cone/AABB test is deliberately conservative: it may over-select slightly
(bounded by the bounding-sphere test) but must never miss a box that truly
pokes into the cone.  Exactness lives in the sphere test, which reduces the
3D problem to 2D point-to-triangle distance in the cone's meridian plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ObjectRegistry, TaskObject
from .errors import DegenerateRay

UNIT_TOL = 1e-9
SLACK_EPS = 1e-6  # numerical guard on the closest-point cone-radius test


@dataclass(frozen=True, eq=False)
class UnitRay:
    origin: np.ndarray
    direction: np.ndarray  # unit norm within UNIT_TOL

    def __post_init__(self):
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=np.float64))
        object.__setattr__(self, "direction", np.asarray(self.direction, dtype=np.float64))


@dataclass(frozen=True, eq=False)
class Cone:
    """Solid cone: apex, unit axis, half-angle in (0, pi/2), range > 0 m."""

    apex: np.ndarray
    axis: np.ndarray
    half_angle: float
    range: float

    def __post_init__(self):
        object.__setattr__(self, "apex", np.asarray(self.apex, dtype=np.float64))
        object.__setattr__(self, "axis", np.asarray(self.axis, dtype=np.float64))
        if abs(np.linalg.norm(self.axis) - 1.0) > 1e-6:
            raise ValueError("cone axis must be unit length")
        if not 0.0 < self.half_angle < math.pi / 2:
            raise ValueError("half_angle must be in (0, pi/2)")
        if self.range <= 0.0:
            raise ValueError("range must be positive")


def ray_from_points(origin, through) -> UnitRay:
    """Unit ray from ``origin`` through ``through``.

    Raises DegenerateRay when the points coincide within 1e-9 m.
    """
    origin = np.asarray(origin, dtype=np.float64)
    through = np.asarray(through, dtype=np.float64)
    d = through - origin
    n = float(np.linalg.norm(d))
    if n <= UNIT_TOL:
        raise DegenerateRay(f"ray endpoints coincide (|d|={n:g})")
    return UnitRay(origin=origin, direction=d / n)


def axial_radial(cone: Cone, p) -> tuple[float, float]:
    """Meridian-plane coordinates of ``p``: (along-axis, off-axis distance)."""
    v = np.asarray(p, dtype=np.float64) - cone.apex
    t = float(v @ cone.axis)
    r = float(np.linalg.norm(v - t * cone.axis))
    return t, r


def angular_distance(cone: Cone, p) -> float:
    """Angle between (p - apex) and the axis, in [0, pi].  0 at the apex."""
    t, r = axial_radial(cone, p)
    return math.atan2(r, t)


def point_in_cone(cone: Cone, p) -> bool:
    """True iff ``p`` lies in the truncated solid cone (apex included)."""
    t, r = axial_radial(cone, p)
    if t < 0.0 or t > cone.range:
        return False
    return math.atan2(r, t) <= cone.half_angle


def _dist_point_segment_2d(px, py, ax, ay, bx, by) -> float:
    abx, aby = bx - ax, by - ay
    denom = abx * abx + aby * aby
    if denom <= 0.0:
        return math.hypot(px - ax, py - ay)
    s = ((px - ax) * abx + (py - ay) * aby) / denom
    s = min(1.0, max(0.0, s))
    return math.hypot(px - (ax + s * abx), py - (ay + s * aby))


def distance_to_cone(cone: Cone, p) -> float:
    """Exact Euclidean distance from a point to the truncated solid cone.

    The cone is a solid of revolution, so the distance equals the 2D distance
    from (axial, radial) to the cone's meridian cross-section: the triangle
    with vertices (0,0), (range, 0) and (range, range*tan(half_angle)).
    """
    t, r = axial_radial(cone, p)
    tan_h = math.tan(cone.half_angle)
    if 0.0 <= t <= cone.range and r <= t * tan_h:
        return 0.0
    rim = cone.range * tan_h
    lateral = _dist_point_segment_2d(t, r, 0.0, 0.0, cone.range, rim)
    far_cap = _dist_point_segment_2d(t, r, cone.range, rim, cone.range, 0.0)
    near = _dist_point_segment_2d(t, r, cone.range, 0.0, 0.0, 0.0)
    return min(lateral, far_cap, near)


def sphere_cone_intersect(cone: Cone, center, radius: float) -> bool:
    """True iff a sphere intersects the truncated solid cone.

    Exact: the apex plane and the far cap are handled by the cross-section
    triangle's edges, the lateral surface by its hypotenuse.
    """
    if radius < 0.0:
        raise ValueError("radius must be non-negative")
    return distance_to_cone(cone, center) <= radius


def aabb_corners(obj: TaskObject) -> np.ndarray:
    lo, hi = obj.aabb_min, obj.aabb_max
    xs = np.array([lo[0], hi[0]])
    ys = np.array([lo[1], hi[1]])
    zs = np.array([lo[2], hi[2]])
    return np.array([[x, y, z] for x in xs for y in ys for z in zs])


def aabb_bounding_sphere(obj: TaskObject) -> tuple[np.ndarray, float]:
    c = obj.center()
    return c, float(np.linalg.norm(obj.aabb_max - c))


def _dist_point_aabb(p: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> float:
    d = np.maximum(np.maximum(lo - p, 0.0), p - hi)
    return float(np.linalg.norm(d))


def _min_axis_clearance(cone: Cone, obj: TaskObject) -> float:
    """Minimize dist(axis_point(s), box) - s*tan(half_angle) over s in [0, range].

    Both terms are convex/affine in s, so the objective is convex; ternary
    search converges geometrically.  A non-positive minimum means some axis
    station has the box within the local cone radius.
    """
    lo, hi = obj.aabb_min, obj.aabb_max
    tan_h = math.tan(cone.half_angle)

    def g(s: float) -> float:
        p = cone.apex + s * cone.axis
        return _dist_point_aabb(p, lo, hi) - s * tan_h

    a, b = 0.0, cone.range
    for _ in range(80):
        m1 = a + (b - a) / 3.0
        m2 = b - (b - a) / 3.0
        if g(m1) <= g(m2):
            b = m2
        else:
            a = m1
    return min(g(a), g((a + b) / 2.0), g(b))


def aabb_cone_intersect(cone: Cone, obj: TaskObject) -> bool:
    """Conservative box/cone test.

    Accepts when (a) any box corner lies in the cone, or (b) the box's
    bounding sphere intersects the cone and the box's closest approach to the
    axis segment, measured at the most favorable axial station, is within the
    cone's local radius plus a small slack.  (b) never misses a box that
    contains a cone point; the sphere conjunct bounds over-selection.
    """
    if any(point_in_cone(cone, c) for c in aabb_corners(obj)):
        return True
    center, radius = aabb_bounding_sphere(obj)
    if not sphere_cone_intersect(cone, center, radius):
        return False
    return _min_axis_clearance(cone, obj) <= SLACK_EPS


def select_objects(cone: Cone, registry: ObjectRegistry) -> list[str]:
    """All object ids whose box intersects the cone, nearest-axis first.

    Sort key is the angular distance of the box center from the axis; ties
    break lexicographically on object id.
    """
    hits = [obj for obj in registry if aabb_cone_intersect(cone, obj)]
    hits.sort(key=lambda o: (angular_distance(cone, o.center()), o.object_id))
    return [o.object_id for o in hits]
