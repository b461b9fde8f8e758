"""Per-frame gaze rays and target resolution.

Head pose is position-only: the ray starts at the ear midpoint (a point
roughly behind the nose) and passes through the nose joint.  Orientation
quaternions are deliberately ignored here.  Temporal smoothing of targets
lives in fusion; this module is pure per-frame geometry.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import GazeConfig
from .core import Body, JointId, ObjectRegistry
from .errors import DegenerateHead, DegenerateRay
from .geometry import (
    Cone,
    UnitRay,
    angular_distance,
    ray_from_points,
    select_objects,
    sphere_cone_intersect,
)


@dataclass(frozen=True)
class ObjectTarget:
    object_id: str


@dataclass(frozen=True)
class ParticipantTarget:
    body_id: str


GazeTarget = ObjectTarget | ParticipantTarget | None


@dataclass(frozen=True)
class GazeSample:
    body_id: str
    ray: UnitRay
    target: GazeTarget


def head_center(body: Body) -> np.ndarray:
    """Ear midpoint: the representative point for a participant's head."""
    return (body.position(JointId.EAR_LEFT) + body.position(JointId.EAR_RIGHT)) * 0.5


def gaze_ray(body: Body) -> UnitRay:
    """Ray from the ear midpoint through the nose joint."""
    origin = head_center(body)
    nose = body.position(JointId.NOSE)
    if not (np.isfinite(origin).all() and np.isfinite(nose).all()):
        raise DegenerateHead(f"{body.body_id}: non-finite head joints")
    if float(np.linalg.norm(nose - origin)) <= 1e-6:
        raise DegenerateHead(f"{body.body_id}: nose coincides with ear midpoint")
    try:
        return ray_from_points(origin, nose)
    except DegenerateRay as exc:  # pragma: no cover - guarded above
        raise DegenerateHead(str(exc))


def gaze_cone(body: Body, cfg: GazeConfig) -> Cone:
    ray = gaze_ray(body)
    return Cone(apex=ray.origin, axis=ray.direction, half_angle=cfg.half_angle, range=cfg.range)


def gaze_target(
    body: Body,
    registry: ObjectRegistry,
    others: list[Body],
    cfg: GazeConfig,
) -> GazeTarget:
    """Resolve what this participant is looking at, or None.

    Candidates are registry objects whose box intersects the gaze cone plus
    other participants whose head sphere (ear midpoint, fixed radius) does.
    The winner is the candidate closest in angle to the gaze axis; ties break
    on Euclidean distance from the eye, then on id.
    """
    cone = gaze_cone(body, cfg)
    ranked: list[tuple[float, float, str, GazeTarget]] = []
    for object_id in select_objects(cone, registry):
        obj = registry.get(object_id)
        center = obj.center()
        ranked.append(
            (
                angular_distance(cone, center),
                float(np.linalg.norm(center - cone.apex)),
                object_id,
                ObjectTarget(object_id),
            )
        )
    for other in others:
        if other.body_id == body.body_id:
            continue
        center = head_center(other)
        if sphere_cone_intersect(cone, center, cfg.head_radius):
            ranked.append(
                (
                    angular_distance(cone, center),
                    float(np.linalg.norm(center - cone.apex)),
                    other.body_id,
                    ParticipantTarget(other.body_id),
                )
            )
    if not ranked:
        return None
    ranked.sort(key=lambda item: item[:3])
    return ranked[0][3]


def gaze_sample(body: Body, registry: ObjectRegistry, others: list[Body], cfg: GazeConfig) -> GazeSample:
    return GazeSample(
        body_id=body.body_id,
        ray=gaze_ray(body),
        target=gaze_target(body, registry, others, cfg),
    )
