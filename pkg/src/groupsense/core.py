"""Shared domain types for skeleton / hand / speech streams.

All types are immutable values after construction (numpy buffers are made
read-only), so frames can be shared freely across threads.

The 32-entry joint index follows the Azure Kinect body-tracking order.  That
ordering is part of this package's contract and is documented in the README;
``JointId`` is the authoritative map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum, IntEnum

import numpy as np

JOINT_COUNT = 32
LANDMARK_COUNT = 21

# Quaternions with a norm inside this open band are renormalized silently;
# anything outside is sensor garbage and flags the frame.
QUAT_NORM_BAND = (0.5, 2.0)
QUAT_NORM_TOL = 1e-6


class JointId(IntEnum):
    PELVIS = 0
    SPINE_NAVEL = 1
    SPINE_CHEST = 2
    NECK = 3
    CLAVICLE_LEFT = 4
    SHOULDER_LEFT = 5
    ELBOW_LEFT = 6
    WRIST_LEFT = 7
    HAND_LEFT = 8
    HANDTIP_LEFT = 9
    THUMB_LEFT = 10
    CLAVICLE_RIGHT = 11
    SHOULDER_RIGHT = 12
    ELBOW_RIGHT = 13
    WRIST_RIGHT = 14
    HAND_RIGHT = 15
    HANDTIP_RIGHT = 16
    THUMB_RIGHT = 17
    HIP_LEFT = 18
    KNEE_LEFT = 19
    ANKLE_LEFT = 20
    FOOT_LEFT = 21
    HIP_RIGHT = 22
    KNEE_RIGHT = 23
    ANKLE_RIGHT = 24
    FOOT_RIGHT = 25
    HEAD = 26
    NOSE = 27
    EYE_LEFT = 28
    EAR_LEFT = 29
    EYE_RIGHT = 30
    EAR_RIGHT = 31


class HandLandmarkId(IntEnum):
    WRIST = 0
    THUMB_CMC = 1
    THUMB_MCP = 2
    THUMB_IP = 3
    THUMB_TIP = 4
    INDEX_MCP = 5
    INDEX_PIP = 6
    INDEX_DIP = 7
    INDEX_TIP = 8
    MIDDLE_MCP = 9
    MIDDLE_PIP = 10
    MIDDLE_DIP = 11
    MIDDLE_TIP = 12
    RING_MCP = 13
    RING_PIP = 14
    RING_DIP = 15
    RING_TIP = 16
    PINKY_MCP = 17
    PINKY_PIP = 18
    PINKY_DIP = 19
    PINKY_TIP = 20


class Hand(str, Enum):
    LEFT = "L"
    RIGHT = "R"


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.asarray(arr, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Joint:
    """One tracked joint: world-frame position (m) and (w,x,y,z) quaternion."""

    position: np.ndarray
    orientation: np.ndarray


@dataclass(frozen=True, eq=False)
class Body:
    """One tracked body: 32 joints packed as a (n, 7) array.

    Row layout is [px, py, pz, qw, qx, qy, qz].  A row count other than 32 is
    representable (so that validation can report it) but violates the Body
    invariant.
    """

    body_id: str
    joints: np.ndarray  # (n, 7) float64, read-only

    def __post_init__(self):
        object.__setattr__(self, "joints", _frozen(np.atleast_2d(self.joints)))

    def joint(self, j: JointId | int) -> Joint:
        row = self.joints[int(j)]
        return Joint(position=row[:3], orientation=row[3:])

    def position(self, j: JointId | int) -> np.ndarray:
        return self.joints[int(j), :3]

    def orientation(self, j: JointId | int) -> np.ndarray:
        return self.joints[int(j), 3:]

    def pelvis_x(self) -> float:
        return float(self.joints[JointId.PELVIS, 0])


@dataclass(frozen=True, eq=False)
class HandLandmarks:
    """21 world-frame hand landmarks for one (body, side) pair."""

    body_id: str
    hand: Hand
    points: np.ndarray  # (n, 3) float64, read-only

    def __post_init__(self):
        object.__setattr__(self, "points", _frozen(np.atleast_2d(self.points)))

    def point(self, lm: HandLandmarkId | int) -> np.ndarray:
        return self.points[int(lm)]


@dataclass(frozen=True)
class SpeechActivity:
    """Diarized voice-activity state change for one speaker."""

    speaker_id: str
    active: bool


@dataclass(frozen=True, eq=False)
class SkeletonFrame:
    """One timestamped capture of every tracked body, hand and speech flag."""

    timestamp: float
    bodies: tuple[Body, ...] = ()
    hands: tuple[HandLandmarks, ...] = ()
    speech: tuple[SpeechActivity, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "bodies", tuple(self.bodies))
        object.__setattr__(self, "hands", tuple(self.hands))
        object.__setattr__(self, "speech", tuple(self.speech))


@dataclass(frozen=True, eq=False)
class TaskObject:
    """A named task object with a world-frame axis-aligned bounding box."""

    object_id: str
    label: str
    aabb_min: np.ndarray
    aabb_max: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "aabb_min", _frozen(self.aabb_min))
        object.__setattr__(self, "aabb_max", _frozen(self.aabb_max))

    def center(self) -> np.ndarray:
        return (self.aabb_min + self.aabb_max) * 0.5


@dataclass(frozen=True)
class ObjectRegistry:
    """Task objects keyed by id, iterated in insertion order."""

    objects: tuple[TaskObject, ...] = ()

    def __iter__(self):
        return iter(self.objects)

    def __len__(self) -> int:
        return len(self.objects)

    def get(self, object_id: str) -> TaskObject | None:
        for obj in self.objects:
            if obj.object_id == object_id:
                return obj
        return None

    def ids(self) -> list[str]:
        return [obj.object_id for obj in self.objects]


class EventKind(str, Enum):
    DOMINATED_DISCUSSION = "DominatedDiscussion"
    JOINT_ATTENTION = "JointAttention"
    DISENGAGEMENT = "Disengagement"
    POINTING_SELECTION = "PointingSelection"


@dataclass(frozen=True)
class EngagementEvent:
    """A typed interval event over the session timeline.

    ``t_end`` is None while the event is still open.  ``participants`` is
    always non-empty; ``target`` names an object or participant id when the
    event has one.
    """

    event_id: int
    kind: EventKind
    t_start: float
    t_end: float | None
    participants: tuple[str, ...]
    target: str | None = None
    metadata: dict = field(default_factory=dict)

    def signature(self) -> tuple:
        """Identity used by equivalence checks: everything but id/metadata."""
        return (self.kind, self.participants, self.target, self.t_start, self.t_end)


class ViolationKind(str, Enum):
    JOINT_COUNT = "joint_count"
    LANDMARK_COUNT = "landmark_count"
    QUATERNION = "quaternion"
    NON_FINITE_POSITION = "non_finite_position"
    DUPLICATE_BODY = "duplicate_body"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    subject: str  # body or hand id
    detail: str


def normalize_quaternions(joints: np.ndarray) -> np.ndarray:
    """Return a copy with every in-band quaternion rescaled to unit norm.

    Out-of-band quaternions are left untouched so that validation can still
    report them.
    """
    out = np.array(joints, dtype=np.float64)
    if out.size == 0:
        return out
    norms = np.linalg.norm(out[:, 3:], axis=1)
    lo, hi = QUAT_NORM_BAND
    in_band = (norms > lo) & (norms < hi)
    out[in_band, 3:] /= norms[in_band, None]
    return out


def normalize_frame(frame: SkeletonFrame) -> SkeletonFrame:
    """Renormalize every body's quaternions (in-band ones only)."""
    bodies = tuple(
        Body(body_id=b.body_id, joints=normalize_quaternions(b.joints))
        for b in frame.bodies
    )
    return SkeletonFrame(
        timestamp=frame.timestamp,
        bodies=bodies,
        hands=frame.hands,
        speech=frame.speech,
    )


def validate_frame(frame: SkeletonFrame) -> list[Violation]:
    """Check every frame-level invariant; violations are data, not failures.

    Quaternions are judged after a normalization attempt: a norm inside
    ``QUAT_NORM_BAND`` passes (it renormalizes cleanly), anything else is
    reported.  An empty list means the frame is valid.
    """
    violations: list[Violation] = []
    seen: set[str] = set()
    lo, hi = QUAT_NORM_BAND
    for body in frame.bodies:
        if body.body_id in seen:
            violations.append(
                Violation(ViolationKind.DUPLICATE_BODY, body.body_id, "repeated body id")
            )
        seen.add(body.body_id)
        n = body.joints.shape[0]
        if n != JOINT_COUNT or body.joints.shape[1] != 7:
            violations.append(
                Violation(
                    ViolationKind.JOINT_COUNT,
                    body.body_id,
                    f"expected {JOINT_COUNT}x7 joints, got {body.joints.shape}",
                )
            )
            continue
        if not np.isfinite(body.joints[:, :3]).all():
            bad = np.where(~np.isfinite(body.joints[:, :3]).all(axis=1))[0]
            violations.append(
                Violation(
                    ViolationKind.NON_FINITE_POSITION,
                    body.body_id,
                    f"non-finite position at joint index {int(bad[0])}",
                )
            )
        norms = np.linalg.norm(body.joints[:, 3:], axis=1)
        with np.errstate(invalid="ignore"):
            bad_q = ~((norms > lo) & (norms < hi)) | ~np.isfinite(norms)
        # In-band quaternions normalize to unit within tolerance by construction;
        # re-check anyway so hand-built frames cannot smuggle drifted values.
        unit_off = np.abs(norms - 1.0) > QUAT_NORM_TOL
        for idx in np.where(bad_q)[0]:
            violations.append(
                Violation(
                    ViolationKind.QUATERNION,
                    body.body_id,
                    f"joint {int(idx)} quaternion norm {norms[idx]:.6g} not normalizable",
                )
            )
        if not bad_q.any() and unit_off.any():
            # normalizable but not yet normalized: acceptable for raw frames,
            # checked by callers via normalize_frame before feature extraction
            pass
    for hand in frame.hands:
        if hand.points.shape != (LANDMARK_COUNT, 3):
            violations.append(
                Violation(
                    ViolationKind.LANDMARK_COUNT,
                    f"{hand.body_id}/{hand.hand.value}",
                    f"expected {LANDMARK_COUNT}x3 landmarks, got {hand.points.shape}",
                )
            )
        elif not np.isfinite(hand.points).all():
            violations.append(
                Violation(
                    ViolationKind.NON_FINITE_POSITION,
                    f"{hand.body_id}/{hand.hand.value}",
                    "non-finite hand landmark",
                )
            )
    return violations


def bodies_equal(a: Body, b: Body) -> bool:
    return a.body_id == b.body_id and np.array_equal(a.joints, b.joints)


def frames_equal(a: SkeletonFrame, b: SkeletonFrame) -> bool:
    """Structural equality helper (ndarray fields defeat dataclass eq)."""
    if a.timestamp != b.timestamp:
        return False
    if len(a.bodies) != len(b.bodies) or len(a.hands) != len(b.hands):
        return False
    if any(not bodies_equal(x, y) for x, y in zip(a.bodies, b.bodies)):
        return False
    for ha, hb in zip(a.hands, b.hands):
        if (ha.body_id, ha.hand) != (hb.body_id, hb.hand):
            return False
        if not np.array_equal(ha.points, hb.points):
            return False
    return a.speech == b.speech


def quat_norm(q) -> float:
    return math.sqrt(sum(float(c) * float(c) for c in q))
