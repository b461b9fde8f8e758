"""Deterministic synthetic sessions: scripted skeleton/hand/speech streams
plus analytically computed ground-truth events.

Ground truth comes straight from the script's directives using the same
documented rules the fusion layer implements (speak runs of at least the
domination threshold, shared-look overlaps, lean-out-with-no-look dwells,
pointing at the directive midpoint).  It is computed without running any
engine code so end-to-end tests have a true oracle.  Scripts are expected to
be "clean": no overlapping same-participant directives of one type and no
adversarial speech interleavings.

Scene frame: x right, y up, z from the camera toward the participants.  The
three seats form a shallow arc behind the table; idle gaze aims slightly
above the camera so it lands on nothing.  Position jitter is i.i.d. per
joint except the ear/nose triad, which shares a single draw per frame so the
commanded gaze direction survives the noise exactly.  Hand landmarks are
rendered without jitter; the stroke-speed gate is deliberately tight and
per-landmark noise at plausible magnitudes reads as motion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import FusionConfig
from .core import (
    Body,
    EngagementEvent,
    EventKind,
    Hand,
    HandLandmarks,
    JointId as J,
    HandLandmarkId as L,
    ObjectRegistry,
    SkeletonFrame,
    SpeechActivity,
    TaskObject,
)
from .errors import InvalidScript
from .posture import PostureLabel, Seat

# pelvis anchors per seat (seated height, arc around the table)
SEAT_PELVIS = {
    Seat.LEFT: np.array([-0.7, 0.45, 1.6]),
    Seat.MIDDLE: np.array([0.0, 0.45, 1.9]),
    Seat.RIGHT: np.array([0.7, 0.45, 1.6]),
}
LEAN_PITCH = {
    PostureLabel.LEAN_IN: math.radians(-12.0),  # top of torso toward the table
    PostureLabel.NEUTRAL: 0.0,
    PostureLabel.LEAN_OUT: math.radians(12.0),
}
HEAD_CENTER_OFFSET = np.array([0.0, 0.60, 0.0])
EAR_HALF_SPAN = 0.08
NOSE_LENGTH = 0.10
IDLE_LOOK = np.array([0.0, 0.18, -1.0]) / np.linalg.norm([0.0, 0.18, -1.0])
UP = np.array([0.0, 1.0, 0.0])

# canonical seated offsets from the pelvis; the upper set pitches with lean
_UPPER = {
    J.SPINE_NAVEL: (0.0, 0.15, 0.0),
    J.SPINE_CHEST: (0.0, 0.30, 0.0),
    J.NECK: (0.0, 0.45, 0.0),
    J.HEAD: (0.0, 0.52, 0.0),
    J.CLAVICLE_LEFT: (-0.05, 0.42, 0.0),
    J.CLAVICLE_RIGHT: (0.05, 0.42, 0.0),
    J.SHOULDER_LEFT: (-0.18, 0.40, 0.0),
    J.SHOULDER_RIGHT: (0.18, 0.40, 0.0),
    J.ELBOW_LEFT: (-0.25, 0.18, -0.05),
    J.ELBOW_RIGHT: (0.25, 0.18, -0.05),
    J.WRIST_LEFT: (-0.28, 0.05, -0.25),
    J.WRIST_RIGHT: (0.28, 0.05, -0.25),
    J.HAND_LEFT: (-0.28, 0.04, -0.30),
    J.HAND_RIGHT: (0.28, 0.04, -0.30),
    J.HANDTIP_LEFT: (-0.28, 0.03, -0.36),
    J.HANDTIP_RIGHT: (0.28, 0.03, -0.36),
    J.THUMB_LEFT: (-0.24, 0.04, -0.30),
    J.THUMB_RIGHT: (0.24, 0.04, -0.30),
}
_LOWER = {
    J.HIP_LEFT: (-0.09, -0.02, 0.0),
    J.HIP_RIGHT: (0.09, -0.02, 0.0),
    J.KNEE_LEFT: (-0.12, -0.05, -0.35),
    J.KNEE_RIGHT: (0.12, -0.05, -0.35),
    J.ANKLE_LEFT: (-0.12, -0.40, -0.32),
    J.ANKLE_RIGHT: (0.12, -0.40, -0.32),
    J.FOOT_LEFT: (-0.12, -0.44, -0.45),
    J.FOOT_RIGHT: (0.12, -0.44, -0.45),
}
# the whole upper body rotates with the torso, so every joint above the
# pelvis carries the lean quaternion
_PITCHED_QUAT_JOINTS = set(_UPPER) | {J.HEAD, J.NOSE, J.EAR_LEFT, J.EAR_RIGHT, J.EYE_LEFT, J.EYE_RIGHT}


@dataclass(frozen=True)
class Speak:
    speaker: str
    t0: float
    t1: float


@dataclass(frozen=True)
class LookAt:
    participant: str
    target: str  # object id or participant id
    t0: float
    t1: float


@dataclass(frozen=True)
class Lean:
    participant: str
    lean: PostureLabel
    t0: float
    t1: float


@dataclass(frozen=True)
class PointAt:
    participant: str
    object_id: str
    t0: float
    t1: float


Directive = Speak | LookAt | Lean | PointAt


@dataclass(frozen=True)
class ScenarioScript:
    duration: float
    seats: dict[Seat, str]  # seat -> participant id
    directives: tuple[Directive, ...]
    objects: ObjectRegistry
    seed: int
    frame_rate: float = 30.0
    noise_sigma: float = 0.002


def _pitch(offset: np.ndarray, angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    x, y, z = offset
    return np.array([x, y * c - z * s, y * s + z * c])


def head_center_for(seat: Seat, lean: PostureLabel) -> np.ndarray:
    """Ear-midpoint position for the canonical pose (pre-jitter)."""
    return SEAT_PELVIS[seat] + _pitch(HEAD_CENTER_OFFSET, LEAN_PITCH[lean])


def synth_body(
    seat: Seat,
    lean: PostureLabel,
    look_dir: np.ndarray,
    rng: np.random.Generator,
    body_id: str = "body",
    noise_sigma: float = 0.0,
) -> Body:
    """Render one seated 32-joint body.

    The upper body pitches about the pelvis by the lean angle; ears and nose
    are placed so the gaze ray reproduces ``look_dir`` exactly.  Positions
    get Gaussian jitter of ``noise_sigma``; the ear/nose triad shares one
    draw so the jittered gaze direction stays on the commanded one.  The rng
    is always consumed identically so streams stay seed-reproducible.
    """
    d = np.asarray(look_dir, dtype=np.float64)
    d = d / np.linalg.norm(d)
    pelvis = SEAT_PELVIS[seat]
    angle = LEAN_PITCH[lean]

    joints = np.zeros((32, 7))
    joints[:, 3] = 1.0  # identity quaternions
    qw, qx = math.cos(angle / 2.0), math.sin(angle / 2.0)
    for j in _PITCHED_QUAT_JOINTS:
        joints[j, 3:] = (qw, qx, 0.0, 0.0)

    joints[J.PELVIS, :3] = pelvis
    for j, off in _UPPER.items():
        joints[j, :3] = pelvis + _pitch(np.array(off), angle)
    for j, off in _LOWER.items():
        joints[j, :3] = pelvis + np.array(off)

    hc = pelvis + _pitch(HEAD_CENTER_OFFSET, angle)
    lateral = np.cross(d, UP)
    lateral = lateral / np.linalg.norm(lateral)
    joints[J.EAR_LEFT, :3] = hc - EAR_HALF_SPAN * lateral
    joints[J.EAR_RIGHT, :3] = hc + EAR_HALF_SPAN * lateral
    joints[J.NOSE, :3] = hc + NOSE_LENGTH * d
    joints[J.EYE_LEFT, :3] = hc + 0.07 * d - 0.03 * lateral + 0.02 * UP
    joints[J.EYE_RIGHT, :3] = hc + 0.07 * d + 0.03 * lateral + 0.02 * UP

    # rows 0..31: per-joint jitter; row 32: shared draw for the head triad
    offsets = rng.normal(0.0, 1.0, size=(33, 3)) * noise_sigma
    head_triad = (int(J.EAR_LEFT), int(J.EAR_RIGHT), int(J.NOSE))
    for j in range(32):
        if j in head_triad:
            joints[j, :3] += offsets[32]
        else:
            joints[j, :3] += offsets[j]
    return Body(body_id=body_id, joints=joints)


def synth_point_hand(body_id: str, chest: np.ndarray, target_center: np.ndarray) -> HandLandmarks:
    """Canonical Point pose: index chain collinear with the aim line.

    The wrist floats in front of the chest anchor toward the target; the
    index runs straight along the aim direction (extension ratio exactly 1)
    while the other four fingers fold back under the curl threshold.  The
    anchor must be the canonical chest, not a jittered joint: the stroke
    detector's speed gate reads hand jitter as motion.
    """
    chest = np.asarray(chest, dtype=np.float64)
    u = np.asarray(target_center, dtype=np.float64) - chest
    u = u / np.linalg.norm(u)
    p1 = np.cross(u, UP)
    p1 = p1 / np.linalg.norm(p1)
    p2 = np.cross(p1, u)
    wrist = chest + 0.30 * u

    pts = np.zeros((21, 3), dtype=np.float64)
    pts[L.WRIST] = wrist
    pts[L.INDEX_MCP] = wrist + 0.090 * u
    pts[L.INDEX_PIP] = wrist + 0.125 * u
    pts[L.INDEX_DIP] = wrist + 0.150 * u
    pts[L.INDEX_TIP] = wrist + 0.170 * u
    pts[L.THUMB_CMC] = wrist + 0.030 * u + 0.025 * p1
    pts[L.THUMB_MCP] = wrist + 0.050 * u + 0.035 * p1
    pts[L.THUMB_IP] = wrist + 0.060 * u + 0.020 * p1
    pts[L.THUMB_TIP] = wrist + 0.065 * u + 0.005 * p1
    for finger, w in (("MIDDLE", -0.022), ("RING", -0.044), ("PINKY", -0.066)):
        mcp = wrist + 0.085 * u + w * p1
        pip = mcp + 0.030 * u - 0.010 * p2
        dip = pip - 0.025 * u - 0.015 * p2
        tip = dip - 0.025 * u - 0.005 * p2
        pts[L[f"{finger}_MCP"]] = mcp
        pts[L[f"{finger}_PIP"]] = pip
        pts[L[f"{finger}_DIP"]] = dip
        pts[L[f"{finger}_TIP"]] = tip
    return HandLandmarks(body_id=body_id, hand=Hand.RIGHT, points=pts)


def _active(directives, cls, participant: str, t: float):
    """Latest directive of ``cls`` for ``participant`` covering t (half-open)."""
    hit = None
    for d in directives:
        if isinstance(d, cls) and d.participant == participant and d.t0 <= t < d.t1:
            hit = d
    return hit


def validate_script(script: ScenarioScript) -> None:
    pids = set(script.seats.values())
    if len(pids) != len(script.seats):
        raise InvalidScript("participant ids must be distinct")
    object_ids = set(script.objects.ids())
    for d in script.directives:
        if not (0.0 <= d.t0 < d.t1 <= script.duration):
            raise InvalidScript(f"directive {d} outside [0, {script.duration}]")
        if isinstance(d, Speak):
            if d.speaker not in pids:
                raise InvalidScript(f"unknown speaker {d.speaker}")
        elif isinstance(d, LookAt):
            if d.participant not in pids:
                raise InvalidScript(f"unknown participant {d.participant}")
            if d.target not in object_ids and d.target not in pids:
                raise InvalidScript(f"unknown look target {d.target}")
            if d.target == d.participant:
                raise InvalidScript("participants cannot look at themselves")
        elif isinstance(d, Lean):
            if d.participant not in pids:
                raise InvalidScript(f"unknown participant {d.participant}")
        elif isinstance(d, PointAt):
            if d.participant not in pids:
                raise InvalidScript(f"unknown participant {d.participant}")
            if d.object_id not in object_ids:
                raise InvalidScript(f"unknown point target {d.object_id}")


def build_scenario(script: ScenarioScript) -> tuple[list[SkeletonFrame], list[EngagementEvent]]:
    """Render the frame stream and compute the directive-level ground truth."""
    validate_script(script)
    rng = np.random.default_rng(script.seed)
    seat_of = {pid: seat for seat, pid in script.seats.items()}
    n_frames = int(round(script.duration * script.frame_rate)) + 1

    frames: list[SkeletonFrame] = []
    prev_speech: dict[str, bool] = {pid: False for pid in seat_of}
    for k in range(n_frames):
        t = k / script.frame_rate
        leans = {
            pid: (
                d.lean
                if (d := _active(script.directives, Lean, pid, t)) is not None
                else PostureLabel.NEUTRAL
            )
            for pid in seat_of
        }
        head_centers = {pid: head_center_for(seat_of[pid], leans[pid]) for pid in seat_of}

        bodies = []
        hands = []
        for seat in (Seat.LEFT, Seat.MIDDLE, Seat.RIGHT):
            pid = script.seats.get(seat)
            if pid is None:
                continue
            look = _active(script.directives, LookAt, pid, t)
            if look is None:
                look_dir = IDLE_LOOK
            else:
                if look.target in seat_of:
                    aim = head_centers[look.target]
                else:
                    aim = script.objects.get(look.target).center()
                look_dir = aim - head_centers[pid]
            body = synth_body(
                seat,
                leans[pid],
                look_dir,
                rng,
                body_id=pid,
                noise_sigma=script.noise_sigma,
            )
            bodies.append(body)
            point = _active(script.directives, PointAt, pid, t)
            if point is not None:
                chest = SEAT_PELVIS[seat] + _pitch(
                    np.array(_UPPER[J.SPINE_CHEST]), LEAN_PITCH[leans[pid]]
                )
                hands.append(
                    synth_point_hand(pid, chest, script.objects.get(point.object_id).center())
                )

        speech = []
        for pid in sorted(seat_of):
            now_active = any(
                isinstance(d, Speak) and d.speaker == pid and d.t0 <= t < d.t1
                for d in script.directives
            )
            if now_active != prev_speech[pid]:
                speech.append(SpeechActivity(speaker_id=pid, active=now_active))
                prev_speech[pid] = now_active
        frames.append(
            SkeletonFrame(timestamp=t, bodies=tuple(bodies), hands=tuple(hands), speech=tuple(speech))
        )
    return frames, compute_truth(script)


# ---------------------------------------------------------------------------
# analytic ground truth
# ---------------------------------------------------------------------------


def _merge(intervals: list[tuple[float, float]], gap: float = 0.0) -> list[tuple[float, float]]:
    out: list[list[float]] = []
    for a, b in sorted(intervals):
        if out and a - out[-1][1] <= gap:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return [(a, b) for a, b in out]


def _subtract(xs: list[tuple[float, float]], ys: list[tuple[float, float]]):
    out = []
    for a, b in xs:
        cur = a
        for c, d in ys:
            if d <= cur or c >= b:
                continue
            if c > cur:
                out.append((cur, min(c, b)))
            cur = max(cur, d)
            if cur >= b:
                break
        if cur < b:
            out.append((cur, b))
    return out


def compute_truth(script: ScenarioScript, cfg: FusionConfig | None = None) -> list[EngagementEvent]:
    """Ground-truth events straight from the directives (engine-free)."""
    cfg = cfg or FusionConfig()
    events: list[EngagementEvent] = []

    speak: dict[str, list[tuple[float, float]]] = {}
    for d in script.directives:
        if isinstance(d, Speak):
            speak.setdefault(d.speaker, []).append((d.t0, d.t1))
    for spk in sorted(speak):
        for a, b in _merge(speak[spk], gap=cfg.gap_tolerance):
            if b - a >= cfg.dominated_threshold:
                events.append(
                    EngagementEvent(
                        0,
                        EventKind.DOMINATED_DISCUSSION,
                        a,
                        b,
                        (spk,),
                        None,
                        {"crossed_at": repr(a + cfg.dominated_threshold)},
                    )
                )

    # shared-look windows per target: sweep joins/leaves, maximal >=k spans
    looks: dict[str, list[tuple[float, int, str]]] = {}
    for d in script.directives:
        if isinstance(d, LookAt):
            looks.setdefault(d.target, []).append((d.t0, +1, d.participant))
            looks.setdefault(d.target, []).append((d.t1, -1, d.participant))
    pids = set(script.seats.values())
    for tgt in sorted(looks):
        boundary = sorted(looks[tgt], key=lambda x: (x[0], x[1]))
        active: set[str] = set()
        start = None
        sharers: set[str] = set()
        i = 0
        while i < len(boundary):
            t0 = boundary[i][0]
            while i < len(boundary) and boundary[i][0] == t0:
                _, delta, pid = boundary[i]
                if delta > 0:
                    active.add(pid)
                else:
                    active.discard(pid)
                i += 1
            if start is None and len(active) >= cfg.jva_min_participants:
                start = t0
                sharers = set(active)
            elif start is not None:
                if len(active) < cfg.jva_min_participants:
                    if t0 - start >= cfg.jva_min_overlap:
                        events.append(
                            EngagementEvent(
                                0,
                                EventKind.JOINT_ATTENTION,
                                start,
                                t0,
                                tuple(sorted(sharers)),
                                tgt,
                                {"target_type": "participant" if tgt in pids else "object"},
                            )
                        )
                    start = None
                else:
                    sharers.update(active)

    for pid in sorted(pids):
        lean_out = _merge(
            [(d.t0, d.t1) for d in script.directives if isinstance(d, Lean) and d.participant == pid and d.lean == PostureLabel.LEAN_OUT]
        )
        looking = _merge(
            [(d.t0, d.t1) for d in script.directives if isinstance(d, LookAt) and d.participant == pid]
        )
        for a, b in _subtract(lean_out, looking):
            if b - a >= cfg.disengage_dwell:
                events.append(
                    EngagementEvent(0, EventKind.DISENGAGEMENT, a, b, (pid,), None, {})
                )

    for d in script.directives:
        if isinstance(d, PointAt):
            mid = (d.t0 + d.t1) / 2.0
            events.append(
                EngagementEvent(
                    0,
                    EventKind.POINTING_SELECTION,
                    mid,
                    mid,
                    (d.participant,),
                    d.object_id,
                    {"hand": Hand.RIGHT.value},
                )
            )

    events.sort(key=lambda e: (e.t_start, e.kind.value, e.participants, e.target or ""))
    return [
        EngagementEvent(i, e.kind, e.t_start, e.t_end, e.participants, e.target, e.metadata)
        for i, e in enumerate(events)
    ]


# ---------------------------------------------------------------------------
# built-in scenarios
# ---------------------------------------------------------------------------


def _block(object_id: str, label: str, x: float, size: float = 0.06) -> TaskObject:
    half = size / 2.0
    return TaskObject(
        object_id=object_id,
        label=label,
        aabb_min=np.array([x - half, 0.75, 1.0 - half]),
        aabb_max=np.array([x + half, 0.75 + size, 1.0 + half]),
    )


def _weights_objects() -> ObjectRegistry:
    blocks = [
        _block("block_a", "red block", -0.40),
        _block("block_b", "green block", -0.20),
        _block("block_c", "blue block", 0.00),
        _block("block_d", "yellow block", 0.20),
        _block("block_e", "purple block", 0.40),
    ]
    scale = TaskObject(
        object_id="scale",
        label="balance scale",
        aabb_min=np.array([-0.10, 0.75, 0.73]),
        aabb_max=np.array([0.10, 0.85, 0.87]),
    )
    return ObjectRegistry(objects=tuple(blocks + [scale]))


def weights_task(seed: int) -> ScenarioScript:
    """Object-centric session: short speech turns, shared looks, pointing."""
    p1, p2, p3 = "P1", "P2", "P3"
    directives = (
        Speak(p1, 2.0, 14.0),
        Speak(p2, 15.0, 26.0),
        Speak(p3, 27.0, 38.0),
        LookAt(p1, "block_c", 5.0, 9.0),
        LookAt(p2, "block_c", 5.5, 8.5),
        LookAt(p3, "block_c", 6.0, 8.0),
        PointAt(p2, "block_a", 20.0, 22.0),
        LookAt(p2, "block_a", 19.5, 23.0),
        LookAt(p3, "block_a", 20.5, 22.5),
        LookAt(p1, p2, 28.0, 30.5),
        LookAt(p3, p2, 28.5, 31.0),
        PointAt(p3, "scale", 33.0, 34.5),
        LookAt(p1, "scale", 40.0, 45.0),
        LookAt(p2, "scale", 40.0, 44.0),
    )
    return ScenarioScript(
        duration=50.0,
        seats={Seat.LEFT: p1, Seat.MIDDLE: p2, Seat.RIGHT: p3},
        directives=directives,
        objects=_weights_objects(),
        seed=seed,
    )


def _dominated(seed: int, engaged: bool) -> ScenarioScript:
    p1, p2, p3 = "P1", "P2", "P3"
    directives: list[Directive] = [Speak(p2, 5.0, 41.0)]
    if engaged:
        directives += [
            LookAt(p1, p2, 5.0, 41.0),
            LookAt(p3, p2, 5.0, 41.0),
            Lean(p1, PostureLabel.LEAN_IN, 0.0, 50.0),
            Lean(p3, PostureLabel.LEAN_IN, 0.0, 50.0),
        ]
    else:
        directives += [
            Lean(p1, PostureLabel.LEAN_OUT, 0.0, 50.0),
            Lean(p3, PostureLabel.LEAN_OUT, 0.0, 50.0),
        ]
    return ScenarioScript(
        duration=50.0,
        seats={Seat.LEFT: p1, Seat.MIDDLE: p2, Seat.RIGHT: p3},
        directives=tuple(directives),
        objects=ObjectRegistry(),
        seed=seed,
    )


def dominated_engaged(seed: int) -> ScenarioScript:
    """Monologue with listeners leaning in and watching the speaker."""
    return _dominated(seed, engaged=True)


def dominated_disengaged(seed: int) -> ScenarioScript:
    """Same monologue; listeners lean out and look at nothing."""
    return _dominated(seed, engaged=False)


SCENARIOS = {
    "weights_task": weights_task,
    "dominated_engaged": dominated_engaged,
    "dominated_disengaged": dominated_disengaged,
}


def labeled_poses(
    seat: Seat,
    per_class: int,
    seed: int,
    noise_sigma: float = 0.002,
) -> list[tuple[np.ndarray, int]]:
    """Seeded training set for one seat: flattened features with lean labels."""
    from .posture import flatten_features

    rng = np.random.default_rng(seed)
    samples = []
    for label in (PostureLabel.LEAN_IN, PostureLabel.NEUTRAL, PostureLabel.LEAN_OUT):
        for _ in range(per_class):
            body = synth_body(seat, label, IDLE_LOOK, rng, noise_sigma=noise_sigma)
            samples.append((flatten_features(body), int(label)))
    return samples
