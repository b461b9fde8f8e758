"""File ingestion, session replay orchestration and event serialization.

Frames and events are line-delimited JSON: streamable, diffable, and the
same parser serves replay and live tailing.  Replay is strictly
deterministic: identical inputs produce byte-identical event logs.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import EngineConfig, load_config
from .core import (
    Body,
    EngagementEvent,
    EventKind,
    Hand,
    HandLandmarks,
    ObjectRegistry,
    SkeletonFrame,
    SpeechActivity,
    TaskObject,
    normalize_frame,
    validate_frame,
)
from .errors import (
    DegenerateHead,
    DuplicateObjectId,
    InvalidAabb,
    MissingModelFile,
    NonMonotoneTime,
    ParseError,
)
from .fusion import EventDelta, FrameInputs, FusionEngine, PointingObservation
from .gaze import gaze_target
from .gesture import HandTrackWindow, detect_pointing
from .posture import Seat, SeatModels, assign_seats, classify_posture, load_model

MODEL_FILE_SUFFIX = ".efmlp"


@dataclass(frozen=True)
class SessionPaths:
    frames: Path
    objects: Path
    out: Path
    config: Path | None = None
    models: Path | None = None


@dataclass
class ReplaySummary:
    frames_read: int = 0
    processed: int = 0
    rejected: int = 0
    violations: int = 0
    degenerate_heads: int = 0
    events_by_kind: dict[str, int] = field(default_factory=dict)

    def total_events(self) -> int:
        return sum(self.events_by_kind.values())


# ---------------------------------------------------------------------------
# frame records
# ---------------------------------------------------------------------------


def _require(cond: bool, lineno: int, msg: str) -> None:
    if not cond:
        raise ParseError(f"line {lineno}: {msg}")


def _finite_array(values, shape, lineno: int, what: str) -> np.ndarray:
    try:
        arr = np.array(values, dtype=np.float64)
    except (TypeError, ValueError):
        raise ParseError(f"line {lineno}: {what} is not numeric")
    _require(arr.shape == shape, lineno, f"{what} has shape {arr.shape}, expected {shape}")
    _require(bool(np.isfinite(arr).all()), lineno, f"{what} contains non-finite values")
    return arr


def parse_frame_line(line: str, lineno: int = 0) -> SkeletonFrame:
    """Parse one frame record; quaternions are renormalized on ingestion.

    Structural problems (malformed JSON, wrong counts, non-finite numbers)
    raise ParseError with the line number.  Frame-level invariant violations
    that survive parsing (for example non-normalizable quaternions) are left
    for ``validate_frame`` to report.
    """
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {lineno}: invalid JSON ({exc.msg})")
    _require(isinstance(rec, dict), lineno, "record is not an object")
    _require("t" in rec, lineno, "missing 't'")
    t = rec["t"]
    _require(isinstance(t, (int, float)) and math.isfinite(t), lineno, "'t' must be a finite number")

    bodies = []
    for i, b in enumerate(rec.get("bodies", [])):
        _require(isinstance(b, dict) and "id" in b and "joints" in b, lineno, f"body[{i}] malformed")
        joints = _finite_array(b["joints"], (32, 7), lineno, f"body[{i}].joints")
        bodies.append(Body(body_id=str(b["id"]), joints=joints))

    hands = []
    for i, h in enumerate(rec.get("hands", [])):
        _require(
            isinstance(h, dict) and "body" in h and "side" in h and "lm" in h,
            lineno,
            f"hands[{i}] malformed",
        )
        _require(h["side"] in ("L", "R"), lineno, f"hands[{i}].side must be 'L' or 'R'")
        lm = _finite_array(h["lm"], (21, 3), lineno, f"hands[{i}].lm")
        hands.append(HandLandmarks(body_id=str(h["body"]), hand=Hand(h["side"]), points=lm))

    speech = []
    for i, s in enumerate(rec.get("speech", [])):
        _require(
            isinstance(s, dict) and "spk" in s and isinstance(s.get("on"), bool),
            lineno,
            f"speech[{i}] malformed",
        )
        speech.append(SpeechActivity(speaker_id=str(s["spk"]), active=s["on"]))

    frame = SkeletonFrame(timestamp=float(t), bodies=tuple(bodies), hands=tuple(hands), speech=tuple(speech))
    return normalize_frame(frame)


def serialize_frame(frame: SkeletonFrame) -> str:
    """Canonical single-line form; reparsing yields an equal frame."""
    rec: dict = {"t": frame.timestamp}
    if frame.bodies:
        rec["bodies"] = [
            {"id": b.body_id, "joints": [list(row) for row in b.joints]} for b in frame.bodies
        ]
    if frame.hands:
        rec["hands"] = [
            {"body": h.body_id, "side": h.hand.value, "lm": [list(p) for p in h.points]}
            for h in frame.hands
        ]
    if frame.speech:
        rec["speech"] = [{"spk": s.speaker_id, "on": s.active} for s in frame.speech]
    return json.dumps(rec, separators=(",", ":"))


def write_frames(frames, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for frame in frames:
            fh.write(serialize_frame(frame) + "\n")


def read_frames(path) -> list[SkeletonFrame]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                out.append(parse_frame_line(line, lineno))
    return out


# ---------------------------------------------------------------------------
# object registry
# ---------------------------------------------------------------------------


def load_object_registry(path) -> ObjectRegistry:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc.msg})")
    if not isinstance(doc, dict) or not isinstance(doc.get("objects"), list):
        raise ParseError(f"{path}: expected an object with an 'objects' list")
    objects = []
    seen: set[str] = set()
    for i, o in enumerate(doc["objects"]):
        if not isinstance(o, dict) or not {"id", "label", "min", "max"} <= set(o):
            raise ParseError(f"{path}: objects[{i}] malformed")
        oid = str(o["id"])
        if oid in seen:
            raise DuplicateObjectId(f"{path}: duplicate object id {oid!r}")
        seen.add(oid)
        lo = np.array(o["min"], dtype=np.float64)
        hi = np.array(o["max"], dtype=np.float64)
        if lo.shape != (3,) or hi.shape != (3,) or not np.isfinite(lo).all() or not np.isfinite(hi).all():
            raise ParseError(f"{path}: objects[{i}] min/max must be finite 3-vectors")
        if (lo > hi).any() or not (lo < hi).any():
            raise InvalidAabb(f"{path}: object {oid!r} box is inverted or a point")
        objects.append(TaskObject(object_id=oid, label=str(o["label"]), aabb_min=lo, aabb_max=hi))
    return ObjectRegistry(objects=tuple(objects))


# ---------------------------------------------------------------------------
# event records
# ---------------------------------------------------------------------------


def serialize_event(event: EngagementEvent) -> str:
    rec = {
        "id": event.event_id,
        "kind": event.kind.value,
        "t0": event.t_start,
        "t1": event.t_end,
        "who": list(event.participants),
        "target": event.target,
        "meta": dict(sorted(event.metadata.items())),
    }
    return json.dumps(rec, separators=(",", ":"))


def parse_event_line(line: str, lineno: int = 0) -> EngagementEvent:
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"line {lineno}: invalid JSON ({exc.msg})")
    try:
        return EngagementEvent(
            event_id=int(rec["id"]),
            kind=EventKind(rec["kind"]),
            t_start=float(rec["t0"]),
            t_end=None if rec["t1"] is None else float(rec["t1"]),
            participants=tuple(rec["who"]),
            target=rec["target"],
            metadata=dict(rec.get("meta", {})),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise ParseError(f"line {lineno}: bad event record ({exc})")


def write_events(events, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ev in events:
            fh.write(serialize_event(ev) + "\n")


def read_events(path) -> list[EngagementEvent]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                out.append(parse_event_line(line, lineno))
    return out


def load_seat_models(models_dir) -> SeatModels:
    models = {}
    for seat in Seat:
        path = Path(models_dir) / f"{seat.value}{MODEL_FILE_SUFFIX}"
        if not path.exists():
            raise MissingModelFile(f"expected model file {path}")
        models[seat] = load_model(path)
    return SeatModels(models=models)


# ---------------------------------------------------------------------------
# replay pipeline
# ---------------------------------------------------------------------------


class _HandTracks:
    """Minimal windows over hand samples; a track resets when its hand
    disappears from a frame."""

    def __init__(self, window: float):
        self.window = window
        self.tracks: dict[tuple[str, str], deque] = {}

    def update(self, t: float, hands: tuple[HandLandmarks, ...]):
        present = {(h.body_id, h.hand.value) for h in hands}
        for key in [k for k in self.tracks if k not in present]:
            del self.tracks[key]
        windows = []
        eps = 1e-9  # frame times are rarely exact multiples of the window
        for h in sorted(hands, key=lambda h: (h.body_id, h.hand.value)):
            key = (h.body_id, h.hand.value)
            track = self.tracks.setdefault(key, deque())
            track.append((t, h))
            while len(track) >= 2 and track[1][0] <= t - self.window + eps:
                track.popleft()
            if t - track[0][0] >= self.window - eps:
                windows.append(
                    HandTrackWindow(body_id=h.body_id, hand=h.hand, samples=tuple(track))
                )
        return windows


class ReplayPipeline:
    """Per-frame derivation (gaze, pointing, posture) plus the fusion engine."""

    def __init__(self, registry: ObjectRegistry, cfg: EngineConfig, models: SeatModels | None):
        self.registry = registry
        self.cfg = cfg
        self.models = models
        self.engine = FusionEngine(cfg.fusion, stroke_window=cfg.gesture.stroke_window)
        self.tracks = _HandTracks(cfg.gesture.stroke_window)
        self.prev_seats = None
        self.degenerate_heads = 0
        self.last_t: float | None = None

    def step(self, frame: SkeletonFrame) -> list[EventDelta]:
        t = frame.timestamp
        self.last_t = t
        bodies = sorted(frame.bodies, key=lambda b: b.body_id)
        inputs = FrameInputs(speech=list(frame.speech))

        for body in bodies:
            others = [b for b in bodies if b.body_id != body.body_id]
            try:
                inputs.gaze[body.body_id] = gaze_target(
                    body, self.registry, others, self.cfg.gaze
                )
            except DegenerateHead:
                self.degenerate_heads += 1
                inputs.gaze[body.body_id] = None

        if self.models is not None and bodies:
            self.prev_seats = assign_seats(bodies, self.prev_seats, self.cfg.posture)
            for body in bodies:
                label, _ = classify_posture(
                    self.models, self.prev_seats.seats[body.body_id], body
                )
                inputs.posture[body.body_id] = label

        for window in self.tracks.update(t, frame.hands):
            det = detect_pointing(window, self.registry, self.cfg.gesture)
            if det is not None:
                inputs.pointing.append(
                    PointingObservation(
                        t=det.t,
                        body_id=det.body_id,
                        hand=det.hand.value,
                        selected=det.selected,
                    )
                )

        return self.engine.update(t, inputs)

    def finish(self) -> list[EventDelta]:
        if self.last_t is None:
            return []
        return self.engine.finalize(self.last_t)


def run_replay(paths: SessionPaths) -> ReplaySummary:
    """Stream frames through gaze, gesture, posture and fusion in order.

    Frames failing validation are rejected and counted but do not abort the
    replay; malformed records and non-monotone timestamps do.  Posture (and
    with it disengagement detection) runs only when a models directory is
    supplied.
    """
    registry = load_object_registry(paths.objects)
    cfg = load_config(paths.config) if paths.config else EngineConfig()
    models = load_seat_models(paths.models) if paths.models else None
    pipeline = ReplayPipeline(registry, cfg, models)
    summary = ReplaySummary()
    last_t: float | None = None

    with open(paths.frames, "r", encoding="utf-8") as src, open(
        paths.out, "w", encoding="utf-8"
    ) as out:

        def emit(deltas: list[EventDelta]) -> None:
            for delta in deltas:
                out.write(serialize_event(delta.event) + "\n")
                if delta.action == "closed":
                    kind = delta.event.kind.value
                    summary.events_by_kind[kind] = summary.events_by_kind.get(kind, 0) + 1

        for lineno, line in enumerate(src, start=1):
            if not line.strip():
                continue
            frame = parse_frame_line(line, lineno)
            summary.frames_read += 1
            if last_t is not None and frame.timestamp <= last_t:
                raise NonMonotoneTime(
                    f"line {lineno}: timestamp {frame.timestamp} after {last_t}"
                )
            last_t = frame.timestamp
            violations = validate_frame(frame)
            if violations:
                summary.rejected += 1
                summary.violations += len(violations)
                continue
            summary.processed += 1
            emit(pipeline.step(frame))
        emit(pipeline.finish())

    summary.degenerate_heads = pipeline.degenerate_heads
    return summary
