"""Temporal fusion: turns per-frame gaze/posture/pointing/speech into
engagement events.

Two equivalent routes are provided on purpose.  The batch detectors
(``detect_dominated``, ``detect_jva``, ``detect_disengagement``,
``aggregate_pointing``) are pure functions over complete interval timelines.
``FusionEngine`` consumes frames one at a time and must emit exactly the same
events; the equivalence is pinned by tests, so any change here has to keep
the two routes in lockstep (including float expression shapes for derived
times such as turn crossings).

Dominated-discussion semantics ("turns"):

* A speaker's speech runs are half-open intervals; gaps of at most
  ``gap_tolerance`` inside a turn are bridged.
* At most one turn is ever open (a "floor" model): it starts when a speaker
  is active and the floor is free, earliest activity first (ties: earlier
  run start, then speaker id).
* Another speaker being active for strictly more than ``gap_tolerance``
  inside the turn cuts it at intrusion-start + tolerance; the turn then ends
  at the holder's last active moment at or before the cut.
* An event is produced iff the turn accumulates at least
  ``dominated_threshold`` seconds of the holder's speech; it spans the whole
  turn, and the threshold-crossing time is recorded in metadata.

The floor model guarantees DominatedDiscussion events never overlap.

Pointing selections are reported as instantaneous events: a maximal run of
same-target detections for one hand, timestamped at the midpoint of the run
extended back by the stroke window (a detection at t certifies a stroke
spanning [t - window, t]).

Input conditioning before the detectors:

* gaze targets change only after ``gaze_switch_frames`` consecutive frames
  agree, retroactive to the first agreeing frame;
* posture labels pass a centered majority window of ``posture_smooth``
  seconds (ties keep the previous smoothed label);
* speech booleans latch into runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .config import FusionConfig
from .core import EngagementEvent, EventKind, SpeechActivity
from .errors import MalformedInterval, NonMonotoneTime
from .gaze import GazeTarget, ObjectTarget, ParticipantTarget
from .posture import PostureLabel

TargetKey = tuple[str, str]  # ("object"|"participant", id)

_INF = math.inf


def target_key(target) -> TargetKey | None:
    """Normalize a gaze target into a hashable (type, id) key."""
    if target is None:
        return None
    if isinstance(target, ObjectTarget):
        return ("object", target.object_id)
    if isinstance(target, ParticipantTarget):
        return ("participant", target.body_id)
    if isinstance(target, tuple) and len(target) == 2:
        return (str(target[0]), str(target[1]))
    return ("object", str(target))


# ---------------------------------------------------------------------------
# interval plumbing
# ---------------------------------------------------------------------------


def _check_intervals(intervals: list[tuple[float, float]], who: str) -> None:
    prev_end = -_INF
    for a, b in intervals:
        if not (a < b):
            raise MalformedInterval(f"{who}: interval [{a}, {b}] is empty or reversed")
        if a < prev_end:
            raise MalformedInterval(f"{who}: overlapping intervals at {a}")
        prev_end = b


def _merge_runs(intervals: list[tuple[float, float]]) -> list[tuple[float, float]]:
    """Sort and merge touching intervals into maximal runs."""
    out: list[list[float]] = []
    for a, b in sorted(intervals):
        if out and a <= out[-1][1]:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return [(a, b) for a, b in out]


def _merge_timeline(segments: list[tuple[object, float, float]]) -> list[tuple[object, float, float]]:
    """Merge adjacent same-value segments of a piecewise-constant timeline."""
    merged: list[list] = []
    for value, a, b in sorted(segments, key=lambda s: s[1]):
        if merged and merged[-1][0] == value and a <= merged[-1][2]:
            merged[-1][2] = max(merged[-1][2], b)
        else:
            merged.append([value, a, b])
    return [(v, a, b) for v, a, b in merged]


# ---------------------------------------------------------------------------
# batch detector: dominated discussion
# ---------------------------------------------------------------------------


def detect_dominated(
    speech: list[tuple[str, float, float]],
    cfg: FusionConfig,
) -> list[EngagementEvent]:
    """Batch dominated-discussion detection over (speaker, start, end) triples."""
    by_speaker: dict[str, list[tuple[float, float]]] = {}
    for spk, a, b in speech:
        by_speaker.setdefault(spk, []).append((a, b))
    for spk in by_speaker:
        _check_intervals(sorted(by_speaker[spk]), spk)
        by_speaker[spk] = _merge_runs(by_speaker[spk])

    tol = cfg.gap_tolerance
    threshold = cfg.dominated_threshold
    events: list[EngagementEvent] = []
    floor_free = -_INF

    def next_take() -> tuple[float, float, str] | None:
        best = None
        for spk in sorted(by_speaker):
            for a, b in by_speaker[spk]:
                if b > floor_free:
                    t_active = max(a, floor_free)
                    cand = (t_active, a, spk)
                    if best is None or cand < best:
                        best = cand
                    break
        return best

    while True:
        take = next_take()
        if take is None:
            break
        ts, _, holder = take

        # earliest qualifying intrusion cut: another speaker active strictly
        # longer than the tolerance inside the turn
        cut = _INF
        for spk in sorted(by_speaker):
            if spk == holder:
                continue
            for a, b in by_speaker[spk]:
                if b <= ts:
                    continue
                o = max(a, ts)
                c = o + tol
                if b > c:
                    cut = min(cut, c)
                    break  # later runs of spk can only cut later

        completed = 0.0
        crossing: float | None = None
        last_active = ts
        te: float | None = None
        for a, b in by_speaker[holder]:
            if b <= ts:
                continue
            s = max(a, ts)
            if s > last_active:
                # silence before this run: own gap or a cut inside it ends the turn
                if s - last_active > tol or cut < s:
                    te = last_active
                    break
            seg_end = min(b, cut)
            if crossing is None and completed + (seg_end - s) >= threshold:
                crossing = s + (threshold - completed)
            completed += seg_end - s
            last_active = seg_end
            if cut <= b:
                te = seg_end
                break
        if te is None:
            te = last_active
        if completed >= threshold:
            events.append(
                EngagementEvent(
                    event_id=0,
                    kind=EventKind.DOMINATED_DISCUSSION,
                    t_start=ts,
                    t_end=te,
                    participants=(holder,),
                    target=None,
                    metadata={"crossed_at": repr(crossing)},
                )
            )
        floor_free = te

    return _assign_ids(events)


# ---------------------------------------------------------------------------
# batch detector: joint visual attention
# ---------------------------------------------------------------------------


def detect_jva(
    gaze_timeline: dict[str, list[tuple[object, float, float]]],
    cfg: FusionConfig,
) -> list[EngagementEvent]:
    """Joint-attention intervals: >= jva_min_participants share one target.

    ``gaze_timeline`` maps participant -> (target, start, end) intervals;
    ``None`` targets (or simply missing spans) never participate.  A maximal
    shared interval lasting at least ``jva_min_overlap`` becomes one event
    listing every participant who shared the target inside it.
    """
    boundaries: list[tuple[float, int, str, TargetKey]] = []  # (t, +1/-1, pid, key)
    for pid in sorted(gaze_timeline):
        segs = [
            (target_key(tgt), a, b)
            for tgt, a, b in gaze_timeline[pid]
            if target_key(tgt) is not None
        ]
        _check_intervals(sorted((a, b) for _, a, b in segs), pid)
        for key, a, b in _merge_timeline(segs):
            boundaries.append((a, +1, pid, key))
            boundaries.append((b, -1, pid, key))

    events = _sweep_shared_windows(boundaries, cfg.jva_min_participants, cfg.jva_min_overlap)
    return _assign_ids(events)


def _sweep_shared_windows(
    boundaries: list[tuple[float, int, str, TargetKey]],
    min_count: int,
    min_overlap: float,
) -> list[EngagementEvent]:
    events: list[EngagementEvent] = []
    active: dict[TargetKey, set[str]] = {}
    window: dict[TargetKey, tuple[float, set[str]]] = {}  # key -> (start, sharers)
    for t, group in _group_by_time(boundaries):
        touched: set[TargetKey] = set()
        for _, delta, pid, key in group:
            touched.add(key)
            members = active.setdefault(key, set())
            if delta > 0:
                members.add(pid)
            else:
                members.discard(pid)
        for key in sorted(touched):
            members = active.get(key, set())
            open_win = window.get(key)
            if open_win is not None:
                start, sharers = open_win
                if len(members) < min_count:
                    if t - start >= min_overlap:
                        events.append(_jva_event(key, start, t, sharers))
                    del window[key]
                else:
                    sharers.update(members)
            elif len(members) >= min_count:
                window[key] = (t, set(members))
    # timelines are finite: every join has a leave, so no windows stay open
    return events


def _group_by_time(boundaries):
    ordered = sorted(boundaries, key=lambda b: (b[0], b[1], b[2], b[3]))
    i = 0
    while i < len(ordered):
        j = i
        while j < len(ordered) and ordered[j][0] == ordered[i][0]:
            j += 1
        yield ordered[i][0], ordered[i:j]
        i = j


def _jva_event(key: TargetKey, start: float, end: float, sharers: set[str]) -> EngagementEvent:
    return EngagementEvent(
        event_id=0,
        kind=EventKind.JOINT_ATTENTION,
        t_start=start,
        t_end=end,
        participants=tuple(sorted(sharers)),
        target=key[1],
        metadata={"target_type": key[0]},
    )


# ---------------------------------------------------------------------------
# batch detector: disengagement
# ---------------------------------------------------------------------------


def detect_disengagement(
    posture_timeline: dict[str, list[tuple[PostureLabel, float, float]]],
    gaze_timeline: dict[str, list[tuple[object, float, float]]],
    cfg: FusionConfig,
) -> list[EngagementEvent]:
    """Per participant: maximal LeanOut-and-gazing-at-nothing spans >= dwell.

    Only participants present in both timelines can disengage.  The gaze
    timeline must cover gaze-at-nothing explicitly as ``None`` segments.
    """
    events: list[EngagementEvent] = []
    for pid in sorted(set(posture_timeline) & set(gaze_timeline)):
        lean_out = [
            (a, b)
            for lbl, a, b in _merge_timeline(posture_timeline[pid])
            if lbl == PostureLabel.LEAN_OUT
        ]
        none_gaze = [
            (a, b)
            for tgt, a, b in _merge_timeline(
                [(target_key(t), a, b) for t, a, b in gaze_timeline[pid]]
            )
            if tgt is None
        ]
        _check_intervals(lean_out, f"{pid} posture")
        _check_intervals(none_gaze, f"{pid} gaze")
        for a, b in _intersect(lean_out, none_gaze):
            if b - a >= cfg.disengage_dwell:
                events.append(
                    EngagementEvent(
                        event_id=0,
                        kind=EventKind.DISENGAGEMENT,
                        t_start=a,
                        t_end=b,
                        participants=(pid,),
                        target=None,
                        metadata={},
                    )
                )
    return _assign_ids(events)


def _intersect(xs: list[tuple[float, float]], ys: list[tuple[float, float]]):
    out = []
    i = j = 0
    while i < len(xs) and j < len(ys):
        a = max(xs[i][0], ys[j][0])
        b = min(xs[i][1], ys[j][1])
        if a < b:
            out.append((a, b))
        if xs[i][1] <= ys[j][1]:
            i += 1
        else:
            j += 1
    return _merge_runs(out) if out else []


# ---------------------------------------------------------------------------
# batch detector: pointing selections
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PointingObservation:
    """Minimal detection record the fusion layer needs."""

    t: float
    body_id: str
    hand: str
    selected: tuple[str, ...]


def aggregate_pointing(
    detections: list[PointingObservation],
    stroke_window: float,
) -> list[EngagementEvent]:
    """Group per-frame detections into instantaneous selection events.

    Consecutive detections for one hand merge while gaps stay within the
    stroke window and the primary (nearest-axis) object is unchanged.  Empty
    selections never produce events.
    """
    by_hand: dict[tuple[str, str], list[PointingObservation]] = {}
    for det in detections:
        if det.selected:
            by_hand.setdefault((det.body_id, det.hand), []).append(det)
    events = []
    for (body_id, hand) in sorted(by_hand):
        run: list[PointingObservation] = []
        for det in sorted(by_hand[(body_id, hand)], key=lambda d: d.t):
            if run and (det.t - run[-1].t > stroke_window or det.selected[0] != run[0].selected[0]):
                events.append(_pointing_event(body_id, hand, run, stroke_window))
                run = []
            run.append(det)
        if run:
            events.append(_pointing_event(body_id, hand, run, stroke_window))
    return _assign_ids(events)


def _pointing_event(
    body_id: str,
    hand: str,
    run: list[PointingObservation],
    stroke_window: float,
) -> EngagementEvent:
    t_mid = ((run[0].t - stroke_window) + run[-1].t) / 2.0
    return EngagementEvent(
        event_id=0,
        kind=EventKind.POINTING_SELECTION,
        t_start=t_mid,
        t_end=t_mid,
        participants=(body_id,),
        target=run[0].selected[0],
        metadata={
            "hand": hand,
            "detections": str(len(run)),
            "selected": ",".join(run[-1].selected),
        },
    )


def _assign_ids(events: list[EngagementEvent]) -> list[EngagementEvent]:
    ordered = sorted(
        events,
        key=lambda e: (e.t_start, e.t_end if e.t_end is not None else _INF, e.kind.value, e.participants, e.target or ""),
    )
    return [
        EngagementEvent(
            event_id=i,
            kind=e.kind,
            t_start=e.t_start,
            t_end=e.t_end,
            participants=e.participants,
            target=e.target,
            metadata=e.metadata,
        )
        for i, e in enumerate(ordered)
    ]


# ---------------------------------------------------------------------------
# input stabilizers
# ---------------------------------------------------------------------------


class GazeDebouncer:
    """Commit a target change only after n agreeing frames, retroactively.

    The confirmed timeline is final strictly before ``frontier()``; a pending
    candidate can still rewrite [pending_start, now].
    """

    def __init__(self, n: int):
        self.n = n
        self.change_points: list[tuple[float, TargetKey | None]] = []
        self.current: TargetKey | None = None
        self.started = False
        self.pending: tuple[TargetKey | None, float, int] | None = None
        self.last_t: float | None = None

    def feed(self, t: float, key: TargetKey | None) -> None:
        self.last_t = t
        if not self.started:
            self.started = True
            self.current = key
            self.change_points.append((t, key))
            return
        if key == self.current:
            self.pending = None
            return
        if self.pending is not None and self.pending[0] == key:
            tgt, first_t, count = self.pending
            count += 1
            if count >= self.n:
                self.current = key
                self.change_points.append((first_t, key))
                self.pending = None
            else:
                self.pending = (tgt, first_t, count)
        else:
            if self.n <= 1:
                self.current = key
                self.change_points.append((t, key))
            else:
                self.pending = (key, t, 1)

    def frontier(self) -> float:
        if self.last_t is None:
            return -_INF
        if self.pending is not None:
            return self.pending[1]
        return math.nextafter(self.last_t, _INF)

    def finalize(self, t_end: float) -> None:
        # unconfirmed candidates never change the timeline
        self.pending = None
        self.last_t = t_end

    def segments(self, t_end: float) -> list[tuple[TargetKey | None, float, float]]:
        out = []
        for (t0, key), nxt in zip(self.change_points, self.change_points[1:] + [(t_end, None)]):
            if t0 < nxt[0]:
                out.append((key, t0, nxt[0]))
        return _merge_timeline(out)


class PostureSmoother:
    """Centered sliding-window majority over raw per-frame labels.

    A smoothed sample at frame time tau uses raw samples in
    [tau - w/2, tau + w/2]; it is final once feeds pass tau + w/2.  Majority
    ties keep the previous smoothed label (first sample: lowest label index).
    """

    def __init__(self, window: float):
        self.half = window / 2.0
        self.raw: list[tuple[float, PostureLabel]] = []
        self.emitted = 0  # raw samples already smoothed
        self.change_points: list[tuple[float, PostureLabel]] = []
        self.current: PostureLabel | None = None
        self.frontier_t = -_INF

    def feed(self, t: float, label: PostureLabel) -> None:
        self.raw.append((t, label))
        self._drain(t - self.half)

    def _drain(self, upto: float) -> None:
        while self.emitted < len(self.raw) and self.raw[self.emitted][0] <= upto:
            tau = self.raw[self.emitted][0]
            self._emit(tau)
            self.emitted += 1

    def _emit(self, tau: float) -> None:
        lo, hi = tau - self.half, tau + self.half
        counts: dict[PostureLabel, int] = {}
        for t, lbl in self.raw:
            if lo <= t <= hi:
                counts[lbl] = counts.get(lbl, 0) + 1
        best = max(counts.values())
        tied = [lbl for lbl, c in counts.items() if c == best]
        if self.current in tied:
            label = self.current
        else:
            label = min(tied)
        if label != self.current:
            self.current = label
            self.change_points.append((tau, label))
        self.frontier_t = tau

    def frontier(self) -> float:
        return math.nextafter(self.frontier_t, _INF) if self.frontier_t > -_INF else -_INF

    def finalize(self, t_end: float) -> None:
        self._drain(_INF)
        self.frontier_t = max(self.frontier_t, t_end)

    def segments(self, t_end: float) -> list[tuple[PostureLabel, float, float]]:
        out = []
        pts = self.change_points
        for (t0, lbl), nxt in zip(pts, pts[1:] + [(t_end, None)]):
            if t0 < nxt[0]:
                out.append((lbl, t0, nxt[0]))
        return _merge_timeline(out)


class SpeechLatcher:
    """Latch per-speaker on/off transitions into half-open runs."""

    def __init__(self):
        self.runs: dict[str, list[list[float | None]]] = {}
        self.state: dict[str, bool] = {}

    def feed(self, t: float, speaker: str, active: bool) -> None:
        prev = self.state.get(speaker, False)
        if active and not prev:
            self.runs.setdefault(speaker, []).append([t, None])
        elif not active and prev:
            self.runs[speaker][-1][1] = t
        self.state[speaker] = active

    def finalize(self, t_end: float) -> None:
        for speaker, runs in self.runs.items():
            if runs and runs[-1][1] is None:
                runs[-1][1] = t_end
            self.state[speaker] = False

    def intervals(self) -> list[tuple[str, float, float]]:
        out = []
        for speaker in sorted(self.runs):
            for a, b in self.runs[speaker]:
                if b is not None and a < b:
                    out.append((speaker, a, b))
        return out


# ---------------------------------------------------------------------------
# incremental engine
# ---------------------------------------------------------------------------


@dataclass
class FrameInputs:
    """Per-frame derived data handed to the fusion engine."""

    speech: list[SpeechActivity] = field(default_factory=list)
    gaze: dict[str, GazeTarget] = field(default_factory=dict)
    posture: dict[str, PostureLabel] = field(default_factory=dict)
    pointing: list[PointingObservation] = field(default_factory=list)


@dataclass(frozen=True)
class EventDelta:
    action: str  # "opened" | "closed"
    event: EngagementEvent


class _DominatedMachine:
    """Online single-floor turn tracker; mirrors detect_dominated exactly."""

    def __init__(self, cfg: FusionConfig):
        self.tol = cfg.gap_tolerance
        self.threshold = cfg.dominated_threshold
        self.runs: dict[str, list[list[float | None]]] = {}
        self.floor_free = -_INF
        self.turn: dict | None = None
        self.now = -_INF

    def feed(self, t: float, speaker: str, active: bool) -> None:
        runs = self.runs.setdefault(speaker, [])
        on = bool(runs) and runs[-1][1] is None
        if active and not on:
            runs.append([t, None])
        elif not active and on:
            runs[-1][1] = t

    def _earliest_active(self, spk: str, x: float) -> tuple[float, float] | None:
        for a, b in self.runs.get(spk, []):
            end = b if b is not None else _INF
            if end > x:
                return (max(a, x), a)
        return None

    def _seek(self) -> tuple[float, float, str] | None:
        best = None
        for spk in sorted(self.runs):
            hit = self._earliest_active(spk, self.floor_free)
            if hit is None:
                continue
            t_active, a = hit
            if t_active > self.now:
                continue
            cand = (t_active, a, spk)
            if best is None or cand < best:
                best = cand
        return best

    def _holder_run_at(self, spk: str, t: float):
        for run in self.runs.get(spk, []):
            end = run[1] if run[1] is not None else _INF
            if run[0] <= t < end or run[0] == t:
                return run
        return None

    def _next_holder_run(self, spk: str, after: float):
        for run in self.runs.get(spk, []):
            if run[0] >= after:
                return run
        return None

    def _decided_cut(self, turn: dict) -> float:
        """Earliest qualifying intrusion cut decidable at the current time."""
        cut = _INF
        ts = turn["ts"]
        for spk in sorted(self.runs):
            if spk == turn["holder"]:
                continue
            for a, b in self.runs[spk]:
                end = b if b is not None else _INF
                if end <= ts:
                    continue
                o = max(a, ts)
                c = o + self.tol
                if b is None:
                    if self.now >= c:  # open run has certainly outlasted the tolerance
                        cut = min(cut, c)
                    break  # later runs of spk cut later; undecided, stop
                if b > c:
                    cut = min(cut, c)
                    break
        return cut

    def advance(self, now: float, open_cb, close_cb, force_end: bool = False) -> None:
        self.now = now
        while True:
            if self.turn is None:
                take = self._seek()
                if take is None:
                    return
                ts, _, holder = take
                run = self._holder_run_at(holder, ts)
                self.turn = {
                    "holder": holder,
                    "ts": ts,
                    "completed": 0.0,
                    "crossing": None,
                    "last_active": ts,
                    "seg_start": ts,
                    "run": run,
                    "opened": False,
                }
            turn = self.turn
            cut = self._decided_cut(turn)
            if turn["seg_start"] is not None:
                run = turn["run"]
                run_end = run[1] if run[1] is not None else _INF
                live_edge = min(now, run_end, cut)
                self._maybe_open(turn, live_edge, open_cb)
                if cut <= min(run_end, now):
                    self._end_turn(turn, cut, close_cb)
                    continue
                if run[1] is not None and run[1] <= now:
                    turn["completed"] += run[1] - turn["seg_start"]
                    turn["last_active"] = run[1]
                    turn["seg_start"] = None
                    continue
                return  # inside a live open segment
            # gap since last_active; expressions must mirror detect_dominated
            g = turn["last_active"]
            nxt = self._next_holder_run(turn["holder"], g)
            if nxt is not None:
                r = nxt[0]
                if r - g > self.tol or cut < r:
                    self._end_turn(turn, g, close_cb)
                else:
                    turn["seg_start"] = r
                    turn["run"] = nxt
                continue
            # no further run known yet: any future one starts after `now`,
            # so once now - g reaches the tolerance no bridge is possible
            if now - g >= self.tol or force_end:
                self._end_turn(turn, g, close_cb)
                continue
            return

    def _maybe_open(self, turn: dict, upto: float, open_cb) -> None:
        if turn["crossing"] is None and turn["seg_start"] is not None:
            if turn["completed"] + (upto - turn["seg_start"]) >= self.threshold:
                turn["crossing"] = turn["seg_start"] + (self.threshold - turn["completed"])
                turn["opened"] = True
                open_cb(self._event(turn, t_end=None))

    def _end_turn(self, turn: dict, te: float, close_cb) -> None:
        if turn["seg_start"] is not None:
            if turn["crossing"] is None and turn["completed"] + (te - turn["seg_start"]) >= self.threshold:
                turn["crossing"] = turn["seg_start"] + (self.threshold - turn["completed"])
            turn["completed"] += te - turn["seg_start"]
            turn["last_active"] = te
        if turn["completed"] >= self.threshold:
            close_cb(self._event(turn, t_end=te), turn["opened"])
        self.floor_free = te
        self.turn = None

    def _event(self, turn: dict, t_end: float | None) -> EngagementEvent:
        return EngagementEvent(
            event_id=-1,
            kind=EventKind.DOMINATED_DISCUSSION,
            t_start=turn["ts"],
            t_end=t_end,
            participants=(turn["holder"],),
            target=None,
            metadata={"crossed_at": repr(turn["crossing"])},
        )

    def finalize(self, t_end: float, open_cb, close_cb) -> None:
        for spk in self.runs:
            if self.runs[spk] and self.runs[spk][-1][1] is None:
                self.runs[spk][-1][1] = t_end
        self.advance(t_end, open_cb, close_cb, force_end=True)


class _SharedTargetMachine:
    """Online JVA windows over confirmed gaze change streams."""

    def __init__(self, cfg: FusionConfig):
        self.min_count = cfg.jva_min_participants
        self.min_overlap = cfg.jva_min_overlap
        self.pending: list[tuple[float, str, TargetKey | None, TargetKey | None]] = []
        self.state: dict[str, TargetKey | None] = {}
        self.active: dict[TargetKey, set[str]] = {}
        self.window: dict[TargetKey, dict] = {}
        self.cursor = -_INF

    def feed_change(self, t: float, pid: str, key: TargetKey | None) -> None:
        old = self.state.get(pid)
        if old == key and pid in self.state:
            return
        self.pending.append((t, pid, old, key))
        self.state[pid] = key

    def advance(self, frontier: float, open_cb, close_cb) -> None:
        ready = [p for p in self.pending if p[0] < frontier]
        if ready:
            self.pending = [p for p in self.pending if p[0] >= frontier]
            ready.sort(key=lambda p: (p[0], p[1]))
            i = 0
            while i < len(ready):
                j = i
                t = ready[i][0]
                while j < len(ready) and ready[j][0] == t:
                    j += 1
                self._boundary(t, ready[i:j], close_cb)
                i = j
        # live-open check at the frontier
        for key in sorted(self.window):
            win = self.window[key]
            if not win["opened"] and frontier - win["start"] >= self.min_overlap:
                win["opened"] = True
                open_cb(
                    EngagementEvent(
                        event_id=-1,
                        kind=EventKind.JOINT_ATTENTION,
                        t_start=win["start"],
                        t_end=None,
                        participants=tuple(sorted(win["sharers"])),
                        target=key[1],
                        metadata={"target_type": key[0]},
                    )
                )
        self.cursor = max(self.cursor, frontier)

    def _boundary(self, t: float, changes, close_cb) -> None:
        touched = set()
        for _, pid, old, new in changes:
            if old is not None:
                self.active.setdefault(old, set()).discard(pid)
                touched.add(old)
            if new is not None:
                self.active.setdefault(new, set()).add(pid)
                touched.add(new)
        for key in sorted(touched):
            members = self.active.get(key, set())
            win = self.window.get(key)
            if win is not None:
                if len(members) < self.min_count:
                    if t - win["start"] >= self.min_overlap:
                        close_cb(_jva_event(key, win["start"], t, win["sharers"]), win["opened"])
                    del self.window[key]
                else:
                    win["sharers"].update(members)
            elif len(members) >= self.min_count:
                self.window[key] = {"start": t, "sharers": set(members), "opened": False}

    def finalize(self, t_end: float, open_cb, close_cb) -> None:
        self.advance(math.nextafter(t_end, _INF), open_cb, close_cb)
        for key in sorted(self.window):
            win = self.window[key]
            if t_end - win["start"] >= self.min_overlap:
                close_cb(_jva_event(key, win["start"], t_end, win["sharers"]), win["opened"])
        self.window.clear()


class _ConjunctionMachine:
    """Online per-participant (LeanOut and gaze None) dwell tracker."""

    def __init__(self, cfg: FusionConfig):
        self.dwell = cfg.disengage_dwell
        self.posture: dict[str, PostureLabel] = {}
        self.gaze_none: dict[str, bool] = {}
        self.pending: dict[str, list[tuple[float, str, object]]] = {}
        self.conj: dict[str, dict] = {}  # pid -> {start, opened}
        self.cursor: dict[str, float] = {}

    def feed_posture(self, t: float, pid: str, label: PostureLabel) -> None:
        self.pending.setdefault(pid, []).append((t, "posture", label))

    def feed_gaze(self, t: float, pid: str, key: TargetKey | None) -> None:
        self.pending.setdefault(pid, []).append((t, "gaze", key is None))

    def advance(self, pid: str, frontier: float, open_cb, close_cb) -> None:
        queue = self.pending.get(pid, [])
        ready = [q for q in queue if q[0] < frontier]
        if ready:
            self.pending[pid] = [q for q in queue if q[0] >= frontier]
            for t, kind, value in sorted(ready, key=lambda q: (q[0], q[1])):
                before = self._is_conj(pid)
                if kind == "posture":
                    self.posture[pid] = value
                else:
                    self.gaze_none[pid] = value
                after = self._is_conj(pid)
                if after and not before:
                    self.conj[pid] = {"start": t, "opened": False}
                elif before and not after:
                    self._close(pid, t, close_cb)
        win = self.conj.get(pid)
        if win is not None and not win["opened"] and frontier - win["start"] >= self.dwell:
            win["opened"] = True
            open_cb(self._event(pid, win["start"], None))
        self.cursor[pid] = frontier

    def _is_conj(self, pid: str) -> bool:
        return self.posture.get(pid) == PostureLabel.LEAN_OUT and self.gaze_none.get(pid, False)

    def _close(self, pid: str, t: float, close_cb) -> None:
        win = self.conj.pop(pid)
        if t - win["start"] >= self.dwell:
            close_cb(self._event(pid, win["start"], t), win["opened"])

    def _event(self, pid: str, start: float, end: float | None) -> EngagementEvent:
        return EngagementEvent(
            event_id=-1,
            kind=EventKind.DISENGAGEMENT,
            t_start=start,
            t_end=end,
            participants=(pid,),
            target=None,
            metadata={},
        )

    def finalize(self, t_end: float, open_cb, close_cb) -> None:
        for pid in sorted(set(self.pending) | set(self.conj)):
            self.advance(pid, math.nextafter(t_end, _INF), open_cb, close_cb)
            if pid in self.conj:
                self._close(pid, t_end, close_cb)


class _PointingMachine:
    """Online pointing-episode merger matching aggregate_pointing."""

    def __init__(self, stroke_window: float):
        self.window = stroke_window
        self.episodes: dict[tuple[str, str], list[PointingObservation]] = {}

    def feed(self, det: PointingObservation, emit_cb) -> None:
        if not det.selected:
            return
        key = (det.body_id, det.hand)
        run = self.episodes.get(key)
        if run and (det.t - run[-1].t > self.window or det.selected[0] != run[0].selected[0]):
            emit_cb(_pointing_event(key[0], key[1], run, self.window))
            run = None
        if run is None:
            self.episodes[key] = [det]
        else:
            run.append(det)

    def sweep(self, now: float, emit_cb) -> None:
        for key in sorted(self.episodes):
            run = self.episodes[key]
            if run and now - run[-1].t > self.window:
                emit_cb(_pointing_event(key[0], key[1], run, self.window))
                self.episodes[key] = []

    def finalize(self, emit_cb) -> None:
        for key in sorted(self.episodes):
            run = self.episodes[key]
            if run:
                emit_cb(_pointing_event(key[0], key[1], run, self.window))
        self.episodes.clear()


class FusionEngine:
    """Incremental fusion over a strictly time-ordered frame stream.

    ``update`` ingests one frame's derived inputs and returns the event
    deltas (opened/closed) that became decidable; ``finalize`` flushes the
    stabilizer lookahead and closes everything at the session end.  The
    resulting closed events equal the batch detectors run over the recorded
    timelines, event for event.
    """

    def __init__(self, cfg: FusionConfig, stroke_window: float = 0.2):
        self.cfg = cfg
        self.stroke_window = stroke_window
        self.last_t: float | None = None
        self.speech = SpeechLatcher()
        self.dominated = _DominatedMachine(cfg)
        self.gaze: dict[str, GazeDebouncer] = {}
        self.posture: dict[str, PostureSmoother] = {}
        self.jva = _SharedTargetMachine(cfg)
        self.diseng = _ConjunctionMachine(cfg)
        self.pointing = _PointingMachine(stroke_window)
        self._next_id = 0
        self._open_ids: dict[tuple, int] = {}
        self._jva_consumed: dict[str, int] = {}
        self._diseng_gaze_consumed: dict[str, int] = {}
        self._diseng_posture_consumed: dict[str, int] = {}
        self.closed_events: list[EngagementEvent] = []

    # -- delta plumbing ----------------------------------------------------

    def _open(self, deltas: list[EventDelta]):
        def cb(event: EngagementEvent):
            ev = self._with_id(event, self._next_id)
            self._next_id += 1
            self._open_ids[id_key(ev)] = ev.event_id
            deltas.append(EventDelta("opened", ev))

        return cb

    def _close(self, deltas: list[EventDelta]):
        def cb(event: EngagementEvent, was_opened: bool):
            key = id_key(event)
            if was_opened and key in self._open_ids:
                eid = self._open_ids.pop(key)
            else:
                eid = self._next_id
                self._next_id += 1
            ev = self._with_id(event, eid)
            deltas.append(EventDelta("closed", ev))
            self.closed_events.append(ev)

        return cb

    @staticmethod
    def _with_id(event: EngagementEvent, eid: int) -> EngagementEvent:
        return EngagementEvent(
            event_id=eid,
            kind=event.kind,
            t_start=event.t_start,
            t_end=event.t_end,
            participants=event.participants,
            target=event.target,
            metadata=event.metadata,
        )

    # -- frame ingestion -----------------------------------------------------

    def update(self, t: float, inputs: FrameInputs) -> list[EventDelta]:
        if self.last_t is not None and t <= self.last_t:
            raise NonMonotoneTime(f"timestamp {t} after {self.last_t}")
        self.last_t = t
        deltas: list[EventDelta] = []
        open_cb, close_cb = self._open(deltas), self._close(deltas)

        for sa in inputs.speech:
            self.speech.feed(t, sa.speaker_id, sa.active)
            self.dominated.feed(t, sa.speaker_id, sa.active)
        for pid in sorted(inputs.gaze):
            key = target_key(inputs.gaze[pid])
            self.gaze.setdefault(pid, GazeDebouncer(self.cfg.gaze_switch_frames)).feed(t, key)
        for pid in sorted(inputs.posture):
            self.posture.setdefault(pid, PostureSmoother(self.cfg.posture_smooth)).feed(
                t, inputs.posture[pid]
            )
        pointing_cb = lambda ev: close_cb(ev, False)  # instantaneous: single closed delta
        for det in sorted(inputs.pointing, key=lambda d: (d.body_id, d.hand)):
            self.pointing.feed(det, pointing_cb)
        self.pointing.sweep(t, pointing_cb)

        self.dominated.advance(t, open_cb, close_cb)
        self._advance_jva(open_cb, close_cb)
        self._advance_diseng(open_cb, close_cb)
        return deltas

    def _advance_jva(self, open_cb, close_cb) -> None:
        if not self.gaze:
            return
        frontier = min(d.frontier() for d in self.gaze.values())
        for pid in sorted(self.gaze):
            deb = self.gaze[pid]
            consumed = self._jva_consumed.get(pid, 0)
            for t0, key in deb.change_points[consumed:]:
                self.jva.feed_change(t0, pid, key)
            self._jva_consumed[pid] = len(deb.change_points)
        self.jva.advance(frontier, open_cb, close_cb)

    def _advance_diseng(self, open_cb, close_cb) -> None:
        for pid in sorted(set(self.gaze) & set(self.posture)):
            deb, smo = self.gaze[pid], self.posture[pid]
            gc = self._diseng_gaze_consumed.get(pid, 0)
            for t0, key in deb.change_points[gc:]:
                self.diseng.feed_gaze(t0, pid, key)
            self._diseng_gaze_consumed[pid] = len(deb.change_points)
            pc = self._diseng_posture_consumed.get(pid, 0)
            for t0, lbl in smo.change_points[pc:]:
                self.diseng.feed_posture(t0, pid, lbl)
            self._diseng_posture_consumed[pid] = len(smo.change_points)
            self.diseng.advance(pid, min(deb.frontier(), smo.frontier()), open_cb, close_cb)

    def finalize(self, t_end: float | None = None) -> list[EventDelta]:
        if t_end is None:
            t_end = self.last_t if self.last_t is not None else 0.0
        deltas: list[EventDelta] = []
        open_cb, close_cb = self._open(deltas), self._close(deltas)
        pointing_cb = lambda ev: close_cb(ev, False)

        self.speech.finalize(t_end)
        for deb in self.gaze.values():
            deb.finalize(t_end)
        for smo in self.posture.values():
            smo.finalize(t_end)
        self.dominated.finalize(t_end, open_cb, close_cb)
        self._advance_jva(open_cb, close_cb)
        self.jva.finalize(t_end, open_cb, close_cb)
        for pid in sorted(set(self.gaze) & set(self.posture)):
            deb, smo = self.gaze[pid], self.posture[pid]
            gc = self._diseng_gaze_consumed.get(pid, 0)
            for t0, key in deb.change_points[gc:]:
                self.diseng.feed_gaze(t0, pid, key)
            self._diseng_gaze_consumed[pid] = len(deb.change_points)
            pc = self._diseng_posture_consumed.get(pid, 0)
            for t0, lbl in smo.change_points[pc:]:
                self.diseng.feed_posture(t0, pid, lbl)
            self._diseng_posture_consumed[pid] = len(smo.change_points)
        self.diseng.finalize(t_end, open_cb, close_cb)
        self.pointing.finalize(pointing_cb)
        return deltas

    # -- recorded timelines (for batch comparison and inspection) ----------

    def gaze_timelines(self, t_end: float) -> dict[str, list[tuple[TargetKey | None, float, float]]]:
        return {pid: deb.segments(t_end) for pid, deb in self.gaze.items()}

    def posture_timelines(self, t_end: float) -> dict[str, list[tuple[PostureLabel, float, float]]]:
        return {pid: smo.segments(t_end) for pid, smo in self.posture.items()}

    def speech_intervals(self) -> list[tuple[str, float, float]]:
        return self.speech.intervals()


def id_key(event: EngagementEvent) -> tuple:
    return (event.kind, event.participants, event.target, event.t_start)
