"""Independent oracles and generators shared by the unit and acceptance tests.

Everything here deliberately avoids the engine's own algorithms: the
dominated-discussion oracle is a tick-stepped scan, the geometry oracle
samples boxes on a dense grid, and the gradient oracle uses central finite
differences.
"""

from __future__ import annotations

import math

import numpy as np

from groupsense.core import SpeechActivity, TaskObject
from groupsense.fusion import FrameInputs, PointingObservation
from groupsense.geometry import Cone, point_in_cone
from groupsense.posture import MlpModel, PostureLabel, batch_loss


# ---------------------------------------------------------------------------
# dominated-discussion scan oracle (10 ms ticks)
# ---------------------------------------------------------------------------


def scan_dominated(
    intervals: list[tuple[str, float, float]],
    threshold: float = 30.0,
    tol: float = 2.0,
    tick: float = 0.01,
) -> list[tuple[str, float, float, float]]:
    """Brute-force tick scan; returns (speaker, t_start, t_end, crossing).

    Interval endpoints must sit on the tick grid.  The scan walks 10 ms
    steps, maintains the single-floor state, and when a turn ends
    retroactively it rewinds to the turn end and rescans.  Accumulated
    speech inside a finished turn is measured exactly in ticks.
    """
    th_ticks = int(round(threshold / tick))
    tol_ticks = int(round(tol / tick))
    runs: dict[str, list[tuple[int, int]]] = {}
    for spk, a, b in intervals:
        ai, bi = int(round(a / tick)), int(round(b / tick))
        assert abs(ai * tick - a) < 1e-9 and abs(bi * tick - b) < 1e-9, "off-grid endpoint"
        runs.setdefault(spk, []).append((ai, bi))
    for spk in runs:
        merged: list[list[int]] = []
        for a, b in sorted(runs[spk]):
            if merged and a <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], b)
            else:
                merged.append([a, b])
        runs[spk] = [(a, b) for a, b in merged]
    speakers = sorted(runs)
    if not speakers:
        return []

    def run_at(spk: str, step: int):
        for a, b in runs[spk]:
            if a <= step < b:
                return (a, b)
        return None

    def measure(spk: str, lo: int, hi: int) -> int:
        return sum(max(0, min(b, hi) - max(a, lo)) for a, b in runs[spk])

    def crossing_tick(spk: str, lo: int, hi: int) -> int | None:
        cum = 0
        for a, b in runs[spk]:
            s, e = max(a, lo), min(b, hi)
            if e <= s:
                continue
            if cum + (e - s) >= th_ticks:
                return s + (th_ticks - cum)
            cum += e - s
        return None

    first = min(a for rs in runs.values() for a, _ in rs)
    last = max(b for rs in runs.values() for _, b in rs)
    events: list[tuple[str, float, float, float]] = []

    k = first
    holder: str | None = None
    ts = last_active = 0

    # tick-to-seconds conversion divides by an exact integer, so grid-aligned
    # dyadic times come back bit-identical to the interval detector's floats
    inv = round(1 / tick)

    def to_time(step: int) -> float:
        return step / inv

    def end_turn(te: int) -> int:
        nonlocal holder
        acc = measure(holder, ts, te)
        if acc >= th_ticks:
            cx = crossing_tick(holder, ts, te)
            events.append((holder, to_time(ts), to_time(te), to_time(cx)))
        holder = None
        return te

    while k <= last + tol_ticks + 2:
        if holder is None:
            if k > last:
                break
            actives = [s for s in speakers if run_at(s, k)]
            if not actives:
                k += 1
                continue
            holder = min(actives, key=lambda s: (run_at(s, k)[0], s))
            ts = k
            last_active = k
        # end checks at time k, based on steps before k
        te = None
        if k - last_active > tol_ticks:
            te = last_active
        else:
            cuts = []
            for s in speakers:
                if s == holder:
                    continue
                r = run_at(s, k - 1)
                if r is None:
                    continue
                o = max(r[0], ts)
                if k - o > tol_ticks:
                    cuts.append(o + tol_ticks)
            if cuts:
                te = min(last_active, min(cuts))
        if te is not None:
            k = end_turn(te)
            continue
        if run_at(holder, k):
            last_active = k + 1
        k += 1
    if holder is not None:
        end_turn(last_active)
    return events


# ---------------------------------------------------------------------------
# geometry sampling oracle
# ---------------------------------------------------------------------------


def aabb_grid_hits_cone(cone: Cone, obj: TaskObject, n: int = 20) -> bool:
    """True iff any point of an n^3 grid over the box lies inside the cone."""
    lo, hi = obj.aabb_min, obj.aabb_max
    xs = np.linspace(lo[0], hi[0], n)
    ys = np.linspace(lo[1], hi[1], n)
    zs = np.linspace(lo[2], hi[2], n)
    pts = np.stack(np.meshgrid(xs, ys, zs, indexing="ij"), axis=-1).reshape(-1, 3)
    v = pts - cone.apex
    t = v @ cone.axis
    radial = np.linalg.norm(v - t[:, None] * cone.axis, axis=1)
    inside = (t >= 0.0) & (t <= cone.range) & (np.arctan2(radial, t) <= cone.half_angle)
    return bool(inside.any())


def sphere_surface_hits_cone(cone: Cone, center, radius: float, n: int = 4000) -> bool:
    """Sampling check of a sphere (center + surface shells) against the cone."""
    if point_in_cone(cone, center):
        return True
    rng = np.random.default_rng(12345)
    dirs = rng.normal(size=(n, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    for frac in (1.0, 0.5, 0.25):
        pts = np.asarray(center) + frac * radius * dirs
        if any(point_in_cone(cone, p) for p in pts):
            return True
    return False


def random_cone_and_box(rng: np.random.Generator) -> tuple[Cone, TaskObject]:
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    cone = Cone(
        apex=rng.uniform(-1, 1, size=3),
        axis=axis,
        half_angle=rng.uniform(math.radians(3), math.radians(40)),
        range=rng.uniform(0.5, 3.0),
    )
    center = cone.apex + rng.uniform(-0.5, 2.5) * axis + rng.normal(scale=0.6, size=3)
    half = rng.uniform(0.02, 0.5, size=3)
    return cone, TaskObject(
        object_id="probe", label="probe", aabb_min=center - half, aabb_max=center + half
    )


# ---------------------------------------------------------------------------
# gradient oracle
# ---------------------------------------------------------------------------


def finite_difference_grad(
    model: MlpModel,
    batch: list[tuple[np.ndarray, int]],
    name: str,
    index: tuple,
    h: float = 1e-5,
) -> float:
    """Central finite difference of the mean cross-entropy wrt one parameter."""
    X = np.array([f for f, _ in batch])
    y = np.array([lbl for _, lbl in batch])

    def loss_with(delta: float) -> float:
        params = {
            "W1": model.W1.copy(),
            "b1": model.b1.copy(),
            "W2": model.W2.copy(),
            "b2": model.b2.copy(),
        }
        params[name][index] += delta
        return batch_loss(MlpModel(**params), X, y)

    return (loss_with(h) - loss_with(-h)) / (2.0 * h)


# ---------------------------------------------------------------------------
# random session generators
# ---------------------------------------------------------------------------


def random_speech_session(
    rng: np.random.Generator,
    grid: float = 0.25,
    duration: float = 60.0,
) -> list[tuple[str, float, float]]:
    """Per-speaker non-overlapping intervals with endpoints on a dyadic grid.

    A quarter-second grid keeps every derived time exactly representable, so
    the interval detector and the 10 ms scan oracle can be compared for
    float equality.
    """
    intervals = []
    n_ticks = int(duration / grid)
    for spk in ["A", "B", "C"][: int(rng.integers(1, 4))]:
        t = int(rng.integers(0, 20))
        while t < n_ticks - 2:
            length = int(rng.integers(1, 160))
            end = min(t + length, n_ticks)
            intervals.append((spk, t * grid, end * grid))
            t = end + int(rng.integers(1, 40))
    return intervals


def random_frame_session(rng: np.random.Generator):
    """A per-frame input stream exercising all four detectors.

    Returns (timestamps, list[FrameInputs], detections) where detections is
    the flat pointing-observation list for the batch aggregator.
    """
    participants = ["P1", "P2", "P3"]
    objects = ["o1", "o2"]
    duration = float(rng.integers(30, 60))
    fps = 30.0
    n = int(duration * fps) + 1

    gaze_state = {p: None for p in participants}
    gaze_switch = {p: 0.0 for p in participants}
    posture_state = {p: PostureLabel.NEUTRAL for p in participants}
    posture_switch = {p: 0.0 for p in participants}
    speech_state = {p: False for p in participants}
    speech_switch = {p: 0.0 for p in participants}
    point_until = {p: -1.0 for p in participants}
    point_target = {p: "o1" for p in participants}
    point_next = {p: float(rng.uniform(0, 20)) for p in participants}

    frames = []
    timestamps = []
    detections: list[PointingObservation] = []
    gaze_pool = [None, *[("object", o) for o in objects]] + [
        ("participant", q) for q in participants
    ]
    for k in range(n):
        t = k / fps
        inp = FrameInputs()
        for p in participants:
            if t >= gaze_switch[p]:
                gaze_state[p] = gaze_pool[rng.integers(0, len(gaze_pool))]
                if gaze_state[p] == ("participant", p):
                    gaze_state[p] = None
                gaze_switch[p] = t + float(rng.uniform(0.3, 6.0))
            if t >= posture_switch[p]:
                posture_state[p] = PostureLabel(int(rng.integers(0, 3)))
                posture_switch[p] = t + float(rng.uniform(0.8, 20.0))
            if t >= speech_switch[p]:
                speech_state[p] = not speech_state[p]
                speech_switch[p] = t + float(rng.uniform(1.0, 40.0))
                inp.speech.append(SpeechActivity(p, speech_state[p]))
            if t >= point_next[p]:
                point_until[p] = t + float(rng.uniform(0.3, 2.0))
                point_target[p] = objects[rng.integers(0, len(objects))]
                point_next[p] = point_until[p] + float(rng.uniform(1.0, 15.0))
            if t < point_until[p]:
                det = PointingObservation(
                    t=t, body_id=p, hand="R", selected=(point_target[p],)
                )
                inp.pointing.append(det)
                detections.append(det)
            inp.gaze[p] = gaze_state[p]
            inp.posture[p] = posture_state[p]
        frames.append(inp)
        timestamps.append(t)
    return timestamps, frames, detections
