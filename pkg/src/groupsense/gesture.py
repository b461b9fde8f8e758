"""Two-stage pointing detection over hand-landmark tracks.

Stage 1 (``detect_stroke``) gates on the track window: the index tip must be
近 stationary and the index extended for the whole window.  Stage 2
(``classify_shape``) checks the hand's shape on the latest sample.  Only when
both pass is the pointing frustum built and intersected with the registry.
Stage 2 is never evaluated when stage 1 fails; tests pin that ordering.

Both stages are deterministic geometric criteria with configurable
thresholds, structured so a learned classifier could replace either stage
behind the same interface.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .config import GestureConfig
from .core import Hand, HandLandmarkId as L, HandLandmarks, ObjectRegistry
from .errors import DegenerateDigit, InsufficientWindow
from .geometry import Cone, select_objects

# Absorbs float error in span arithmetic (frame times are rarely exact
# multiples of the window).
SPAN_EPS = 1e-9

# Wrist-to-tip joint chains per finger, ordered proximal to distal.
FINGER_CHAINS: dict[str, tuple[L, L, L, L, L]] = {
    "thumb": (L.WRIST, L.THUMB_CMC, L.THUMB_MCP, L.THUMB_IP, L.THUMB_TIP),
    "index": (L.WRIST, L.INDEX_MCP, L.INDEX_PIP, L.INDEX_DIP, L.INDEX_TIP),
    "middle": (L.WRIST, L.MIDDLE_MCP, L.MIDDLE_PIP, L.MIDDLE_DIP, L.MIDDLE_TIP),
    "ring": (L.WRIST, L.RING_MCP, L.RING_PIP, L.RING_DIP, L.RING_TIP),
    "pinky": (L.WRIST, L.PINKY_MCP, L.PINKY_PIP, L.PINKY_DIP, L.PINKY_TIP),
}


class GestureShape(Enum):
    POINT = "point"
    OTHER = "other"


@dataclass(frozen=True)
class HandTrackWindow:
    """Time-ordered (timestamp, landmarks) samples for one (body, side)."""

    body_id: str
    hand: Hand
    samples: tuple[tuple[float, HandLandmarks], ...]

    def span(self) -> float:
        if len(self.samples) < 2:
            return 0.0
        return self.samples[-1][0] - self.samples[0][0]

    def last(self) -> HandLandmarks:
        return self.samples[-1][1]

    def last_t(self) -> float:
        return self.samples[-1][0]


@dataclass(frozen=True)
class PointingDetection:
    body_id: str
    hand: Hand
    frustum: Cone
    selected: tuple[str, ...]
    t: float


def extension_ratio(landmarks: HandLandmarks, finger: str = "index") -> float:
    """Straight-line wrist-to-tip length over the summed chain length.

    1.0 for a perfectly straight chain, smaller the more the finger curls.
    """
    chain = FINGER_CHAINS[finger]
    pts = [landmarks.point(j) for j in chain]
    segment_sum = sum(float(np.linalg.norm(b - a)) for a, b in zip(pts, pts[1:]))
    if segment_sum <= 1e-9:
        return 0.0
    return float(np.linalg.norm(pts[-1] - pts[0])) / segment_sum


def detect_stroke(window: HandTrackWindow, cfg: GestureConfig) -> bool:
    """Stage 1: is the hand holding a stroke pose?

    True iff over the window the index tip's mean speed (path length over
    elapsed time) stays at or below ``max_stroke_speed`` and the mean index
    extension ratio is at least ``min_extension``.
    """
    span = window.span()
    if span < cfg.stroke_window - SPAN_EPS:
        raise InsufficientWindow(
            f"window spans {span:.3f}s < {cfg.stroke_window:.3f}s"
        )
    tips = np.array([s.point(L.INDEX_TIP) for _, s in window.samples])
    path = float(np.sum(np.linalg.norm(np.diff(tips, axis=0), axis=1)))
    mean_speed = path / span
    if mean_speed > cfg.max_stroke_speed:
        return False
    mean_ext = float(np.mean([extension_ratio(s, "index") for _, s in window.samples]))
    return mean_ext >= cfg.min_extension


def classify_shape(landmarks: HandLandmarks, cfg: GestureConfig) -> GestureShape:
    """Stage 2: Point iff the index is extended and every other finger curled."""
    if extension_ratio(landmarks, "index") < cfg.min_extension:
        return GestureShape.OTHER
    for finger in ("thumb", "middle", "ring", "pinky"):
        if extension_ratio(landmarks, finger) > cfg.max_curl:
            return GestureShape.OTHER
    return GestureShape.POINT


def pointing_frustum(landmarks: HandLandmarks, cfg: GestureConfig) -> Cone:
    """Truncated cone from the index tip along the extended digit."""
    tip = landmarks.point(L.INDEX_TIP)
    mcp = landmarks.point(L.INDEX_MCP)
    d = tip - mcp
    n = float(np.linalg.norm(d))
    if n < 1e-6:
        raise DegenerateDigit("index tip coincides with index MCP")
    return Cone(apex=tip, axis=d / n, half_angle=cfg.half_angle, range=cfg.range)


def detect_pointing(
    window: HandTrackWindow,
    registry: ObjectRegistry,
    cfg: GestureConfig,
) -> PointingDetection | None:
    """Full two-stage pipeline on one window; None when either stage fails."""
    if not detect_stroke(window, cfg):
        return None
    last = window.last()
    if classify_shape(last, cfg) is not GestureShape.POINT:
        return None
    frustum = pointing_frustum(last, cfg)
    return PointingDetection(
        body_id=window.body_id,
        hand=window.hand,
        frustum=frustum,
        selected=tuple(select_objects(frustum, registry)),
        t=window.last_t(),
    )
