"""Hand-built fixture helpers, independent of the engine's own generators."""

from __future__ import annotations

import numpy as np

from groupsense.core import Body, Hand, HandLandmarkId as L, HandLandmarks, JointId


def make_body(body_id: str = "b0", **named_positions) -> Body:
    """32 identity-quaternion joints; set positions by JointId name."""
    joints = np.zeros((32, 7))
    joints[:, 3] = 1.0
    for name, pos in named_positions.items():
        joints[JointId[name], :3] = pos
    return Body(body_id=body_id, joints=joints)


def head_body(body_id: str, ear_left, ear_right, nose, pelvis=(0, 0, 0)) -> Body:
    return make_body(
        body_id,
        PELVIS=pelvis,
        EAR_LEFT=ear_left,
        EAR_RIGHT=ear_right,
        NOSE=nose,
    )


_FINGERS = {
    "thumb": (L.THUMB_CMC, L.THUMB_MCP, L.THUMB_IP, L.THUMB_TIP),
    "index": (L.INDEX_MCP, L.INDEX_PIP, L.INDEX_DIP, L.INDEX_TIP),
    "middle": (L.MIDDLE_MCP, L.MIDDLE_PIP, L.MIDDLE_DIP, L.MIDDLE_TIP),
    "ring": (L.RING_MCP, L.RING_PIP, L.RING_DIP, L.RING_TIP),
    "pinky": (L.PINKY_MCP, L.PINKY_PIP, L.PINKY_DIP, L.PINKY_TIP),
}
# dyadic segment lengths so collinear chains give ratio exactly 1.0
_SEGMENTS = (0.125, 0.0625, 0.03125, 0.03125)


def build_hand(
    wrist=(0.0, 0.0, 0.0),
    direction=(0.0, 0.0, 1.0),
    extended=("index",),
    body_id: str = "b0",
    hand: Hand = Hand.RIGHT,
) -> HandLandmarks:
    """Synthetic hand: named fingers run straight along ``direction``, the
    rest fold back toward the wrist (ratio well under 0.75)."""
    wrist = np.asarray(wrist, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    d = d / np.linalg.norm(d)
    side = np.cross(d, [0.0, 1.0, 0.0])
    if np.linalg.norm(side) < 1e-9:
        side = np.cross(d, [1.0, 0.0, 0.0])
    side = side / np.linalg.norm(side)

    pts = np.zeros((21, 3))
    pts[L.WRIST] = wrist
    for k, (name, chain) in enumerate(_FINGERS.items()):
        lateral = 0.018 * (k - 2) * side
        if name in extended:
            cursor = wrist + lateral
            for seg, lm in zip(_SEGMENTS, chain):
                cursor = cursor + seg * d
                pts[lm] = cursor
        else:
            base = wrist + 0.1 * d + lateral
            pts[chain[0]] = base
            pts[chain[1]] = base + 0.03 * d
            pts[chain[2]] = base + 0.01 * d - 0.03 * side * 0.0 - 0.03 * np.array([0, 1, 0])
            pts[chain[3]] = base - 0.02 * d - 0.04 * np.array([0, 1, 0])
    return HandLandmarks(body_id=body_id, hand=hand, points=pts)


def point_hand(wrist=(0, 0, 0), direction=(0, 0, 1), body_id="b0") -> HandLandmarks:
    return build_hand(wrist, direction, extended=("index",), body_id=body_id)


def open_palm_hand(wrist=(0, 0, 0), direction=(0, 0, 1)) -> HandLandmarks:
    return build_hand(wrist, direction, extended=tuple(_FINGERS))


def fist_hand(wrist=(0, 0, 0), direction=(0, 0, 1)) -> HandLandmarks:
    return build_hand(wrist, direction, extended=())
