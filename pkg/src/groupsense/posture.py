"""Seat assignment and per-seat lean classification.

Seats follow the pelvis x order (left to right in the capture frame), with a
hysteresis band so bodies shuffling in place do not swap seats.  Features are
the 32 per-joint 7-vectors (pelvis-centered position + raw quaternion)
concatenated into one 224-vector.  Each seat gets its own two-layer
feedforward classifier over {lean-in, neutral, lean-out}, trained from
scratch by plain gradient descent on mean cross-entropy.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum, IntEnum

import numpy as np

from .config import PostureConfig
from .core import JOINT_COUNT, Body, JointId
from .errors import DuplicateBodyId, EmptyBatch, MissingSeatModel, ParseError, TooManyBodies

FEATURE_DIM = JOINT_COUNT * 7  # 224
N_CLASSES = 3
MODEL_MAGIC = b"EFMLP1"


class Seat(str, Enum):
    LEFT = "left"
    MIDDLE = "middle"
    RIGHT = "right"


class PostureLabel(IntEnum):
    # index order is the deterministic tie-break order
    LEAN_IN = 0
    NEUTRAL = 1
    LEAN_OUT = 2


@dataclass(frozen=True)
class SeatAssignment:
    """Injective body -> seat map, with the pelvis x values it was built from.

    The stored x values anchor the hysteresis test: the assignment is reused
    while every body stays within the hysteresis band of its anchor.
    """

    seats: dict[str, Seat]
    pelvis_x: dict[str, float]


def assign_seats(
    bodies: list[Body],
    prev: SeatAssignment | None,
    cfg: PostureConfig,
) -> SeatAssignment:
    """Sort 1-3 bodies by pelvis x into left/middle/right seats.

    Two bodies take left/right, a single body takes middle.  With a previous
    assignment over the same bodies, it is returned unchanged while every
    pelvis stays within ``cfg.hysteresis`` of its anchored x value.
    """
    if len(bodies) > 3:
        raise TooManyBodies(f"{len(bodies)} bodies cannot be seated")
    ids = [b.body_id for b in bodies]
    if len(set(ids)) != len(ids):
        raise DuplicateBodyId("duplicate body id in frame")
    xs = {b.body_id: b.pelvis_x() for b in bodies}
    if prev is not None and set(prev.seats) == set(ids):
        if all(abs(xs[i] - prev.pelvis_x[i]) < cfg.hysteresis for i in ids):
            return prev
    ordered = sorted(bodies, key=lambda b: (b.pelvis_x(), b.body_id))
    if len(ordered) == 1:
        layout = [Seat.MIDDLE]
    elif len(ordered) == 2:
        layout = [Seat.LEFT, Seat.RIGHT]
    else:
        layout = [Seat.LEFT, Seat.MIDDLE, Seat.RIGHT]
    seats = {b.body_id: seat for b, seat in zip(ordered, layout)}
    return SeatAssignment(seats=seats, pelvis_x=xs)


def flatten_features(body: Body) -> np.ndarray:
    """224-vector: per joint, pelvis-centered position then (w,x,y,z) quat."""
    out = np.array(body.joints, dtype=np.float64)
    out[:, :3] -= body.position(JointId.PELVIS)
    return out.reshape(-1)


@dataclass
class MlpModel:
    """Two-layer relu/softmax classifier parameters for one seat."""

    W1: np.ndarray  # (hidden, FEATURE_DIM)
    b1: np.ndarray  # (hidden,)
    W2: np.ndarray  # (N_CLASSES, hidden)
    b2: np.ndarray  # (N_CLASSES,)

    def __post_init__(self):
        hidden = self.W1.shape[0]
        assert self.W1.shape == (hidden, FEATURE_DIM)
        assert self.b1.shape == (hidden,)
        assert self.W2.shape == (N_CLASSES, hidden)
        assert self.b2.shape == (N_CLASSES,)


@dataclass(frozen=True)
class SeatModels:
    models: dict[Seat, MlpModel]

    def __post_init__(self):
        missing = [s for s in Seat if s not in self.models]
        if missing:
            raise MissingSeatModel(f"missing models for {[s.value for s in missing]}")


def init_model(seed: int, hidden: int = 64) -> MlpModel:
    """Seeded uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] per layer."""
    rng = np.random.default_rng(seed)
    s1 = 1.0 / np.sqrt(FEATURE_DIM)
    s2 = 1.0 / np.sqrt(hidden)
    return MlpModel(
        W1=rng.uniform(-s1, s1, size=(hidden, FEATURE_DIM)),
        b1=rng.uniform(-s1, s1, size=hidden),
        W2=rng.uniform(-s2, s2, size=(N_CLASSES, hidden)),
        b2=rng.uniform(-s2, s2, size=N_CLASSES),
    )


def zero_model(hidden: int = 64) -> MlpModel:
    return MlpModel(
        W1=np.zeros((hidden, FEATURE_DIM)),
        b1=np.zeros(hidden),
        W2=np.zeros((N_CLASSES, hidden)),
        b2=np.zeros(N_CLASSES),
    )


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def mlp_forward(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """Class probabilities: softmax(W2 relu(W1 x + b1) + b2)."""
    h = np.maximum(model.W1 @ x + model.b1, 0.0)
    return _softmax(model.W2 @ h + model.b2)


def _forward_batch(model: MlpModel, X: np.ndarray):
    Z1 = X @ model.W1.T + model.b1  # (n, hidden)
    H = np.maximum(Z1, 0.0)
    P = _softmax(H @ model.W2.T + model.b2)  # (n, classes)
    return Z1, H, P


def batch_loss(model: MlpModel, X: np.ndarray, y: np.ndarray) -> float:
    """Mean cross-entropy of the model on (X, y)."""
    _, _, P = _forward_batch(model, X)
    return float(-np.mean(np.log(P[np.arange(len(y)), y])))


def mlp_train_step(
    model: MlpModel,
    batch: list[tuple[np.ndarray, int]],
    lr: float,
) -> tuple[MlpModel, float]:
    """One vanilla gradient-descent step on mean cross-entropy.

    Returns the updated parameters and the loss *before* the step, so lr=0
    reports the current loss and changes nothing.  Gradients come from
    backpropagation through relu and softmax.
    """
    if not batch:
        raise EmptyBatch("training batch is empty")
    if lr < 0:
        raise ValueError("learning rate must be non-negative")
    X = np.array([f for f, _ in batch], dtype=np.float64)
    y = np.array([int(lbl) for _, lbl in batch], dtype=np.intp)
    n = len(batch)

    Z1, H, P = _forward_batch(model, X)
    loss = float(-np.mean(np.log(P[np.arange(n), y])))

    dlogits = P.copy()
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n
    dW2 = dlogits.T @ H
    db2 = dlogits.sum(axis=0)
    dH = dlogits @ model.W2
    dZ1 = np.where(Z1 > 0.0, dH, 0.0)
    dW1 = dZ1.T @ X
    db1 = dZ1.sum(axis=0)

    stepped = MlpModel(
        W1=model.W1 - lr * dW1,
        b1=model.b1 - lr * db1,
        W2=model.W2 - lr * dW2,
        b2=model.b2 - lr * db2,
    )
    return stepped, loss


def train(
    model: MlpModel,
    samples: list[tuple[np.ndarray, int]],
    steps: int,
    lr: float,
) -> tuple[MlpModel, list[float]]:
    """Full-batch gradient descent for ``steps`` steps; returns loss history."""
    history = []
    for _ in range(steps):
        model, loss = mlp_train_step(model, samples, lr)
        history.append(loss)
    return model, history


def accuracy(model: MlpModel, samples: list[tuple[np.ndarray, int]]) -> float:
    X = np.array([f for f, _ in samples])
    y = np.array([int(lbl) for _, lbl in samples])
    _, _, P = _forward_batch(model, X)
    return float(np.mean(P.argmax(axis=1) == y))


def classify_posture(
    models: SeatModels,
    seat: Seat,
    body: Body,
) -> tuple[PostureLabel, float]:
    """Argmax class with its probability; ties break in label-index order."""
    model = models.models.get(seat)
    if model is None:
        raise MissingSeatModel(f"no model for seat {seat.value}")
    probs = mlp_forward(model, flatten_features(body))
    idx = int(np.argmax(probs))  # argmax returns the first max: label order
    return PostureLabel(idx), float(probs[idx])


def save_model(model: MlpModel, path) -> None:
    """Binary format: magic, shape header, then row-major float64 params."""
    hidden = model.W1.shape[0]
    header = struct.pack("<6sIII", MODEL_MAGIC, FEATURE_DIM, hidden, N_CLASSES)
    with open(path, "wb") as fh:
        fh.write(header)
        for arr in (model.W1, model.b1, model.W2, model.b2):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_model(path) -> MlpModel:
    with open(path, "rb") as fh:
        blob = fh.read()
    head_size = struct.calcsize("<6sIII")
    if len(blob) < head_size:
        raise ParseError(f"{path}: truncated model file")
    magic, in_dim, hidden, classes = struct.unpack("<6sIII", blob[:head_size])
    if magic != MODEL_MAGIC:
        raise ParseError(f"{path}: bad magic {magic!r}")
    if in_dim != FEATURE_DIM or classes != N_CLASSES:
        raise ParseError(f"{path}: unexpected shape ({in_dim}, {hidden}, {classes})")
    counts = [hidden * in_dim, hidden, classes * hidden, classes]
    expected = head_size + 8 * sum(counts)
    if len(blob) != expected:
        raise ParseError(f"{path}: expected {expected} bytes, got {len(blob)}")
    offset = head_size
    arrays = []
    for count in counts:
        arrays.append(np.frombuffer(blob, dtype="<f8", count=count, offset=offset).copy())
        offset += 8 * count
    return MlpModel(
        W1=arrays[0].reshape(hidden, in_dim),
        b1=arrays[1],
        W2=arrays[2].reshape(classes, hidden),
        b2=arrays[3],
    )
