"""Command-line interface.

Exit codes: 0 success, 1 input error (bad files, bad arguments, missing
models), 2 internal invariant failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import traceback
from pathlib import Path

import numpy as np

from .config import EngineConfig, load_config
from .core import validate_frame
from .errors import EngineError, NonMonotoneTime, ParseError
from .posture import Seat, accuracy, assign_seats, flatten_features, init_model, save_model, train
from .replay import (
    SessionPaths,
    parse_frame_line,
    read_frames,
    run_replay,
    write_events,
    write_frames,
)
from .simulator import SCENARIOS, build_scenario


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits 2; usage errors are input errors
        self.print_usage(sys.stderr)
        raise EngineError(message)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="groupsense", description="Multimodal group-interaction analytics")
    sub = parser.add_subparsers(dest="command", required=True)

    replay = sub.add_parser("replay", help="replay a session file through the engine")
    replay.add_argument("--frames", required=True, type=Path)
    replay.add_argument("--objects", required=True, type=Path)
    replay.add_argument("--config", type=Path)
    replay.add_argument("--models", type=Path, help="directory with left/middle/right seat models")
    replay.add_argument("--out", required=True, type=Path)

    simulate = sub.add_parser("simulate", help="generate a synthetic session plus ground truth")
    simulate.add_argument("--scenario", required=True, choices=sorted(SCENARIOS))
    simulate.add_argument("--seed", required=True, type=int)
    simulate.add_argument("--out-frames", required=True, type=Path)
    simulate.add_argument("--out-truth", required=True, type=Path)
    simulate.add_argument("--out-labels", type=Path, help="also write per-frame posture labels")

    trainp = sub.add_parser("train-posture", help="train one seat's posture classifier")
    trainp.add_argument("--frames", required=True, type=Path)
    trainp.add_argument("--labels", required=True, type=Path)
    trainp.add_argument("--seat", required=True, choices=[s.value for s in Seat])
    trainp.add_argument("--epochs", required=True, type=int)
    trainp.add_argument("--lr", required=True, type=float)
    trainp.add_argument("--seed", required=True, type=int)
    trainp.add_argument("--out", required=True, type=Path)

    check = sub.add_parser("check", help="validate a frames file")
    check.add_argument("--frames", required=True, type=Path)
    return parser


def _cmd_replay(args) -> int:
    summary = run_replay(
        SessionPaths(
            frames=args.frames,
            objects=args.objects,
            out=args.out,
            config=args.config,
            models=args.models,
        )
    )
    print(
        f"frames={summary.frames_read} processed={summary.processed} "
        f"rejected={summary.rejected} violations={summary.violations}"
    )
    for kind in sorted(summary.events_by_kind):
        print(f"events[{kind}]={summary.events_by_kind[kind]}")
    return 0


def _cmd_simulate(args) -> int:
    script = SCENARIOS[args.scenario](args.seed)
    frames, truth = build_scenario(script)
    write_frames(frames, args.out_frames)
    write_events(truth, args.out_truth)
    if args.out_labels:
        _write_labels(script, frames, args.out_labels)
    print(f"frames={len(frames)} truth_events={len(truth)}")
    return 0


def _write_labels(script, frames, path) -> None:
    from .posture import PostureLabel
    from .simulator import Lean, _active

    with open(path, "w", encoding="utf-8") as fh:
        for frame in frames:
            for body in frame.bodies:
                directive = _active(script.directives, Lean, body.body_id, frame.timestamp)
                label = directive.lean if directive else PostureLabel.NEUTRAL
                fh.write(
                    json.dumps(
                        {"t": frame.timestamp, "body": body.body_id, "label": label.name.lower()},
                        separators=(",", ":"),
                    )
                    + "\n"
                )


def _cmd_train_posture(args) -> int:
    from .posture import PostureLabel

    label_by_key: dict[tuple[float, str], PostureLabel] = {}
    with open(args.labels, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                label = PostureLabel[rec["label"].upper()]
                label_by_key[(float(rec["t"]), str(rec["body"]))] = label
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise ParseError(f"{args.labels}:{lineno}: bad label record ({exc})")

    target_seat = Seat(args.seat)
    samples = []
    prev = None
    cfg = EngineConfig()
    for frame in read_frames(args.frames):
        bodies = sorted(frame.bodies, key=lambda b: b.body_id)
        if not bodies:
            continue
        prev = assign_seats(bodies, prev, cfg.posture)
        for body in bodies:
            if prev.seats[body.body_id] is not target_seat:
                continue
            label = label_by_key.get((frame.timestamp, body.body_id))
            if label is not None:
                samples.append((flatten_features(body), int(label)))
    if not samples:
        raise EngineError(f"no labeled samples for seat {target_seat.value}")

    model = init_model(args.seed)
    model, history = train(model, samples, steps=args.epochs, lr=args.lr)
    save_model(model, args.out)
    print(
        f"seat={target_seat.value} samples={len(samples)} steps={args.epochs} "
        f"loss={history[-1]:.6f} accuracy={accuracy(model, samples):.4f}"
    )
    return 0


def _cmd_check(args) -> int:
    problems = 0
    last_t = None
    frames = 0
    with open(args.frames, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            frame = parse_frame_line(line, lineno)
            frames += 1
            if last_t is not None and frame.timestamp <= last_t:
                raise NonMonotoneTime(f"line {lineno}: timestamp {frame.timestamp} after {last_t}")
            last_t = frame.timestamp
            for v in validate_frame(frame):
                problems += 1
                print(f"line {lineno}: {v.kind.value} [{v.subject}] {v.detail}")
    print(f"frames={frames} violations={problems}")
    if problems:
        raise EngineError(f"{problems} violations found")
    return 0


_COMMANDS = {
    "replay": _cmd_replay,
    "simulate": _cmd_simulate,
    "train-posture": _cmd_train_posture,
    "check": _cmd_check,
}


def main(argv=None) -> int:
    try:
        parser = _build_parser()
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
