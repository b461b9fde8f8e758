"""Engine configuration: per-stage dataclasses plus the flat key=value file.

Angles are radians internally; the config file carries degrees (``*_deg``
keys) because that is what people tune.  ``range_m`` feeds both the gaze cone
and the pointing frustum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .errors import ParseError


@dataclass(frozen=True)
class GazeConfig:
    half_angle: float = math.radians(10.0)
    range: float = 2.5
    head_radius: float = 0.12  # sphere proxy for participant-as-target


@dataclass(frozen=True)
class GestureConfig:
    stroke_window: float = 0.2
    max_stroke_speed: float = 0.15
    min_extension: float = 0.9
    max_curl: float = 0.75
    half_angle: float = math.radians(15.0)
    range: float = 2.5


@dataclass(frozen=True)
class PostureConfig:
    hysteresis: float = 0.15
    hidden_units: int = 64


@dataclass(frozen=True)
class FusionConfig:
    dominated_threshold: float = 30.0
    gap_tolerance: float = 2.0
    jva_min_overlap: float = 1.0
    jva_min_participants: int = 2
    disengage_dwell: float = 10.0
    posture_smooth: float = 1.0
    gaze_switch_frames: int = 3

    def __post_init__(self):
        for name in (
            "dominated_threshold",
            "gap_tolerance",
            "jva_min_overlap",
            "jva_min_participants",
            "disengage_dwell",
            "posture_smooth",
            "gaze_switch_frames",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class EngineConfig:
    gaze: GazeConfig = GazeConfig()
    gesture: GestureConfig = GestureConfig()
    posture: PostureConfig = PostureConfig()
    fusion: FusionConfig = FusionConfig()


_FLOAT_KEYS = {
    "gaze_half_angle_deg",
    "point_half_angle_deg",
    "range_m",
    "max_stroke_speed",
    "min_extension",
    "max_curl",
    "stroke_window_s",
    "hysteresis_m",
    "dominated_threshold_s",
    "gap_tolerance_s",
    "jva_min_overlap_s",
    "disengage_dwell_s",
    "posture_smooth_s",
}
_INT_KEYS = {"jva_min_participants", "gaze_switch_frames"}
CONFIG_KEYS = sorted(_FLOAT_KEYS | _INT_KEYS)


def parse_config(text: str) -> EngineConfig:
    """Parse flat ``key=value`` lines; blank lines and # comments allowed."""
    values: dict[str, float | int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(f"config line {lineno}: expected key=value, got {line!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key in _FLOAT_KEYS:
            try:
                values[key] = float(val)
            except ValueError:
                raise ParseError(f"config line {lineno}: bad float for {key}: {val!r}")
        elif key in _INT_KEYS:
            try:
                values[key] = int(val)
            except ValueError:
                raise ParseError(f"config line {lineno}: bad int for {key}: {val!r}")
        else:
            raise ParseError(f"config line {lineno}: unknown key {key!r}")
    return _apply(values)


def _apply(v: dict) -> EngineConfig:
    gaze = GazeConfig(
        half_angle=math.radians(v.get("gaze_half_angle_deg", 10.0)),
        range=v.get("range_m", 2.5),
    )
    gesture = GestureConfig(
        stroke_window=v.get("stroke_window_s", 0.2),
        max_stroke_speed=v.get("max_stroke_speed", 0.15),
        min_extension=v.get("min_extension", 0.9),
        max_curl=v.get("max_curl", 0.75),
        half_angle=math.radians(v.get("point_half_angle_deg", 15.0)),
        range=v.get("range_m", 2.5),
    )
    posture = PostureConfig(hysteresis=v.get("hysteresis_m", 0.15))
    fusion = FusionConfig(
        dominated_threshold=v.get("dominated_threshold_s", 30.0),
        gap_tolerance=v.get("gap_tolerance_s", 2.0),
        jva_min_overlap=v.get("jva_min_overlap_s", 1.0),
        jva_min_participants=v.get("jva_min_participants", 2),
        disengage_dwell=v.get("disengage_dwell_s", 10.0),
        posture_smooth=v.get("posture_smooth_s", 1.0),
        gaze_switch_frames=v.get("gaze_switch_frames", 3),
    )
    return EngineConfig(gaze=gaze, gesture=gesture, posture=posture, fusion=fusion)


def load_config(path) -> EngineConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def dump_config(cfg: EngineConfig) -> str:
    """Serialize back to the flat file form (all keys, current values)."""
    lines = [
        f"gaze_half_angle_deg={math.degrees(cfg.gaze.half_angle):g}",
        f"point_half_angle_deg={math.degrees(cfg.gesture.half_angle):g}",
        f"range_m={cfg.gaze.range:g}",
        f"max_stroke_speed={cfg.gesture.max_stroke_speed:g}",
        f"min_extension={cfg.gesture.min_extension:g}",
        f"max_curl={cfg.gesture.max_curl:g}",
        f"stroke_window_s={cfg.gesture.stroke_window:g}",
        f"hysteresis_m={cfg.posture.hysteresis:g}",
        f"dominated_threshold_s={cfg.fusion.dominated_threshold:g}",
        f"gap_tolerance_s={cfg.fusion.gap_tolerance:g}",
        f"jva_min_overlap_s={cfg.fusion.jva_min_overlap:g}",
        f"jva_min_participants={cfg.fusion.jva_min_participants}",
        f"disengage_dwell_s={cfg.fusion.disengage_dwell:g}",
        f"posture_smooth_s={cfg.fusion.posture_smooth:g}",
        f"gaze_switch_frames={cfg.fusion.gaze_switch_frames}",
    ]
    return "\n".join(lines) + "\n"


def with_fusion(cfg: EngineConfig, **kw) -> EngineConfig:
    return replace(cfg, fusion=replace(cfg.fusion, **kw))
