"""groupsense: deterministic multimodal analytics for small-group sessions.

Converts timestamped skeleton, hand-landmark and speech-activity streams
into resolved gaze targets, pointing selections, posture labels and
engagement events, replayable from files and testable against a built-in
scenario simulator.
"""

from .config import EngineConfig, FusionConfig, GazeConfig, GestureConfig, PostureConfig
from .core import (
    Body,
    EngagementEvent,
    EventKind,
    Hand,
    HandLandmarkId,
    HandLandmarks,
    JointId,
    ObjectRegistry,
    SkeletonFrame,
    SpeechActivity,
    TaskObject,
    validate_frame,
)
from .fusion import (
    FrameInputs,
    FusionEngine,
    aggregate_pointing,
    detect_disengagement,
    detect_dominated,
    detect_jva,
)
from .gaze import GazeSample, ObjectTarget, ParticipantTarget, gaze_ray, gaze_target
from .geometry import Cone, UnitRay, point_in_cone, ray_from_points, select_objects, sphere_cone_intersect
from .gesture import (
    GestureShape,
    HandTrackWindow,
    PointingDetection,
    classify_shape,
    detect_pointing,
    detect_stroke,
    pointing_frustum,
)
from .posture import (
    MlpModel,
    PostureLabel,
    Seat,
    SeatAssignment,
    SeatModels,
    assign_seats,
    classify_posture,
    flatten_features,
    mlp_forward,
    mlp_train_step,
)
from .replay import SessionPaths, run_replay
from .simulator import SCENARIOS, ScenarioScript, build_scenario, synth_body

__version__ = "0.1.0"
