import numpy as np
import pytest
from hypothesis import given, strategies as st

from groupsense.core import (
    JOINT_COUNT,
    Body,
    Hand,
    HandLandmarkId,
    HandLandmarks,
    JointId,
    SkeletonFrame,
    ViolationKind,
    frames_equal,
    normalize_frame,
    validate_frame,
)

from util import make_body


def _frame(*bodies, hands=(), t=0.0):
    return SkeletonFrame(timestamp=t, bodies=bodies, hands=hands)


def test_joint_enumeration_is_total():
    values = sorted(int(j) for j in JointId)
    assert values == list(range(32))
    assert JointId.PELVIS == 0
    for name in ("NOSE", "EAR_LEFT", "EAR_RIGHT"):
        assert hasattr(JointId, name)


def test_hand_landmark_enumeration_is_total():
    assert sorted(int(x) for x in HandLandmarkId) == list(range(21))
    for name in ("WRIST", "INDEX_MCP", "INDEX_PIP", "INDEX_DIP", "INDEX_TIP"):
        assert hasattr(HandLandmarkId, name)


def test_valid_frame_has_no_violations():
    assert validate_frame(_frame(make_body())) == []


def test_short_body_reports_joint_count():
    joints = np.zeros((31, 7))
    joints[:, 3] = 1.0
    violations = validate_frame(_frame(Body(body_id="b", joints=joints)))
    assert [v.kind for v in violations] == [ViolationKind.JOINT_COUNT]


def test_zero_quaternion_is_not_normalizable():
    joints = np.zeros((32, 7))
    joints[:, 3] = 1.0
    joints[5, 3:] = 0.0
    violations = validate_frame(_frame(Body(body_id="b", joints=joints)))
    assert [v.kind for v in violations] == [ViolationKind.QUATERNION]


def test_nan_position_is_reported():
    joints = np.zeros((32, 7))
    joints[:, 3] = 1.0
    joints[3, 0] = np.nan
    kinds = {v.kind for v in validate_frame(_frame(Body(body_id="b", joints=joints)))}
    assert ViolationKind.NON_FINITE_POSITION in kinds


def test_duplicate_body_id_is_reported():
    kinds = {v.kind for v in validate_frame(_frame(make_body("x"), make_body("x")))}
    assert ViolationKind.DUPLICATE_BODY in kinds


def test_wrong_landmark_count_is_reported():
    hand = HandLandmarks(body_id="b", hand=Hand.LEFT, points=np.zeros((20, 3)))
    kinds = {v.kind for v in validate_frame(_frame(hands=(hand,)))}
    assert kinds == {ViolationKind.LANDMARK_COUNT}


@given(st.floats(min_value=0.500001, max_value=1.999999))
def test_in_band_quaternions_renormalize_to_unit(norm):
    joints = np.zeros((32, 7))
    joints[:, 3] = 1.0
    joints[7, 3:] = (norm, 0.0, 0.0, 0.0)
    frame = normalize_frame(_frame(Body(body_id="b", joints=joints)))
    q = frame.bodies[0].orientation(7)
    assert abs(np.linalg.norm(q) - 1.0) <= 1e-6
    assert validate_frame(frame) == []


@given(st.floats(allow_nan=False, allow_infinity=False, min_value=-100, max_value=100))
def test_out_of_band_quaternions_are_flagged(scale):
    if 0.5 < abs(scale) < 2.0:
        scale = 3.0
    joints = np.zeros((32, 7))
    joints[:, 3] = 1.0
    joints[0, 3:] = (scale, 0.0, 0.0, 0.0)
    frame = normalize_frame(_frame(Body(body_id="b", joints=joints)))
    kinds = {v.kind for v in validate_frame(frame)}
    assert kinds == {ViolationKind.QUATERNION}


def test_frames_equal_helper():
    a = _frame(make_body("b", NOSE=(0.5, 0.25, 0.125)))
    b = _frame(make_body("b", NOSE=(0.5, 0.25, 0.125)))
    c = _frame(make_body("b", NOSE=(0.5, 0.25, 0.126)))
    assert frames_equal(a, b)
    assert not frames_equal(a, c)


def test_bodies_are_immutable():
    body = make_body()
    with pytest.raises(ValueError):
        body.joints[0, 0] = 1.0
