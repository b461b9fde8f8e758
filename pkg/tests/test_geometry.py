import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from groupsense.core import ObjectRegistry, TaskObject
from groupsense.errors import DegenerateRay
from groupsense.geometry import (
    Cone,
    aabb_cone_intersect,
    angular_distance,
    point_in_cone,
    ray_from_points,
    select_objects,
    sphere_cone_intersect,
)

from oracles import aabb_grid_hits_cone, random_cone_and_box, sphere_surface_hits_cone


def std_cone(half_deg=15.0, range_=2.0):
    return Cone(apex=(0, 0, 0), axis=(0, 0, 1), half_angle=math.radians(half_deg), range=range_)


def box_at(center, half=0.05, object_id="obj"):
    c = np.asarray(center, dtype=float)
    return TaskObject(object_id=object_id, label=object_id, aabb_min=c - half, aabb_max=c + half)


# -- rays -------------------------------------------------------------------


def test_ray_already_unit():
    ray = ray_from_points((0, 0, 0), (0, 0, -1))
    assert np.array_equal(ray.direction, [0, 0, -1])


def test_ray_hand_computed_case():
    # (0, -0.02, -0.10) / sqrt(0.0104)
    ray = ray_from_points((0, 1.50, 0), (0, 1.48, -0.10))
    assert np.allclose(ray.direction, [0.0, -0.19612, -0.98058], atol=1e-5)


def test_ray_degenerate():
    with pytest.raises(DegenerateRay):
        ray_from_points((1, 2, 3), (1, 2, 3))


@given(
    st.tuples(*[st.floats(-10, 10) for _ in range(3)]),
    st.tuples(*[st.floats(-10, 10) for _ in range(3)]),
)
def test_ray_direction_is_unit(a, b):
    if math.dist(a, b) <= 1e-6:
        return
    ray = ray_from_points(a, b)
    assert abs(np.linalg.norm(ray.direction) - 1.0) <= 1e-9


# -- point in cone ----------------------------------------------------------


def test_point_on_axis_within_range():
    assert point_in_cone(std_cone(), (0, 0, 1))


def test_point_behind_apex():
    assert not point_in_cone(std_cone(), (0, 0, -0.5))


def test_point_just_outside_aperture():
    # atan(0.27 / 1.0) = 15.11 degrees > 15
    assert not point_in_cone(std_cone(), (0.27, 0, 1.0))


def test_apex_is_inside():
    assert point_in_cone(std_cone(), (0, 0, 0))


@given(
    st.floats(0.05, 1.95),
    st.floats(0.0, math.radians(15)),
    st.floats(0.0, 1.0),
    st.floats(0.0, 2 * math.pi),
)
def test_monotone_in_angle(axial, theta1, shrink, phi):
    """A point inside at angle theta stays inside at any smaller angle."""
    cone = std_cone()
    theta2 = theta1 * shrink

    def pt(theta):
        r = axial * math.tan(theta)
        return (r * math.cos(phi), r * math.sin(phi), axial)

    if point_in_cone(cone, pt(theta1)):
        assert point_in_cone(cone, pt(theta2))


# -- sphere vs cone ---------------------------------------------------------


def test_sphere_center_inside():
    assert sphere_cone_intersect(std_cone(), (0, 0, 1), 0.1)


def test_sphere_clear_of_cone_matches_sampling():
    cone = std_cone()
    assert not sphere_surface_hits_cone(cone, (1, 0, 0.1), 0.1)
    assert not sphere_cone_intersect(cone, (1, 0, 0.1), 0.1)


def test_sphere_crosses_far_cap():
    # nearest cap point sits at z=2.0, distance 0.05 < 0.1
    assert sphere_cone_intersect(std_cone(), (0, 0, 2.05), 0.1)


def test_sphere_behind_apex_face():
    assert sphere_cone_intersect(std_cone(), (0, 0, -0.05), 0.1)
    assert not sphere_cone_intersect(std_cone(), (0, 0, -0.2), 0.1)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_sphere_test_never_contradicts_surface_sampling(seed):
    rng = np.random.default_rng(seed)
    cone, _ = random_cone_and_box(rng)
    center = rng.uniform(-1, 3, size=3)
    radius = float(rng.uniform(0.01, 0.8))
    if sphere_surface_hits_cone(cone, center, radius, n=500):
        assert sphere_cone_intersect(cone, center, radius)


# -- box selection ----------------------------------------------------------


def test_on_axis_box_is_selected():
    registry = ObjectRegistry(objects=(box_at((0, 0, 1)),))
    assert select_objects(std_cone(), registry) == ["obj"]


def test_empty_registry():
    assert select_objects(std_cone(), ObjectRegistry()) == []


def test_selection_sorted_by_angular_distance():
    near = box_at((math.tan(math.radians(5)), 0, 1.0), object_id="near5")
    far = box_at((math.tan(math.radians(10)), 0, 1.0), object_id="far10")
    registry = ObjectRegistry(objects=(far, near))
    assert select_objects(std_cone(), registry) == ["near5", "far10"]


def test_selection_tie_breaks_on_id():
    a = box_at((0.05, 0, 1.0), object_id="b_second")
    b = box_at((-0.05, 0, 1.0), object_id="a_first")
    registry = ObjectRegistry(objects=(a, b))
    assert select_objects(std_cone(), registry) == ["a_first", "b_second"]


def test_selection_is_sound_against_grid_oracle():
    rng = np.random.default_rng(2024)
    checked = 0
    for _ in range(60):
        cone, obj = random_cone_and_box(rng)
        if aabb_grid_hits_cone(cone, obj):
            checked += 1
            assert aabb_cone_intersect(cone, obj), (cone, obj.aabb_min, obj.aabb_max)
    assert checked > 5


def test_over_selection_is_bounded_by_sphere_test():
    rng = np.random.default_rng(99)
    for _ in range(150):
        cone, obj = random_cone_and_box(rng)
        if aabb_cone_intersect(cone, obj):
            center = obj.center()
            radius = float(np.linalg.norm(obj.aabb_max - center))
            assert sphere_cone_intersect(cone, center, radius)


def test_cone_validation():
    with pytest.raises(ValueError):
        Cone(apex=(0, 0, 0), axis=(0, 0, 2), half_angle=0.1, range=1.0)
    with pytest.raises(ValueError):
        Cone(apex=(0, 0, 0), axis=(0, 0, 1), half_angle=0.0, range=1.0)
    with pytest.raises(ValueError):
        Cone(apex=(0, 0, 0), axis=(0, 0, 1), half_angle=0.1, range=0.0)


def test_angular_distance_on_axis_is_zero():
    assert angular_distance(std_cone(), (0, 0, 1.5)) == 0.0
