from __future__ import annotations

import math

import numpy as np
import pytest

from primo.geometry import (
    IDENTITY,
    UNIT_CUBE,
    Aabb,
    Ray,
    Similarity,
    Vec3,
    focus_to_stage,
    interpolate,
    locate_point,
    octant_aabb,
    path_to_aabb,
    pick_child_octant,
    ray_aabb,
)


def test_octant_bit_convention():
    parent = UNIT_CUBE
    assert octant_aabb(parent, 0) == Aabb(Vec3(0, 0, 0), Vec3(0.5, 0.5, 0.5))
    # bit 0 -> upper x, bit 1 -> upper y, bit 2 -> upper z
    assert octant_aabb(parent, 1).lo == Vec3(0.5, 0, 0)
    assert octant_aabb(parent, 2).lo == Vec3(0, 0.5, 0)
    assert octant_aabb(parent, 4).lo == Vec3(0, 0, 0.5)
    assert octant_aabb(parent, 7) == Aabb(Vec3(0.5, 0.5, 0.5), Vec3(1, 1, 1))


def test_octant_requires_cube():
    with pytest.raises(ValueError):
        octant_aabb(Aabb(Vec3(0, 0, 0), Vec3(1, 1, 2)), 0)
    with pytest.raises(ValueError):
        octant_aabb(UNIT_CUBE, 8)


def test_octants_tile_parent():
    parent = Aabb(Vec3(0.25, 0.5, 0.0), Vec3(0.5, 0.75, 0.25))
    children = [octant_aabb(parent, i) for i in range(8)]
    assert sum(c.size.x * c.size.y * c.size.z for c in children) == pytest.approx(
        parent.size.x * parent.size.y * parent.size.z
    )
    for a in range(8):
        for b in range(a + 1, 8):
            ca, cb = children[a], children[b]
            overlap = all(
                min(ca.hi[k], cb.hi[k]) > max(ca.lo[k], cb.lo[k]) for k in range(3)
            )
            assert not overlap


def test_path_to_aabb_dyadic_exact():
    box = path_to_aabb(UNIT_CUBE, (7, 0, 7))
    assert box.lo == Vec3(0.625, 0.625, 0.625)
    assert box.hi == Vec3(0.75, 0.75, 0.75)
    assert box.side == 0.125


def test_locate_point_boundary_goes_lower():
    # a point exactly on the split plane belongs to the lower octant
    assert locate_point(UNIT_CUBE, 1, Vec3(0.5, 0.25, 0.25)) == (0,)
    assert locate_point(UNIT_CUBE, 1, Vec3(0.75, 0.5, 0.5)) == (1,)
    assert locate_point(UNIT_CUBE, 2, Vec3(0.5, 0.5, 0.5)) == (0, 7)
    with pytest.raises(ValueError):
        locate_point(UNIT_CUBE, 1, Vec3(1.5, 0.5, 0.5))


def test_locate_point_round_trip_random():
    rng = np.random.default_rng(11)
    for _ in range(300):
        p = Vec3(*rng.uniform(0.01, 0.99, 3))
        for depth in (1, 2, 3):
            path = locate_point(UNIT_CUBE, depth, p)
            assert len(path) == depth
            assert path_to_aabb(UNIT_CUBE, path).contains(p)


def test_ray_aabb_hit_and_miss():
    box = UNIT_CUBE
    hit = ray_aabb(Ray(Vec3(0.5, 2.0, 0.5), Vec3(0.0, -1.0, 0.0)), box)
    assert hit is not None
    t_enter, t_exit = hit
    assert t_enter == pytest.approx(1.0)
    assert t_exit == pytest.approx(2.0)
    assert ray_aabb(Ray(Vec3(2.0, 2.0, 2.0), Vec3(0.0, -1.0, 0.0)), box) is None
    # pointing away
    assert ray_aabb(Ray(Vec3(0.5, 2.0, 0.5), Vec3(0.0, 1.0, 0.0)), box) is None


def test_ray_aabb_origin_inside_gives_negative_entry():
    hit = ray_aabb(Ray(Vec3(0.5, 0.5, 0.5), Vec3(0.0, -1.0, 0.0)), UNIT_CUBE)
    assert hit is not None
    t_enter, t_exit = hit
    assert t_enter < 0 < t_exit


def test_ray_aabb_axis_parallel_outside_slab():
    ray = Ray(Vec3(0.5, 2.0, 1.5), Vec3(0.0, -1.0, 0.0))
    assert ray_aabb(ray, UNIT_CUBE) is None


def test_pick_child_octant_nearest_wins():
    ray = Ray(Vec3(0.25, 2.0, 0.25), Vec3(0.0, -1.0, 0.0))
    # descends onto the top of the lower-x lower-z column: upper-y octant first
    assert pick_child_octant(ray, UNIT_CUBE) == 2
    ray_up = Ray(Vec3(0.75, -1.0, 0.75), Vec3(0.0, 1.0, 0.0))
    assert pick_child_octant(ray_up, UNIT_CUBE) == 1 | 4


def test_pick_child_octant_tie_breaks_to_lowest_index():
    # diagonal through the shared corner enters several children at t=0
    ray = Ray(Vec3(0.5, 0.5, 0.5), Vec3(1.0, 1.0, 1.0))
    assert pick_child_octant(ray, UNIT_CUBE) == 0


def test_pick_child_octant_miss_returns_none():
    assert pick_child_octant(Ray(Vec3(5, 5, 5), Vec3(0, 1, 0)), UNIT_CUBE) is None


def test_focus_to_stage_octant_oracle():
    t = focus_to_stage(Aabb(Vec3(0.5, 0.5, 0.5), Vec3(1, 1, 1)), UNIT_CUBE)
    assert t.scale == 2.0
    assert t.translation == Vec3(-1.0, -1.0, -1.0)
    assert t.apply(Vec3(0.5, 0.5, 0.5)) == Vec3(0.0, 0.0, 0.0)
    assert t.apply(Vec3(1.0, 1.0, 1.0)) == Vec3(1.0, 1.0, 1.0)


def test_focus_to_stage_depth_scales_are_exact_powers():
    box = UNIT_CUBE
    for depth in range(1, 6):
        box = octant_aabb(box, 7)
        t = focus_to_stage(box, UNIT_CUBE)
        assert t.scale == 2.0 ** depth


def test_similarity_round_trip():
    rng = np.random.default_rng(3)
    for _ in range(100):
        s = Similarity(float(rng.uniform(0.25, 8.0)), Vec3(*rng.uniform(-2, 2, 3)))
        p = Vec3(*rng.uniform(-1, 1, 3))
        q = s.invert().apply(s.apply(p))
        assert math.dist(p, q) < 1e-12


def test_similarity_apply_ray_preserves_line():
    s = Similarity(4.0, Vec3(1.0, -2.0, 0.5))
    ray = Ray(Vec3(0.1, 0.2, 0.3), Vec3(0.0, -1.0, 0.0))
    mapped = s.apply_ray(ray)
    assert mapped.origin == s.apply(ray.origin)
    # the direction is carried over unscaled; hit ordering is preserved
    assert mapped.direction == ray.direction


def test_interpolate_endpoints_exact():
    a = IDENTITY
    b = Similarity(8.0, Vec3(-3.5, -3.5, -3.5))
    assert interpolate(a, b, 0.0) == a
    assert interpolate(a, b, 1.0) == b
    assert interpolate(a, b, -0.1) == a
    assert interpolate(a, b, 1.7) == b


def test_interpolate_scale_is_geometric():
    a = Similarity(1.0, Vec3(0, 0, 0))
    b = Similarity(4.0, Vec3(1, 1, 1))
    mid = interpolate(a, b, 0.5)
    assert mid.scale == pytest.approx(2.0)
    assert mid.translation.x == pytest.approx(0.5)


def test_aabb_contains_box():
    inner = Aabb(Vec3(0.25, 0.25, 0.25), Vec3(0.5, 0.5, 0.5))
    assert UNIT_CUBE.contains_box(inner)
    assert not inner.contains_box(UNIT_CUBE)
    assert UNIT_CUBE.contains_box(UNIT_CUBE)
