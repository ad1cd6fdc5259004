from __future__ import annotations

import numpy as np
import pytest

from primo import _kernels as K


def tri_areas(vertices, triangles):
    a = vertices[triangles[:, 0]]
    b = vertices[triangles[:, 1]]
    c = vertices[triangles[:, 2]]
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def random_mesh(rng, n_tris=60, n_verts=50):
    v = rng.random((n_verts, 3))
    t = rng.integers(0, n_verts, (n_tris, 3)).astype(np.int64)
    keep = (t[:, 0] != t[:, 1]) & (t[:, 1] != t[:, 2]) & (t[:, 0] != t[:, 2])
    return v, t[keep]


def split_both_paths(*args):
    out_np = K._split_mesh_axis_np(*args)
    if not K.HAS_NUMBA:
        return out_np, out_np
    out_nb = K._split_mesh_axis_nb(*args)
    return out_np, out_nb


def test_split_conserves_area_random():
    rng = np.random.default_rng(21)
    for _ in range(50):
        v, t = random_mesh(rng)
        cut = float(rng.uniform(0.2, 0.8))
        axis = int(rng.integers(0, 3))
        new_v, below, above, segments = K.split_mesh_axis(v, t, axis, cut)
        allv = np.concatenate([v, new_v])
        total = tri_areas(v, t).sum()
        got = tri_areas(allv, below).sum() + tri_areas(allv, above).sum()
        assert got == pytest.approx(total, rel=1e-9)
        if below.size:
            assert allv[below][:, :, axis].max() <= cut
        if above.size:
            assert allv[above][:, :, axis].min() >= cut
        assert segments.shape[1:] == (2, 3)
        if segments.size:
            assert np.all(segments[:, :, axis] == cut)


def test_split_cut_coordinate_is_exact():
    v = np.array([[0.0, 0.0, 0.0], [1.0, 0.1, 0.0], [0.0, 0.9, 0.0]])
    t = np.array([[0, 1, 2]], dtype=np.int64)
    new_v, below, above, segments = K.split_mesh_axis(v, t, 1, 0.3)
    assert new_v.shape[0] == 2
    assert np.all(new_v[:, 1] == 0.3)
    assert below.shape[0] == 2 and above.shape[0] == 1
    assert segments.shape[0] == 1


def test_split_keeps_winding_orientation():
    # normals of all fragments must match the source normal direction
    v = np.array([[0.0, 0.0, 0.0], [1.0, 0.2, 0.0], [0.2, 1.0, 0.0]])
    t = np.array([[0, 1, 2]], dtype=np.int64)
    new_v, below, above, _ = K.split_mesh_axis(v, t, 0, 0.5)
    allv = np.concatenate([v, new_v])
    for tri in np.concatenate([below, above]):
        a, b, c = allv[tri]
        n = np.cross(b - a, c - a)
        assert n[2] > 0.0


def test_split_vertex_exactly_on_plane():
    v = np.array([[0.0, 0.5, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0]])
    t = np.array([[0, 1, 2]], dtype=np.int64)
    new_v, below, above, segments = K.split_mesh_axis(v, t, 1, 0.5)
    # one on-plane vertex, others on both sides: one interpolated point only
    assert new_v.shape[0] == 1
    assert below.shape[0] == 1 and above.shape[0] == 1
    assert segments.shape[0] == 1


def test_split_degenerate_all_on_plane_side_choice():
    v = np.array([[0.0, 0.5, 0.0], [1.0, 0.5, 0.0], [0.0, 0.5, 1.0]])
    t = np.array([[0, 1, 2]], dtype=np.int64)
    _, below, above, _ = K.split_mesh_axis(v, t, 1, 0.5, True)
    assert below.shape[0] == 1 and above.shape[0] == 0
    _, below, above, _ = K.split_mesh_axis(v, t, 1, 0.5, False)
    assert below.shape[0] == 0 and above.shape[0] == 1


def test_split_no_crossing_passthrough():
    rng = np.random.default_rng(5)
    v, t = random_mesh(rng, 20)
    new_v, below, above, segments = K.split_mesh_axis(v, t, 2, 2.0)
    assert new_v.shape[0] == 0
    assert segments.shape[0] == 0
    assert np.array_equal(below, t)
    assert above.shape[0] == 0


@pytest.mark.skipif(not K.HAS_NUMBA, reason="numba unavailable")
def test_split_paths_bit_identical():
    rng = np.random.default_rng(33)
    for _ in range(25):
        v, t = random_mesh(rng, 200, 120)
        # snap some coordinates onto the cut plane to exercise the on-plane cases
        cut = 0.5
        axis = int(rng.integers(0, 3))
        snap = rng.random(v.shape[0]) < 0.15
        v[snap, axis] = cut
        for flag in (True, False):
            out_np = K._split_mesh_axis_np(v, t, axis, cut, flag)
            out_nb = K._split_mesh_axis_nb(v, t, axis, cut, flag)
            for a, b in zip(out_np, out_nb):
                assert np.array_equal(np.asarray(a), np.asarray(b))


def test_first_hit_basic():
    v = np.array([[0.0, 0.5, 0.0], [1.0, 0.5, 0.0], [0.0, 0.5, 1.0]])
    t = np.array([[0, 1, 2]], dtype=np.int64)
    lo = np.zeros(3)
    hi = np.ones(3)
    hit, idx = K.first_hit_in_region(
        v, t, np.array([0.2, 2.0, 0.2]), np.array([0.0, -1.0, 0.0]), lo, hi, 1.0
    )
    assert idx == 0
    assert hit == pytest.approx(1.5)


def test_first_hit_respects_height_bound():
    v = np.array([[0.0, 0.5, 0.0], [1.0, 0.5, 0.0], [0.0, 0.5, 1.0]])
    t = np.array([[0, 1, 2]], dtype=np.int64)
    lo = np.zeros(3)
    hi = np.ones(3)
    _, idx = K.first_hit_in_region(
        v, t, np.array([0.2, 2.0, 0.2]), np.array([0.0, -1.0, 0.0]), lo, hi, 0.25
    )
    assert idx == -1


def test_first_hit_respects_box_bound():
    v = np.array([[0.0, 0.5, 0.0], [1.0, 0.5, 0.0], [0.0, 0.5, 1.0]])
    t = np.array([[0, 1, 2]], dtype=np.int64)
    lo = np.array([0.5, 0.0, 0.0])
    hi = np.ones(3)
    t_hit, idx = K.first_hit_in_region(
        v, t, np.array([0.2, 2.0, 0.2]), np.array([0.0, -1.0, 0.0]), lo, hi, 1.0
    )
    assert idx == -1


def test_first_hit_tie_takes_first_triangle():
    # two coincident triangles: the lower index wins the exact tie
    v = np.array([[0.0, 0.5, 0.0], [1.0, 0.5, 0.0], [0.0, 0.5, 1.0]])
    t = np.array([[0, 1, 2], [0, 1, 2]], dtype=np.int64)
    _, idx = K.first_hit_in_region(
        v, t, np.array([0.2, 2.0, 0.2]), np.array([0.0, -1.0, 0.0]), np.zeros(3), np.ones(3), 1.0
    )
    assert idx == 0


def test_first_hit_ignores_behind_origin():
    v = np.array([[0.0, 0.5, 0.0], [1.0, 0.5, 0.0], [0.0, 0.5, 1.0]])
    t = np.array([[0, 1, 2]], dtype=np.int64)
    _, idx = K.first_hit_in_region(
        v, t, np.array([0.2, 0.1, 0.2]), np.array([0.0, -1.0, 0.0]), np.zeros(3), np.ones(3), 1.0
    )
    assert idx == -1


@pytest.mark.skipif(not K.HAS_NUMBA, reason="numba unavailable")
def test_first_hit_paths_bit_identical():
    rng = np.random.default_rng(44)
    v, t = random_mesh(rng, 400, 200)
    lo = np.zeros(3)
    hi = np.ones(3)
    for _ in range(200):
        origin = rng.uniform(-0.2, 1.2, 3)
        direction = rng.normal(size=3)
        direction /= np.linalg.norm(direction)
        ymax = float(rng.uniform(0.0, 1.0))
        got_np = K._first_hit_np(v, t, origin, direction, lo, hi, ymax)
        got_nb = K._first_hit_nb(v, t, origin, direction, lo, hi, ymax)
        assert got_np[1] == got_nb[1]
        assert got_np[0] == got_nb[0] or (np.isinf(got_np[0]) and np.isinf(got_nb[0]))


def test_dispatcher_env_flag(monkeypatch):
    rng = np.random.default_rng(9)
    v, t = random_mesh(rng, 50)
    monkeypatch.setattr(K, "USE_NUMBA", False)
    out_a = K.split_mesh_axis(v, t, 1, 0.5)
    if K.HAS_NUMBA:
        monkeypatch.setattr(K, "USE_NUMBA", True)
        out_b = K.split_mesh_axis(v, t, 1, 0.5)
        for a, b in zip(out_a, out_b):
            assert np.array_equal(np.asarray(a), np.asarray(b))
