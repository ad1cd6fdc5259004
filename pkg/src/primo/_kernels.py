"""Hot numeric loops with two interchangeable implementations.

Each kernel exists twice: a numba ``@njit`` version and a pure-numpy
vectorized version.  The public names dispatch to the numba build unless the
environment variable ``PRIMO_PURE_NUMPY`` is set to a non-empty value (or
numba is unavailable), in which case the numpy path is used.  Both paths
evaluate the same IEEE expressions in the same order, so their outputs are
bit-identical; ``benchmarks/bench_kernels.py`` times them against each other
and the test suite asserts the equivalence.

Kernels operate on raw arrays (float64 vertices, int64 triangle indices) and
know nothing about meshes, navigation, or files.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised via PRIMO_PURE_NUMPY instead
    numba = None
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and not os.environ.get("PRIMO_PURE_NUMPY")

# Moller-Trumbore tolerances, shared verbatim by every implementation of the
# pick so hits agree across languages.
DET_EPS = 1e-12
T_MIN = 1e-9
BARY_EPS = 1e-12


# ---------------------------------------------------------------------------
# plane split
# ---------------------------------------------------------------------------

def _split_mesh_axis_np(vertices, triangles, axis, cut, plane_to_below=True):
    """Split triangles against the plane ``coordinate[axis] == cut``.

    Returns ``(new_vertices, below, above, segments)`` where ``below`` and
    ``above`` index into the concatenation of ``vertices`` and
    ``new_vertices``.  Triangles lying entirely in the plane count toward
    ``below`` when ``plane_to_below`` (the clip convention) and toward
    ``above`` otherwise (used for lower-bound crop cuts, where the kept side
    is above).  Crossing triangles are cut exactly: the intersection
    coordinate along ``axis`` is set to ``cut`` rather than recomputed, and
    each cut yields one section segment lying in the plane.
    """
    n_vert = vertices.shape[0]
    coord = vertices[:, axis]
    sign = np.zeros(n_vert, dtype=np.int8)
    sign[coord > cut] = 1
    sign[coord < cut] = -1
    tri_sign = sign[triangles]  # (m, 3)
    pos = (tri_sign > 0).sum(axis=1)
    neg = (tri_sign < 0).sum(axis=1)

    crossing = (pos > 0) & (neg > 0)
    all_plane = (pos == 0) & (neg == 0)
    whole_above = (~crossing) & (((neg == 0) & (pos > 0)) | (all_plane & (not plane_to_below)))
    whole_below = ~(crossing | whole_above)
    # one vertex exactly on the plane, the other two on opposite sides
    on_plane = pos + neg == 2

    m = triangles.shape[0]
    below_rows = np.where(whole_below, 1, 0) + np.where(
        crossing, np.where(on_plane, 1, np.where(neg == 2, 2, 1)), 0
    )
    above_rows = np.where(whole_above, 1, 0) + np.where(
        crossing, np.where(on_plane, 1, np.where(pos == 2, 2, 1)), 0
    )
    new_rows = np.where(crossing, np.where(on_plane, 1, 2), 0)

    below_at = np.cumsum(below_rows) - below_rows
    above_at = np.cumsum(above_rows) - above_rows
    new_at = np.cumsum(new_rows) - new_rows
    seg_at = np.cumsum(crossing) - crossing

    below = np.empty((int(below_rows.sum()), 3), dtype=np.int64)
    above = np.empty((int(above_rows.sum()), 3), dtype=np.int64)
    new_vertices = np.empty((int(new_rows.sum()), 3), dtype=np.float64)
    segments = np.empty((int(crossing.sum()), 2, 3), dtype=np.float64)

    if below.shape[0]:
        below[below_at[whole_below]] = triangles[whole_below]
    if above.shape[0]:
        above[above_at[whole_above]] = triangles[whole_above]

    def _interp(vi, vj):
        # canonical endpoint order (lower global index first) so both code
        # paths round identically regardless of triangle orientation
        swap = vi > vj
        a = np.where(swap, vj, vi)
        b = np.where(swap, vi, vj)
        fa = coord[a]
        t = (cut - fa) / (coord[b] - fa)
        p = vertices[a] + t[:, None] * (vertices[b] - vertices[a])
        p[:, axis] = cut
        return p

    # -- crossing with one vertex on the plane: z | v1 | v2, sign(v1) != 0
    ca = crossing & on_plane
    if ca.any():
        tri = triangles[ca]
        s = tri_sign[ca]
        zcol = np.argmax(s == 0, axis=1)
        cols = (zcol[:, None] + np.arange(3)) % 3
        rolled = np.take_along_axis(tri, cols, axis=1)
        z, v1, v2 = rolled[:, 0], rolled[:, 1], rolled[:, 2]
        q = n_vert + new_at[ca]
        new_vertices[new_at[ca]] = _interp(v1, v2)
        segments[seg_at[ca], 0] = vertices[z]
        segments[seg_at[ca], 1] = new_vertices[new_at[ca]]
        s1 = np.take_along_axis(s, cols, axis=1)[:, 1]
        neg1 = s1 < 0
        bi = below_at[ca]
        ai = above_at[ca]
        below[bi[neg1]] = np.stack([z[neg1], v1[neg1], q[neg1]], axis=1)
        above[ai[neg1]] = np.stack([z[neg1], q[neg1], v2[neg1]], axis=1)
        below[bi[~neg1]] = np.stack([z[~neg1], q[~neg1], v2[~neg1]], axis=1)
        above[ai[~neg1]] = np.stack([z[~neg1], v1[~neg1], q[~neg1]], axis=1)

    # -- crossing with a lone vertex opposite the other two
    cb = crossing & ~on_plane
    if cb.any():
        tri = triangles[cb]
        s = tri_sign[cb]
        lone_neg = neg[cb] == 1
        lcol = np.where(lone_neg[:, None], s < 0, s > 0).argmax(axis=1)
        cols = (lcol[:, None] + np.arange(3)) % 3
        rolled = np.take_along_axis(tri, cols, axis=1)
        a, b, c = rolled[:, 0], rolled[:, 1], rolled[:, 2]
        base = new_at[cb]
        q1 = n_vert + base
        q2 = q1 + 1
        new_vertices[base] = _interp(a, b)
        new_vertices[base + 1] = _interp(a, c)
        segments[seg_at[cb], 0] = new_vertices[base]
        segments[seg_at[cb], 1] = new_vertices[base + 1]
        lone_tri = np.stack([a, q1, q2], axis=1)
        pair_one = np.stack([q1, b, c], axis=1)
        pair_two = np.stack([q1, c, q2], axis=1)
        bi = below_at[cb]
        ai = above_at[cb]
        below[bi[lone_neg]] = lone_tri[lone_neg]
        above[ai[lone_neg]] = pair_one[lone_neg]
        above[ai[lone_neg] + 1] = pair_two[lone_neg]
        up = ~lone_neg
        above[ai[up]] = lone_tri[up]
        below[bi[up]] = pair_one[up]
        below[bi[up] + 1] = pair_two[up]

    return new_vertices, below, above, segments


def _first_hit_np(vertices, triangles, origin, direction, box_lo, box_hi, ymax):
    """First qualifying ray/triangle hit (Moller-Trumbore over all rows).

    A hit qualifies when its point lies inside the closed box
    ``[box_lo, box_hi]`` and at or below ``ymax``.  Returns ``(t, index)``
    with ``t = inf`` and ``index = -1`` when nothing qualifies; among equal
    ``t`` the smallest triangle index wins.
    """
    a = vertices[triangles[:, 0]]
    e1 = vertices[triangles[:, 1]] - a
    e2 = vertices[triangles[:, 2]] - a
    d = direction
    px = d[1] * e2[:, 2] - d[2] * e2[:, 1]
    py = d[2] * e2[:, 0] - d[0] * e2[:, 2]
    pz = d[0] * e2[:, 1] - d[1] * e2[:, 0]
    det = e1[:, 0] * px + e1[:, 1] * py + e1[:, 2] * pz
    ok = np.abs(det) >= DET_EPS
    inv = 1.0 / np.where(ok, det, 1.0)
    tv = origin - a
    u = (tv[:, 0] * px + tv[:, 1] * py + tv[:, 2] * pz) * inv
    ok &= (u >= -BARY_EPS) & (u <= 1.0 + BARY_EPS)
    qx = tv[:, 1] * e1[:, 2] - tv[:, 2] * e1[:, 1]
    qy = tv[:, 2] * e1[:, 0] - tv[:, 0] * e1[:, 2]
    qz = tv[:, 0] * e1[:, 1] - tv[:, 1] * e1[:, 0]
    v = (d[0] * qx + d[1] * qy + d[2] * qz) * inv
    ok &= (v >= -BARY_EPS) & (u + v <= 1.0 + BARY_EPS)
    t = (e2[:, 0] * qx + e2[:, 1] * qy + e2[:, 2] * qz) * inv
    ok &= t >= T_MIN
    hx = origin[0] + t * d[0]
    hy = origin[1] + t * d[1]
    hz = origin[2] + t * d[2]
    ok &= (
        (hx >= box_lo[0]) & (hx <= box_hi[0])
        & (hy >= box_lo[1]) & (hy <= box_hi[1])
        & (hz >= box_lo[2]) & (hz <= box_hi[2])
        & (hy <= ymax)
    )
    if not ok.any():
        return np.inf, -1
    t = np.where(ok, t, np.inf)
    best = t.min()
    return float(best), int(np.flatnonzero(t == best)[0])


if HAS_NUMBA:

    @numba.njit(cache=True)
    def _split_mesh_axis_nb(vertices, triangles, axis, cut, plane_to_below=True):  # pragma: no cover
        n_vert = vertices.shape[0]
        m = triangles.shape[0]
        n_below = 0
        n_above = 0
        n_new = 0
        n_seg = 0
        for i in range(m):
            pos = 0
            neg = 0
            for k in range(3):
                f = vertices[triangles[i, k], axis]
                if f > cut:
                    pos += 1
                elif f < cut:
                    neg += 1
            if neg > 0 and pos > 0:
                n_seg += 1
                if pos + neg == 2:
                    n_below += 1
                    n_above += 1
                    n_new += 1
                else:
                    n_new += 2
                    if neg == 2:
                        n_below += 2
                        n_above += 1
                    else:
                        n_below += 1
                        n_above += 2
            elif pos > 0 or (pos == 0 and neg == 0 and not plane_to_below):
                n_above += 1
            else:
                n_below += 1

        new_vertices = np.empty((n_new, 3), dtype=np.float64)
        below = np.empty((n_below, 3), dtype=np.int64)
        above = np.empty((n_above, 3), dtype=np.int64)
        segments = np.empty((n_seg, 2, 3), dtype=np.float64)

        bi = 0
        ai = 0
        ni = 0
        si = 0
        for i in range(m):
            s0 = 0
            s1 = 0
            s2 = 0
            f = vertices[triangles[i, 0], axis]
            if f > cut:
                s0 = 1
            elif f < cut:
                s0 = -1
            f = vertices[triangles[i, 1], axis]
            if f > cut:
                s1 = 1
            elif f < cut:
                s1 = -1
            f = vertices[triangles[i, 2], axis]
            if f > cut:
                s2 = 1
            elif f < cut:
                s2 = -1
            pos = (s0 > 0) + (s1 > 0) + (s2 > 0)
            neg = (s0 < 0) + (s1 < 0) + (s2 < 0)

            if neg == 0 or pos == 0:
                if pos > 0 or (pos == 0 and neg == 0 and not plane_to_below):
                    above[ai, 0] = triangles[i, 0]
                    above[ai, 1] = triangles[i, 1]
                    above[ai, 2] = triangles[i, 2]
                    ai += 1
                else:
                    below[bi, 0] = triangles[i, 0]
                    below[bi, 1] = triangles[i, 1]
                    below[bi, 2] = triangles[i, 2]
                    bi += 1
                continue

            if pos + neg == 2:
                # rotate the on-plane vertex first
                if s0 == 0:
                    r = 0
                elif s1 == 0:
                    r = 1
                else:
                    r = 2
                z = triangles[i, r]
                v1 = triangles[i, (r + 1) % 3]
                v2 = triangles[i, (r + 2) % 3]
                if v1 < v2:
                    lo_v, hi_v = v1, v2
                else:
                    lo_v, hi_v = v2, v1
                fa = vertices[lo_v, axis]
                t = (cut - fa) / (vertices[hi_v, axis] - fa)
                q = n_vert + ni
                for k in range(3):
                    new_vertices[ni, k] = vertices[lo_v, k] + t * (
                        vertices[hi_v, k] - vertices[lo_v, k]
                    )
                new_vertices[ni, axis] = cut
                for k in range(3):
                    segments[si, 0, k] = vertices[z, k]
                    segments[si, 1, k] = new_vertices[ni, k]
                si += 1
                sv1 = s0 if (r + 1) % 3 == 0 else (s1 if (r + 1) % 3 == 1 else s2)
                if sv1 < 0:
                    below[bi, 0] = z
                    below[bi, 1] = v1
                    below[bi, 2] = q
                    above[ai, 0] = z
                    above[ai, 1] = q
                    above[ai, 2] = v2
                else:
                    below[bi, 0] = z
                    below[bi, 1] = q
                    below[bi, 2] = v2
                    above[ai, 0] = z
                    above[ai, 1] = v1
                    above[ai, 2] = q
                bi += 1
                ai += 1
                ni += 1
                continue

            # lone vertex opposite an edge: rotate it first
            if neg == 1:
                if s0 < 0:
                    r = 0
                elif s1 < 0:
                    r = 1
                else:
                    r = 2
            else:
                if s0 > 0:
                    r = 0
                elif s1 > 0:
                    r = 1
                else:
                    r = 2
            va = triangles[i, r]
            vb = triangles[i, (r + 1) % 3]
            vc = triangles[i, (r + 2) % 3]
            q1 = n_vert + ni
            q2 = n_vert + ni + 1
            for pair in range(2):
                other = vb if pair == 0 else vc
                if va < other:
                    lo_v, hi_v = va, other
                else:
                    lo_v, hi_v = other, va
                fa = vertices[lo_v, axis]
                t = (cut - fa) / (vertices[hi_v, axis] - fa)
                for k in range(3):
                    new_vertices[ni + pair, k] = vertices[lo_v, k] + t * (
                        vertices[hi_v, k] - vertices[lo_v, k]
                    )
                new_vertices[ni + pair, axis] = cut
            for k in range(3):
                segments[si, 0, k] = new_vertices[ni, k]
                segments[si, 1, k] = new_vertices[ni + 1, k]
            si += 1
            if neg == 1:
                below[bi, 0] = va
                below[bi, 1] = q1
                below[bi, 2] = q2
                bi += 1
                above[ai, 0] = q1
                above[ai, 1] = vb
                above[ai, 2] = vc
                above[ai + 1, 0] = q1
                above[ai + 1, 1] = vc
                above[ai + 1, 2] = q2
                ai += 2
            else:
                above[ai, 0] = va
                above[ai, 1] = q1
                above[ai, 2] = q2
                ai += 1
                below[bi, 0] = q1
                below[bi, 1] = vb
                below[bi, 2] = vc
                below[bi + 1, 0] = q1
                below[bi + 1, 1] = vc
                below[bi + 1, 2] = q2
                bi += 2
            ni += 2

        return new_vertices, below, above, segments

    @numba.njit(cache=True)
    def _first_hit_nb(vertices, triangles, origin, direction, box_lo, box_hi, ymax):  # pragma: no cover
        best_t = np.inf
        best_i = -1
        ox, oy, oz = origin[0], origin[1], origin[2]
        dx, dy, dz = direction[0], direction[1], direction[2]
        for i in range(triangles.shape[0]):
            ia = triangles[i, 0]
            ib = triangles[i, 1]
            ic = triangles[i, 2]
            ax, ay, az = vertices[ia, 0], vertices[ia, 1], vertices[ia, 2]
            e1x = vertices[ib, 0] - ax
            e1y = vertices[ib, 1] - ay
            e1z = vertices[ib, 2] - az
            e2x = vertices[ic, 0] - ax
            e2y = vertices[ic, 1] - ay
            e2z = vertices[ic, 2] - az
            px = dy * e2z - dz * e2y
            py = dz * e2x - dx * e2z
            pz = dx * e2y - dy * e2x
            det = e1x * px + e1y * py + e1z * pz
            if -DET_EPS < det < DET_EPS:
                continue
            inv = 1.0 / det
            tvx = ox - ax
            tvy = oy - ay
            tvz = oz - az
            u = (tvx * px + tvy * py + tvz * pz) * inv
            if u < -BARY_EPS or u > 1.0 + BARY_EPS:
                continue
            qx = tvy * e1z - tvz * e1y
            qy = tvz * e1x - tvx * e1z
            qz = tvx * e1y - tvy * e1x
            v = (dx * qx + dy * qy + dz * qz) * inv
            if v < -BARY_EPS or u + v > 1.0 + BARY_EPS:
                continue
            t = (e2x * qx + e2y * qy + e2z * qz) * inv
            if t < T_MIN or t >= best_t:
                continue
            hx = ox + t * dx
            hy = oy + t * dy
            hz = oz + t * dz
            if (
                box_lo[0] <= hx <= box_hi[0]
                and box_lo[1] <= hy <= box_hi[1]
                and box_lo[2] <= hz <= box_hi[2]
                and hy <= ymax
            ):
                best_t = t
                best_i = i
        return best_t, best_i


def split_mesh_axis(vertices, triangles, axis, cut, plane_to_below=True):
    """Dispatching wrapper, see :func:`_split_mesh_axis_np` for semantics."""
    vertices = np.ascontiguousarray(vertices, dtype=np.float64)
    triangles = np.ascontiguousarray(triangles, dtype=np.int64)
    if USE_NUMBA:
        return _split_mesh_axis_nb(vertices, triangles, axis, cut, plane_to_below)
    return _split_mesh_axis_np(vertices, triangles, axis, cut, plane_to_below)


def first_hit_in_region(vertices, triangles, origin, direction, box_lo, box_hi, ymax):
    """Dispatching wrapper, see :func:`_first_hit_np` for semantics."""
    vertices = np.ascontiguousarray(vertices, dtype=np.float64)
    triangles = np.ascontiguousarray(triangles, dtype=np.int64)
    origin = np.asarray(origin, dtype=np.float64)
    direction = np.asarray(direction, dtype=np.float64)
    box_lo = np.asarray(box_lo, dtype=np.float64)
    box_hi = np.asarray(box_hi, dtype=np.float64)
    if USE_NUMBA:
        t, i = _first_hit_nb(vertices, triangles, origin, direction, box_lo, box_hi, ymax)
        return float(t), int(i)
    return _first_hit_np(vertices, triangles, origin, direction, box_lo, box_hi, ymax)
