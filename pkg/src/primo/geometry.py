"""Axis-aligned spatial math for progressive-refinement navigation.

Everything here works on plain Python scalars and small named tuples so the
results are bit-reproducible and trivially serializable.  The object lives in
the unit cube ``[0, 1]^3`` ("object space"); a :class:`Similarity` maps object
space onto the fixed stage box in world space.  Because every focus box is an
octree cell with dyadic bounds, the magnification at subdivision depth ``k``
is exactly ``2.0 ** k`` in floating point, not merely close to it.
"""

from __future__ import annotations

import logging
import math
from typing import NamedTuple, Optional, Tuple

log = logging.getLogger(__name__)

#: Relative tolerance used when checking that a box is a cube.
CUBE_RTOL = 1e-9

#: Octree path: child indices from the root downwards.  Empty path = root.
OctPath = Tuple[int, ...]


class Vec3(NamedTuple):
    x: float
    y: float
    z: float


class Aabb(NamedTuple):
    """Axis-aligned box, ``lo`` strictly below ``hi`` on every axis."""

    lo: Vec3
    hi: Vec3

    @property
    def size(self) -> Vec3:
        return Vec3(self.hi.x - self.lo.x, self.hi.y - self.lo.y, self.hi.z - self.lo.z)

    @property
    def center(self) -> Vec3:
        return Vec3(
            (self.lo.x + self.hi.x) / 2.0,
            (self.lo.y + self.hi.y) / 2.0,
            (self.lo.z + self.hi.z) / 2.0,
        )

    @property
    def side(self) -> float:
        """Edge length, valid only for cubes (see :func:`require_cube`)."""
        return self.hi.x - self.lo.x

    def contains(self, p: Vec3) -> bool:
        """Closed-box membership test."""
        return (
            self.lo.x <= p.x <= self.hi.x
            and self.lo.y <= p.y <= self.hi.y
            and self.lo.z <= p.z <= self.hi.z
        )

    def contains_box(self, other: "Aabb") -> bool:
        return self.contains(other.lo) and self.contains(other.hi)


class Ray(NamedTuple):
    origin: Vec3
    direction: Vec3


class Plane1D(NamedTuple):
    """Horizontal clip plane constrained to vertical movement: everything
    above ``height`` (stage-space y) is hidden."""

    height: float


class Similarity(NamedTuple):
    """Rotation-free similarity transform ``world = scale * p + translation``."""

    scale: float
    translation: Vec3

    def apply(self, p: Vec3) -> Vec3:
        s, t = self.scale, self.translation
        return Vec3(s * p.x + t.x, s * p.y + t.y, s * p.z + t.z)

    def apply_box(self, box: Aabb) -> Aabb:
        return Aabb(self.apply(box.lo), self.apply(box.hi))

    def invert(self) -> "Similarity":
        s, t = self.scale, self.translation
        return Similarity(1.0 / s, Vec3(-t.x / s, -t.y / s, -t.z / s))

    def apply_ray(self, ray: Ray) -> Ray:
        """Transform a ray; the direction is unscaled so the parameter t is
        preserved up to the uniform scale factor, which keeps ordering."""
        return Ray(self.apply(ray.origin), ray.direction)


IDENTITY = Similarity(1.0, Vec3(0.0, 0.0, 0.0))
UNIT_CUBE = Aabb(Vec3(0.0, 0.0, 0.0), Vec3(1.0, 1.0, 1.0))


def require_cube(box: Aabb, what: str = "box") -> float:
    """Return the edge length of ``box``, raising ValueError if it is not a
    cube within ``CUBE_RTOL`` or has non-positive extent."""
    sx, sy, sz = box.size
    m = max(sx, sy, sz)
    if m <= 0.0:
        raise ValueError(f"{what} has non-positive extent: {box}")
    if abs(sx - sy) > CUBE_RTOL * m or abs(sx - sz) > CUBE_RTOL * m:
        raise ValueError(f"{what} is not a cube: sides ({sx}, {sy}, {sz})")
    return sx


def octant_aabb(parent: Aabb, index: int) -> Aabb:
    """Child cube ``index`` of a cubic ``parent``.

    Index bits select the upper half per axis: bit 0 for x, bit 1 for y,
    bit 2 for z.  Index 0 is the (-x, -y, -z) corner child, index 7 the
    (+x, +y, +z) one.
    """
    require_cube(parent, "parent")
    if not 0 <= index < 8:
        raise ValueError(f"octant index out of range: {index}")
    lo, hi = parent
    mx = (lo.x + hi.x) / 2.0
    my = (lo.y + hi.y) / 2.0
    mz = (lo.z + hi.z) / 2.0
    return Aabb(
        Vec3(mx if index & 1 else lo.x, my if index & 2 else lo.y, mz if index & 4 else lo.z),
        Vec3(hi.x if index & 1 else mx, hi.y if index & 2 else my, hi.z if index & 4 else mz),
    )


def path_to_aabb(root: Aabb, path: OctPath) -> Aabb:
    """Resolve a root-first octree path to its cell box."""
    box = root
    for index in path:
        box = octant_aabb(box, index)
    return box


def locate_point(root: Aabb, depth: int, p: Vec3) -> OctPath:
    """Path of the depth-``depth`` cell containing ``p``.

    Points exactly on an internal midplane belong to the lower-index child,
    so the mapping is total on the closed root cube.
    """
    if depth < 0:
        raise ValueError(f"depth must be non-negative: {depth}")
    require_cube(root, "root")
    if not root.contains(p):
        raise ValueError(f"point {p} outside root {root}")
    path = []
    box = root
    for _ in range(depth):
        c = box.center
        index = (1 if p.x > c.x else 0) | (2 if p.y > c.y else 0) | (4 if p.z > c.z else 0)
        path.append(index)
        box = octant_aabb(box, index)
    return tuple(path)


def ray_aabb(ray: Ray, box: Aabb) -> Optional[Tuple[float, float]]:
    """Slab-method ray/box intersection.

    Returns ``(t_enter, t_exit)`` when the ray meets the closed box at some
    parameter ``t >= 0``, else None.  ``t_enter`` is negative when the origin
    is inside the box; callers that need the visible entry point should clamp
    it to zero themselves.
    """
    t0 = -math.inf
    t1 = math.inf
    for o, d, lo, hi in (
        (ray.origin.x, ray.direction.x, box.lo.x, box.hi.x),
        (ray.origin.y, ray.direction.y, box.lo.y, box.hi.y),
        (ray.origin.z, ray.direction.z, box.lo.z, box.hi.z),
    ):
        if d == 0.0:
            if o < lo or o > hi:
                return None
        else:
            ta = (lo - o) / d
            tb = (hi - o) / d
            if ta > tb:
                ta, tb = tb, ta
            if ta > t0:
                t0 = ta
            if tb < t1:
                t1 = tb
            if t0 > t1:
                return None
    if t1 < 0.0:
        return None
    return (t0, t1)


def pick_child_octant(ray: Ray, focus: Aabb) -> Optional[int]:
    """Index of the first child cube of ``focus`` hit by ``ray``.

    The winner has the smallest entry parameter; an origin inside a child
    yields a negative entry parameter and therefore wins over any child in
    front of the origin.  Exact ties go to the lowest index.
    """
    require_cube(focus, "focus")
    best = None
    best_t = math.inf
    for index in range(8):
        hit = ray_aabb(ray, octant_aabb(focus, index))
        if hit is not None and hit[0] < best_t:
            best = index
            best_t = hit[0]
    return best


def focus_to_stage(focus: Aabb, stage: Aabb) -> Similarity:
    """Similarity that maps the cubic ``focus`` exactly onto the cubic
    ``stage``: ``scale = stage.side / focus.side`` and the translation sends
    ``focus.lo`` to ``stage.lo``."""
    fs = require_cube(focus, "focus")
    ss = require_cube(stage, "stage")
    s = ss / fs
    return Similarity(
        s,
        Vec3(
            stage.lo.x - s * focus.lo.x,
            stage.lo.y - s * focus.lo.y,
            stage.lo.z - s * focus.lo.z,
        ),
    )


def interpolate(a: Similarity, b: Similarity, u: float) -> Similarity:
    """Blend two similarities for animation.

    The scale moves along a geometric (log-space) path so a zoom looks
    uniform per unit time; the translation is blended linearly.  ``u`` is
    clamped to ``[0, 1]`` and the endpoints are returned exactly.
    """
    if a.scale <= 0.0 or b.scale <= 0.0:
        raise ValueError("interpolate requires positive scales")
    if u <= 0.0 or u >= 1.0:
        if u < 0.0 or u > 1.0:
            log.debug("interpolation parameter %r clamped to [0, 1]", u)
        return a if u <= 0.0 else b
    s = math.exp((1.0 - u) * math.log(a.scale) + u * math.log(b.scale))
    at, bt = a.translation, b.translation
    v = 1.0 - u
    return Similarity(s, Vec3(v * at.x + u * bt.x, v * at.y + u * bt.y, v * at.z + u * bt.z))
