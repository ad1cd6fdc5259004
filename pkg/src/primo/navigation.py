"""Progressive-refinement navigation: the focus stack, the two selection
styles, display modes, clip-plane state, and the animated scale-by-2
descents and ascents.

State transitions are pure: each takes a :class:`NavState` value and returns
a new one (plus an accepted/rejected flag where inputs can be refused).
Identical event sequences therefore produce bit-identical states, which the
replay harness in :mod:`primo.study` relies on.

The object always occupies the unit cube in object space and the stage is
the unit cube in world space, so at rest the transform maps the current
focus box exactly onto ``[0, 1]^3`` and the scale at depth k is exactly
``2.0 ** k``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Tuple

import numpy as np

from . import _kernels
from .geometry import (
    IDENTITY,
    UNIT_CUBE,
    Aabb,
    Plane1D,
    Ray,
    Similarity,
    Vec3,
    focus_to_stage,
    interpolate,
    octant_aabb,
    pick_child_octant,
)
from .object_model import DefectRegion, TriangleMesh, clip_mesh, crop_mesh

STAGE = UNIT_CUBE


class Style(str, enum.Enum):
    STRUCTURED = "structured"
    UNSTRUCTURED = "unstructured"


class Display(str, enum.Enum):
    SELECTION = "selection"
    EVERYTHING = "everything"


class AimKind(str, enum.Enum):
    OCTANT_HIGHLIGHT = "octant_highlight"
    CURSOR_CUBE = "cursor_cube"


@dataclass(frozen=True)
class NavConfig:
    style: Style
    display: Display
    max_depth: int = 3
    scale_factor: float = 2.0
    animation_ms: float = 500.0

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.animation_ms <= 0:
            raise ValueError("animation_ms must be positive")
        if self.scale_factor <= 1.0:
            raise ValueError("scale_factor must exceed 1")
        if self.style is Style.STRUCTURED and self.scale_factor != 2.0:
            raise ValueError("octant subdivision fixes scale_factor at 2")


@dataclass(frozen=True)
class FocusFrame:
    box: Aabb
    kind: str  # "octant" | "freeform"
    octant: Optional[int] = None
    center: Optional[Vec3] = None


@dataclass(frozen=True)
class AimResult:
    valid: bool
    kind: AimKind
    octant: Optional[int] = None
    cube: Optional[Aabb] = None
    #: original hit point; the retained cursor re-centers on it (re-clamped)
    #: after every descent so repeated confirms keep converging on it
    anchor: Optional[Vec3] = None


@dataclass(frozen=True)
class Animation:
    from_t: Similarity
    to_t: Similarity
    elapsed_ms: float


@dataclass(frozen=True)
class RenderPiece:
    mesh: TriangleMesh = field(compare=False)
    tint: Optional[Tuple[float, float, float]]
    clipped: bool


@dataclass(frozen=True)
class RenderSet:
    pieces: Tuple[RenderPiece, ...]


@dataclass(frozen=True)
class NavState:
    config: NavConfig
    mesh: TriangleMesh = field(compare=False, repr=False)
    defects: Tuple[DefectRegion, ...]
    stack: Tuple[FocusFrame, ...]
    transform: Similarity
    animation: Optional[Animation]
    clip: Plane1D
    cursor: Optional[AimResult]

    @property
    def depth(self) -> int:
        return len(self.stack)

    @property
    def focus(self) -> Aabb:
        return self.stack[-1].box if self.stack else UNIT_CUBE


def new_session(
    config: NavConfig, object: TriangleMesh, defects: Sequence[DefectRegion] = ()
) -> NavState:
    """Fresh top-level state: identity transform, clip fully raised."""
    return NavState(
        config=config,
        mesh=object,
        defects=tuple(defects),
        stack=(),
        transform=IDENTITY,
        animation=None,
        clip=Plane1D(1.0),
        cursor=None,
    )


def _ray_capped_sphere(ray: Ray, center: Vec3, radius: float, ymax: float) -> Optional[float]:
    """Nearest t at which the ray meets the clip-capped solid sphere.

    The pickable solid is the sphere portion with y <= ymax plus, when the
    plane cuts the sphere, the flat cap disk at y = ymax.  Returns None when
    nothing is hit in front of the origin.
    """
    o, d = ray.origin, ray.direction
    fx, fy, fz = o.x - center.x, o.y - center.y, o.z - center.z
    a = d.x * d.x + d.y * d.y + d.z * d.z
    if a == 0.0:
        return None
    b = 2.0 * (fx * d.x + fy * d.y + fz * d.z)
    c = fx * fx + fy * fy + fz * fz - radius * radius
    best = math.inf
    disc = b * b - 4.0 * a * c
    if disc >= 0.0:
        root = math.sqrt(disc)
        for t in ((-b - root) / (2.0 * a), (-b + root) / (2.0 * a)):
            if t >= _kernels.T_MIN and o.y + t * d.y <= ymax and t < best:
                best = t
    # cap disk where the plane cuts the sphere
    dy_c = ymax - center.y
    if abs(dy_c) < radius and d.y != 0.0:
        t = (ymax - o.y) / d.y
        if _kernels.T_MIN <= t < best:
            hx = o.x + t * d.x - center.x
            hz = o.z + t * d.z - center.z
            if hx * hx + hz * hz <= radius * radius - dy_c * dy_c:
                best = t
    return best if math.isfinite(best) else None


def _clip_height_object(state: NavState) -> float:
    t = state.transform
    return (state.clip.height - t.translation.y) / t.scale


def aim(state: NavState, ray: Ray) -> Tuple[NavState, AimResult]:
    """Point the selection ray; returns the state with an updated cursor.

    During an animation the input is ignored (state unchanged, invalid
    result).  STRUCTURED picks the first child octant the ray touches;
    UNSTRUCTURED casts at the visible geometry of the focus region (mesh
    surface restricted to the focus box and the clip plane, plus the
    clip-capped defect solids, which win exact ties) and floats a half-size
    cursor cube at the hit point, clamped to stay inside the focus.
    A miss leaves the state unchanged.
    """
    if state.animation is not None:
        return state, AimResult(valid=False, kind=_aim_kind(state.config.style))
    focus = state.focus
    ray_obj = state.transform.invert().apply_ray(ray)

    if state.config.style is Style.STRUCTURED:
        idx = pick_child_octant(ray_obj, focus)
        if idx is None:
            return state, AimResult(valid=False, kind=AimKind.OCTANT_HIGHLIGHT)
        result = AimResult(
            valid=True,
            kind=AimKind.OCTANT_HIGHLIGHT,
            octant=idx,
            cube=octant_aabb(focus, idx),
        )
        return replace(state, cursor=result), result

    ymax = _clip_height_object(state)
    lo = np.array(focus.lo, dtype=np.float64)
    hi = np.array(focus.hi, dtype=np.float64)
    t_tri, _ = _kernels.first_hit_in_region(
        state.mesh.vertices,
        state.mesh.triangles,
        np.array(ray_obj.origin, dtype=np.float64),
        np.array(ray_obj.direction, dtype=np.float64),
        lo,
        hi,
        ymax,
    )
    best_t = t_tri
    for defect in state.defects:
        t_d = _ray_capped_sphere(ray_obj, defect.center, defect.radius, ymax)
        if t_d is None or t_d > best_t:
            continue
        p = _point_on_ray(ray_obj, t_d)
        if focus.contains(p) and p.y <= ymax:
            best_t = t_d
    if not math.isfinite(best_t):
        return state, AimResult(valid=False, kind=AimKind.CURSOR_CUBE)
    anchor = _point_on_ray(ray_obj, best_t)
    result = _cursor_at(anchor, focus, state.config.scale_factor)
    return replace(state, cursor=result), result


def _point_on_ray(ray: Ray, t: float) -> Vec3:
    o, d = ray.origin, ray.direction
    return Vec3(o.x + t * d.x, o.y + t * d.y, o.z + t * d.z)


def _aim_kind(style: Style) -> AimKind:
    return AimKind.OCTANT_HIGHLIGHT if style is Style.STRUCTURED else AimKind.CURSOR_CUBE


def _cursor_at(anchor: Vec3, focus: Aabb, factor: float) -> AimResult:
    side = focus.side / factor
    half = side / 2.0
    cx = min(max(anchor.x, focus.lo.x + half), focus.hi.x - half)
    cy = min(max(anchor.y, focus.lo.y + half), focus.hi.y - half)
    cz = min(max(anchor.z, focus.lo.z + half), focus.hi.z - half)
    cube = Aabb(Vec3(cx - half, cy - half, cz - half), Vec3(cx + half, cy + half, cz + half))
    return AimResult(valid=True, kind=AimKind.CURSOR_CUBE, cube=cube, anchor=anchor)


def confirm(state: NavState) -> Tuple[NavState, bool]:
    """Descend into the aimed selection, starting the scale animation.

    Rejected (state unchanged, False) while animating, without a valid
    cursor, or at max depth.  In UNSTRUCTURED style the cursor survives the
    descent: a half-size cube re-centered on the original anchor point,
    clamped into the new focus, so one placement can be ridden down several
    levels with bare confirms.
    """
    if state.animation is not None or state.cursor is None or not state.cursor.valid:
        return state, False
    if state.depth >= state.config.max_depth:
        return state, False

    cursor = state.cursor
    box = cursor.cube
    if cursor.kind is AimKind.OCTANT_HIGHLIGHT:
        frame = FocusFrame(box=box, kind="octant", octant=cursor.octant)
        next_cursor = None
    else:
        frame = FocusFrame(box=box, kind="freeform", center=box.center)
        next_cursor = _cursor_at(cursor.anchor, box, state.config.scale_factor)
    target = focus_to_stage(box, STAGE)
    return (
        replace(
            state,
            stack=state.stack + (frame,),
            animation=Animation(state.transform, target, 0.0),
            cursor=next_cursor,
        ),
        True,
    )


def ascend(state: NavState) -> Tuple[NavState, bool]:
    """Pop back to the parent focus; rejected at the top or while animating."""
    if state.animation is not None or not state.stack:
        return state, False
    stack = state.stack[:-1]
    parent = stack[-1].box if stack else UNIT_CUBE
    target = focus_to_stage(parent, STAGE)
    return (
        replace(
            state,
            stack=stack,
            animation=Animation(state.transform, target, 0.0),
            cursor=None,
        ),
        True,
    )


def set_clip_height(state: NavState, h: float) -> NavState:
    """Move the clip plane; the height is clamped to [0, 1] stage space and
    persists across descents and ascents.  Allowed at any time."""
    return replace(state, clip=Plane1D(min(max(h, 0.0), 1.0)))


def tick(state: NavState, dt_ms: float) -> NavState:
    """Advance animation time; at completion the transform snaps exactly to
    the target and the animation slot clears."""
    if dt_ms < 0:
        raise ValueError("dt_ms must be non-negative")
    anim = state.animation
    if anim is None:
        return state
    elapsed = anim.elapsed_ms + dt_ms
    total = state.config.animation_ms
    if elapsed >= total:
        return replace(state, transform=anim.to_t, animation=None)
    return replace(
        state,
        transform=interpolate(anim.from_t, anim.to_t, elapsed / total),
        animation=replace(anim, elapsed_ms=elapsed),
    )


def octant_colors() -> Tuple[Tuple[float, float, float], ...]:
    """Top-level octant palette: the 8 RGB-cube corners (index bits map to
    the r/g/b channels) with black replaced by gray and white by orange."""
    colors = []
    for i in range(8):
        rgb = (float(i & 1), float((i >> 1) & 1), float((i >> 2) & 1))
        if rgb == (0.0, 0.0, 0.0):
            rgb = (0.35, 0.35, 0.35)
        elif rgb == (1.0, 1.0, 1.0):
            rgb = (1.0, 0.6, 0.1)
        colors.append(rgb)
    return tuple(colors)


def visible_set(state: NavState, object: TriangleMesh) -> RenderSet:
    """What the screen should show for the current state.

    At the top level both display modes present the whole object as the 8
    tinted octant pieces.  Deeper, SELECTION shows only the focus-cropped
    geometry and EVERYTHING the whole object, both untinted and both cut by
    the clip plane.
    """
    plane = state.clip
    to_world = state.transform
    pieces = []
    if state.depth == 0:
        palette = octant_colors()
        for idx in range(8):
            piece = crop_mesh(object, octant_aabb(UNIT_CUBE, idx))
            clipped = clip_mesh(piece, plane, to_world)
            pieces.append(
                RenderPiece(
                    mesh=clipped.visible,
                    tint=palette[idx],
                    clipped=clipped.hidden.n_triangles > 0,
                )
            )
    else:
        if state.config.display is Display.SELECTION:
            base = crop_mesh(object, state.focus)
        else:
            base = object
        clipped = clip_mesh(base, plane, to_world)
        pieces.append(
            RenderPiece(
                mesh=clipped.visible,
                tint=None,
                clipped=clipped.hidden.n_triangles > 0,
            )
        )
    return RenderSet(pieces=tuple(pieces))


def reveal_defect(state: NavState, defects: Sequence[DefectRegion]) -> Optional[int]:
    """Defect id whose sphere lies wholly inside the focus at max depth."""
    if state.depth != state.config.max_depth:
        return None
    box = state.focus
    for d in defects:
        c, r = d.center, d.radius
        if (
            box.lo.x <= c.x - r and c.x + r <= box.hi.x
            and box.lo.y <= c.y - r and c.y + r <= box.hi.y
            and box.lo.z <= c.z - r and c.z + r <= box.hi.z
        ):
            return d.id
    return None
