"""The inspected object: mesh ingestion, procedural lattices, exact plane
clipping, subvolume cropping, defect regions, and target rod markers.

Meshes are plain numpy arrays (float64 vertices, int64 triangle indices) in
object space, the unit cube ``[0, 1]^3``.  All clipping and cropping happens
on the CPU with exact triangle splitting so that headless invariants (area
conservation, containment) can be checked without a renderer.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import _kernels
from .geometry import Aabb, OctPath, Plane1D, Similarity, Vec3, octant_aabb, UNIT_CUBE

LATTICE_PATTERNS = ("grid-struts", "gyroid-approx")

#: Defect sphere radius as a fraction of its lowest-level cell side; 0.3
#: keeps the sphere strictly inside the cell with margin.
DEFECT_RADIUS_FRACTION = 0.3

#: Fraction of the unit cube spanned by an ingested mesh (2% margin per side).
_FIT_SPAN = 0.96


class MeshParseError(ValueError):
    """Malformed mesh file; carries the 1-based line (or byte offset)."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{where}")


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Indexed triangle soup in object space."""

    vertices: np.ndarray  # (n, 3) float64
    triangles: np.ndarray  # (m, 3) int64

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=np.float64)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValueError(f"vertices must be (n, 3), got {v.shape}")
        if t.ndim != 2 or t.shape[1] != 3:
            raise ValueError(f"triangles must be (m, 3), got {t.shape}")
        if t.size and (t.min() < 0 or t.max() >= v.shape[0]):
            raise ValueError("triangle indices out of range")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    def bounds(self) -> Aabb:
        if self.n_vertices == 0:
            raise ValueError("empty mesh has no bounds")
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return Aabb(Vec3(*lo.tolist()), Vec3(*hi.tolist()))


def triangle_areas(mesh: TriangleMesh) -> np.ndarray:
    a = mesh.vertices[mesh.triangles[:, 0]]
    e1 = mesh.vertices[mesh.triangles[:, 1]] - a
    e2 = mesh.vertices[mesh.triangles[:, 2]] - a
    cross = np.cross(e1, e2)
    return 0.5 * np.sqrt((cross * cross).sum(axis=1))


def total_area(mesh: TriangleMesh) -> float:
    return float(triangle_areas(mesh).sum())


@dataclass(frozen=True)
class LoadResult:
    mesh: TriangleMesh
    to_unit: Similarity  # normalization applied to the raw coordinates
    dropped_triangles: int


@dataclass(frozen=True)
class LatticeSpec:
    cells_per_axis: int
    strut_thickness: float
    pattern: str = "grid-struts"


@dataclass(frozen=True)
class DefectRegion:
    id: int
    center: Vec3
    radius: float
    cell_path: OctPath


@dataclass(frozen=True)
class RodMarker:
    axis: str  # "x" | "y" | "z"
    through: Vec3


@dataclass(frozen=True, eq=False)
class ClippedMesh:
    """Result of clipping: both sides of the cut plus the section outline.

    ``visible`` and ``hidden`` share one vertex buffer (the input vertices
    followed by the split points); ``cross_section_edges`` is an ``(k, 2, 3)``
    array of world-space segments lying in the plane.
    """

    visible: TriangleMesh
    hidden: TriangleMesh
    cross_section_edges: np.ndarray


# ---------------------------------------------------------------------------
# ingestion
# ---------------------------------------------------------------------------

def _parse_obj(text: str) -> Tuple[np.ndarray, np.ndarray]:
    vertices: List[Tuple[float, float, float]] = []
    faces: List[Tuple[int, int, int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            if len(parts) < 4:
                raise MeshParseError("vertex needs 3 coordinates", lineno)
            try:
                vertices.append((float(parts[1]), float(parts[2]), float(parts[3])))
            except ValueError:
                raise MeshParseError("bad vertex coordinate", lineno) from None
        elif tag == "f":
            if len(parts) < 4:
                raise MeshParseError("face needs at least 3 vertices", lineno)
            idx = []
            for tok in parts[1:]:
                head = tok.split("/")[0]
                try:
                    v = int(head)
                except ValueError:
                    raise MeshParseError(f"bad face index {head!r}", lineno) from None
                if v < 0:
                    v = len(vertices) + 1 + v
                if not 1 <= v <= len(vertices):
                    raise MeshParseError(f"face index {head} out of range", lineno)
                idx.append(v - 1)
            for k in range(1, len(idx) - 1):
                faces.append((idx[0], idx[k], idx[k + 1]))
        # every other record type (vn, vt, g, o, s, usemtl, ...) is ignored
    verts = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
    tris = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    return verts, tris


def _weld(soup: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Merge exactly-equal vertices of a (3m, 3) triangle soup."""
    verts, inverse = np.unique(soup, axis=0, return_inverse=True)
    return verts, inverse.reshape(-1, 3).astype(np.int64)


def _parse_stl_binary(data: bytes) -> Tuple[np.ndarray, np.ndarray]:
    if len(data) < 84:
        raise MeshParseError("binary STL shorter than its 84-byte preamble")
    (count,) = struct.unpack_from("<I", data, 80)
    expected = 84 + 50 * count
    if len(data) != expected:
        raise MeshParseError(
            f"binary STL length {len(data)} != {expected} for {count} facets"
        )
    facet = np.dtype(
        [("normal", "<f4", (3,)), ("verts", "<f4", (3, 3)), ("attr", "<u2")]
    )
    body = np.frombuffer(data, dtype=facet, count=count, offset=84)
    soup = body["verts"].astype(np.float64).reshape(-1, 3)
    return _weld(soup)


def _parse_stl_ascii(text: str) -> Tuple[np.ndarray, np.ndarray]:
    soup: List[float] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        parts = raw.split()
        if not parts:
            continue
        if parts[0] == "vertex":
            if len(parts) < 4:
                raise MeshParseError("vertex needs 3 coordinates", lineno)
            try:
                soup.extend((float(parts[1]), float(parts[2]), float(parts[3])))
            except ValueError:
                raise MeshParseError("bad vertex coordinate", lineno) from None
    coords = np.asarray(soup, dtype=np.float64)
    if coords.size % 9 != 0:
        raise MeshParseError(f"ASCII STL vertex count {coords.size // 3} not a multiple of 3")
    return _weld(coords.reshape(-1, 3))


def load_mesh(data: bytes, fmt: str) -> LoadResult:
    """Parse and normalize a mesh file.

    Parameters
    ----------
    data : bytes
        Raw file content.
    fmt : {"obj", "stl-binary", "stl-ascii"}

    Returns
    -------
    LoadResult
        The cleaned mesh fitted to ``[0, 1]^3`` with a 2% margin, the
        similarity that was applied to the raw coordinates, and the number
        of degenerate (zero-area) triangles dropped.

    Raises
    ------
    MeshParseError
        On malformed input.
    ValueError
        When no non-degenerate triangle remains.
    """
    if fmt == "obj":
        verts, tris = _parse_obj(data.decode("utf-8", errors="replace"))
    elif fmt == "stl-binary":
        verts, tris = _parse_stl_binary(data)
    elif fmt == "stl-ascii":
        verts, tris = _parse_stl_ascii(data.decode("utf-8", errors="replace"))
    else:
        raise ValueError(f"unknown mesh format {fmt!r}")

    dropped = 0
    if tris.shape[0]:
        mesh = TriangleMesh(verts, tris)
        keep = triangle_areas(mesh) > 0.0
        dropped = int((~keep).sum())
        tris = tris[keep]
    if tris.shape[0] == 0:
        raise ValueError("mesh has no non-degenerate triangles")

    used = np.unique(tris)
    remap = np.full(verts.shape[0], -1, dtype=np.int64)
    remap[used] = np.arange(used.shape[0])
    verts = verts[used]
    tris = remap[tris]

    lo = verts.min(axis=0)
    hi = verts.max(axis=0)
    extent = float((hi - lo).max())
    if extent <= 0.0:
        raise ValueError("mesh is a single point")
    scale = _FIT_SPAN / extent
    center = (lo + hi) / 2.0
    translation = 0.5 - scale * center
    to_unit = Similarity(scale, Vec3(*translation.tolist()))
    verts = scale * verts + translation
    return LoadResult(TriangleMesh(verts, tris), to_unit, dropped)


def save_obj(mesh: TriangleMesh) -> str:
    """Serialize as ASCII OBJ (exact float repr, 1-based indices)."""
    lines = []
    for x, y, z in mesh.vertices.tolist():
        lines.append(f"v {x!r} {y!r} {z!r}")
    for a, b, c in mesh.triangles.tolist():
        lines.append(f"f {a + 1} {b + 1} {c + 1}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# procedural lattices
# ---------------------------------------------------------------------------

# 12 triangles of an axis-aligned box whose 8 corners are ordered by the
# octant bit convention (bit0=x, bit1=y, bit2=z); outward winding.
_BOX_TRIS = np.array(
    [
        (0, 2, 3), (0, 3, 1),  # z = lo
        (4, 5, 7), (4, 7, 6),  # z = hi
        (0, 1, 5), (0, 5, 4),  # y = lo
        (2, 6, 7), (2, 7, 3),  # y = hi
        (0, 4, 6), (0, 6, 2),  # x = lo
        (1, 3, 7), (1, 7, 5),  # x = hi
    ],
    dtype=np.int64,
)


def _validate_lattice(spec: LatticeSpec) -> float:
    if spec.pattern not in LATTICE_PATTERNS:
        raise ValueError(f"unknown lattice pattern {spec.pattern!r}")
    if spec.cells_per_axis < 1:
        raise ValueError("cells_per_axis must be >= 1")
    cell = 1.0 / spec.cells_per_axis
    if not 0.0 < spec.strut_thickness < 0.5 * cell:
        raise ValueError(
            f"strut_thickness must lie in (0, {0.5 * cell}) for "
            f"{spec.cells_per_axis} cells per axis"
        )
    return cell


def _boxes_to_mesh(lo: np.ndarray, hi: np.ndarray) -> TriangleMesh:
    """Triangulate ``k`` boxes given as (k, 3) corner arrays."""
    k = lo.shape[0]
    corners = np.arange(8)
    pickx = (corners & 1).astype(bool)
    picky = (corners & 2).astype(bool)
    pickz = (corners & 4).astype(bool)
    verts = np.empty((k, 8, 3), dtype=np.float64)
    verts[:, :, 0] = np.where(pickx[None, :], hi[:, 0:1], lo[:, 0:1])
    verts[:, :, 1] = np.where(picky[None, :], hi[:, 1:2], lo[:, 1:2])
    verts[:, :, 2] = np.where(pickz[None, :], hi[:, 2:3], lo[:, 2:3])
    tris = _BOX_TRIS[None, :, :] + 8 * np.arange(k, dtype=np.int64)[:, None, None]
    return TriangleMesh(verts.reshape(-1, 3), tris.reshape(-1, 3))


def _grid_struts(spec: LatticeSpec) -> TriangleMesh:
    n = spec.cells_per_axis
    cell = 1.0 / n
    half = spec.strut_thickness / 2.0
    lines = np.arange(n + 1) * cell  # boundary coordinates
    segs = np.arange(n) * cell  # segment starts
    all_lo = []
    all_hi = []
    for axis in range(3):
        u, v = [a for a in range(3) if a != axis]
        J, K, I = np.meshgrid(lines, lines, segs, indexing="ij")
        lo = np.empty(J.shape + (3,))
        hi = np.empty(J.shape + (3,))
        lo[..., axis] = I
        hi[..., axis] = I + cell
        lo[..., u] = np.maximum(0.0, J - half)
        hi[..., u] = np.minimum(1.0, J + half)
        lo[..., v] = np.maximum(0.0, K - half)
        hi[..., v] = np.minimum(1.0, K + half)
        all_lo.append(lo.reshape(-1, 3))
        all_hi.append(hi.reshape(-1, 3))
    return _boxes_to_mesh(np.concatenate(all_lo), np.concatenate(all_hi))


def _gyroid_approx(spec: LatticeSpec) -> TriangleMesh:
    from skimage import measure

    n = spec.cells_per_axis
    res = max(33, 12 * n + 1)
    g = np.linspace(0.0, 1.0, res)
    x, y, z = np.meshgrid(g, g, g, indexing="ij")
    w = 2.0 * np.pi * n
    surface = (
        np.sin(w * x) * np.cos(w * y)
        + np.sin(w * y) * np.cos(w * z)
        + np.sin(w * z) * np.cos(w * x)
    )
    tau = w * spec.strut_thickness
    if tau >= 1.0:
        raise ValueError("strut_thickness too large for the gyroid band")
    band = np.abs(surface) - tau
    spacing = 1.0 / (res - 1)
    verts, faces, _, _ = measure.marching_cubes(band, level=0.0, spacing=(spacing,) * 3)
    if verts.shape[0] == 0:
        raise ValueError("gyroid band produced an empty mesh")
    verts = np.clip(verts, 0.0, 1.0)
    return TriangleMesh(verts.astype(np.float64), faces.astype(np.int64))


def generate_lattice(spec: LatticeSpec) -> TriangleMesh:
    """Deterministic procedural lattice filling ``[0, 1]^3``.

    The ``grid-struts`` pattern places an axis-aligned square-section strut
    along every cell edge of the ``n^3`` grid: for each axis there are
    ``(n+1)^2`` boundary lines, each divided into ``n`` cell-length segments,
    giving ``3 n (n+1)^2`` struts of 8 vertices / 12 triangles each.  The
    ``gyroid-approx`` pattern extracts a triply periodic band via marching
    cubes; it is a stand-in with no exact count guarantees.
    """
    _validate_lattice(spec)
    if spec.pattern == "grid-struts":
        return _grid_struts(spec)
    return _gyroid_approx(spec)


# ---------------------------------------------------------------------------
# clipping and cropping
# ---------------------------------------------------------------------------

def clip_mesh(mesh: TriangleMesh, plane: Plane1D, to_world: Similarity) -> ClippedMesh:
    """Cut a mesh by the horizontal clip plane.

    Geometry at world height ``y <= plane.height`` stays visible; geometry
    above is hidden.  Crossing triangles are split exactly at the plane
    (1 + 2 sub-triangles, winding preserved), triangles lying entirely in
    the plane count as visible.

    Parameters
    ----------
    mesh : TriangleMesh
        Object-space geometry.
    plane : Plane1D
        Stage-space height of the cut.
    to_world : Similarity
        Current object-to-world transform; the plane is pulled back through
        it so the cut happens in object space.

    Returns
    -------
    ClippedMesh
        Visible and hidden halves over a shared vertex buffer, plus the
        section segments in world space.
    """
    h_obj = (plane.height - to_world.translation.y) / to_world.scale
    new_verts, below, above, segments = _kernels.split_mesh_axis(
        mesh.vertices, mesh.triangles, 1, h_obj, True
    )
    shared = np.concatenate([mesh.vertices, new_verts]) if new_verts.shape[0] else mesh.vertices
    world_segments = to_world.scale * segments + np.asarray(to_world.translation)
    return ClippedMesh(
        visible=TriangleMesh(shared, below),
        hidden=TriangleMesh(shared, above),
        cross_section_edges=world_segments,
    )


def crop_mesh(mesh: TriangleMesh, box: Aabb) -> TriangleMesh:
    """Cut away everything outside ``box`` (a cube inside the unit cube).

    The mesh is split successively against the six box planes with the same
    exact splitter as :func:`clip_mesh`; triangles on a box face are kept.
    The result is compacted to referenced vertices only.
    """
    verts = mesh.vertices
    tris = mesh.triangles
    cuts = (
        (0, box.lo.x, False), (0, box.hi.x, True),
        (1, box.lo.y, False), (1, box.hi.y, True),
        (2, box.lo.z, False), (2, box.hi.z, True),
    )
    for axis, cut, keep_below in cuts:
        if tris.shape[0] == 0:
            break
        new_verts, below, above, _ = _kernels.split_mesh_axis(verts, tris, axis, cut, keep_below)
        if new_verts.shape[0]:
            verts = np.concatenate([verts, new_verts])
        tris = below if keep_below else above

    if tris.shape[0] == 0:
        return TriangleMesh(np.empty((0, 3)), np.empty((0, 3), dtype=np.int64))
    used = np.unique(tris)
    remap = np.full(verts.shape[0], -1, dtype=np.int64)
    remap[used] = np.arange(used.shape[0])
    return TriangleMesh(verts[used], remap[tris])


# ---------------------------------------------------------------------------
# defects and markers
# ---------------------------------------------------------------------------

def place_defects(seed: int, depth: int, count: int) -> List[DefectRegion]:
    """Drop ``count`` spherical defect regions into distinct depth-``depth``
    octree cells.

    Each sphere sits at its cell center with radius
    ``DEFECT_RADIUS_FRACTION x cell side``, so it never touches a cell
    border.  Cells are drawn without replacement from a seeded generator;
    ids run 1..count in draw order.
    """
    if depth < 0:
        raise ValueError("depth must be non-negative")
    if count < 0:
        raise ValueError("count must be non-negative")
    m = 1 << depth
    capacity = m ** 3
    if count > capacity:
        raise ValueError(f"cannot place {count} defects in {capacity} cells at depth {depth}")
    rng = np.random.default_rng(seed)
    chosen: List[int] = []
    seen = set()
    while len(chosen) < count:
        lin = int(rng.integers(0, capacity))
        if lin not in seen:
            seen.add(lin)
            chosen.append(lin)
    cell = 1.0 / m
    out = []
    for rank, lin in enumerate(chosen, start=1):
        ix = lin % m
        iy = (lin // m) % m
        iz = lin // (m * m)
        path = tuple(
            (((ix >> (depth - 1 - level)) & 1)
             | (((iy >> (depth - 1 - level)) & 1) << 1)
             | (((iz >> (depth - 1 - level)) & 1) << 2))
            for level in range(depth)
        )
        center = Vec3((ix + 0.5) * cell, (iy + 0.5) * cell, (iz + 0.5) * cell)
        out.append(DefectRegion(rank, center, DEFECT_RADIUS_FRACTION * cell, path))
    return out


def rods_for_target(target: Vec3) -> Tuple[RodMarker, RodMarker, RodMarker]:
    """Three full-span axis-parallel rods intersecting at ``target``."""
    if not UNIT_CUBE.contains(target):
        raise ValueError(f"target {target} outside the unit cube")
    return (
        RodMarker("x", target),
        RodMarker("y", target),
        RodMarker("z", target),
    )
