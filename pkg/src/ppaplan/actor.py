"""Actor representations: patches, triangle meshes, cuboid primitive, animation."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import numpy as np

UNIT_TOL = 1e-9
AREA_TOL = 1e-12


class MeshLoadError(ValueError):
    """Raised when a mesh file cannot be parsed or violates mesh invariants."""


def wrap_angle(theta: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    w = math.remainder(theta, 2.0 * math.pi)
    if w <= -math.pi:
        w = math.pi
    return w


@dataclass(frozen=True)
class Patch:
    """Oriented planar surface element: centroid position plus unit normal."""

    centroid: np.ndarray
    normal: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.centroid, dtype=float).reshape(3)
        n = np.asarray(self.normal, dtype=float).reshape(3)
        if abs(np.linalg.norm(n) - 1.0) > UNIT_TOL:
            raise ValueError("patch normal must be unit length")
        object.__setattr__(self, "centroid", c)
        object.__setattr__(self, "normal", n)


@dataclass(frozen=True)
class ActorPose2D:
    """Ground-plane pose of the actor: position (x, y) and heading yaw."""

    x: float
    y: float
    yaw: float

    def __post_init__(self):
        object.__setattr__(self, "yaw", wrap_angle(float(self.yaw)))

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)

    @property
    def heading(self) -> np.ndarray:
        return np.array([math.cos(self.yaw), math.sin(self.yaw)], dtype=float)


@dataclass(frozen=True)
class CuboidSpec:
    """Cuboid actor primitive extents: width lateral, depth along heading."""

    width: float = 0.6
    depth: float = 0.4
    height: float = 1.8

    def __post_init__(self):
        if self.width <= 0 or self.depth <= 0 or self.height <= 0:
            raise ValueError("cuboid extents must be positive")


@dataclass(frozen=True)
class TriangleMesh:
    """Triangle mesh with per-triangle outward unit normals.

    Normals are re-derived from the stored winding, so ``normals[i]`` always
    equals the normalized cross product of the edges of ``triangles[i]``.
    """

    vertices: np.ndarray  # (N, 3) float
    triangles: np.ndarray  # (M, 3) int
    normals: np.ndarray = field(default=None)  # (M, 3) float

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=float).reshape(-1, 3))
        t = np.ascontiguousarray(np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3))
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise MeshLoadError("triangle vertex index out of range")
        n = _winding_normals(v, t)
        if self.normals is not None:
            stored = np.asarray(self.normals, dtype=float).reshape(-1, 3)
            if stored.shape != n.shape or np.abs(stored - n).max() > 1e-6:
                raise MeshLoadError("stored normals inconsistent with winding")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        object.__setattr__(self, "normals", n)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    def triangle_vertices(self) -> np.ndarray:
        """(M, 3, 3) array of triangle corner positions."""
        return self.vertices[self.triangles]

    def centroids(self) -> np.ndarray:
        return self.triangle_vertices().mean(axis=1)

    def transformed(self, pose: ActorPose2D) -> "TriangleMesh":
        """Rigidly place a local-frame mesh at a 2D ground pose."""
        c, s = math.cos(pose.yaw), math.sin(pose.yaw)
        rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        v = self.vertices @ rot.T + np.array([pose.x, pose.y, 0.0])
        return TriangleMesh(v, self.triangles)


def _winding_normals(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    tv = vertices[triangles]
    cross = np.cross(tv[:, 1] - tv[:, 0], tv[:, 2] - tv[:, 0])
    areas = 0.5 * np.linalg.norm(cross, axis=1)
    bad = np.nonzero(areas <= AREA_TOL)[0]
    if bad.size:
        raise MeshLoadError(f"degenerate triangle at index {bad[0]} (area <= {AREA_TOL})")
    return cross / (2.0 * areas)[:, None]


def _parse_obj(lines: list[str]) -> tuple[list, list]:
    verts, faces = [], []
    for lineno, line in enumerate(lines, start=1):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        if parts[0] == "v":
            if len(parts) < 4:
                raise MeshLoadError(f"OBJ line {lineno}: vertex needs 3 coordinates")
            verts.append([float(x) for x in parts[1:4]])
        elif parts[0] == "f":
            idx = [int(p.split("/")[0]) for p in parts[1:]]
            if len(idx) != 3:
                raise MeshLoadError(f"OBJ line {lineno}: non-triangular face ({len(idx)} vertices)")
            faces.append([i - 1 if i > 0 else len(verts) + i for i in idx])
    return verts, faces


def _parse_ply(lines: list[str]) -> tuple[list, list]:
    if not lines or lines[0].strip() != "ply":
        raise MeshLoadError("not a PLY file")
    n_vert = n_face = None
    vert_props = 0
    current = None
    i = 1
    for i, line in enumerate(lines[1:], start=1):
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "format":
            if parts[1] != "ascii":
                raise MeshLoadError("only ASCII PLY is supported")
        elif parts[0] == "element":
            current = parts[1]
            if current == "vertex":
                n_vert = int(parts[2])
            elif current == "face":
                n_face = int(parts[2])
        elif parts[0] == "property" and current == "vertex" and parts[1] != "list":
            vert_props += 1
        elif parts[0] == "end_header":
            break
    else:
        raise MeshLoadError("PLY header not terminated")
    if n_vert is None or n_face is None:
        raise MeshLoadError("PLY header missing vertex or face element")
    body = [l.split() for l in lines[i + 1:] if l.strip()]
    if len(body) < n_vert + n_face:
        raise MeshLoadError("PLY body truncated")
    verts = [[float(x) for x in row[:3]] for row in body[:n_vert]]
    faces = []
    for row in body[n_vert:n_vert + n_face]:
        cnt = int(row[0])
        if cnt != 3:
            raise MeshLoadError(f"non-triangular PLY face ({cnt} vertices)")
        faces.append([int(x) for x in row[1:4]])
    return verts, faces


def load_mesh(path, normal_orientation: str = "outward") -> TriangleMesh:
    """Load an ASCII OBJ or PLY triangle mesh.

    With ``normal_orientation='outward'`` each triangle's winding is flipped if
    needed so its normal points away from the mesh centroid; ``'as-stored'``
    keeps the file's winding.
    """
    if normal_orientation not in ("outward", "as-stored"):
        raise ValueError(f"unknown normal_orientation {normal_orientation!r}")
    with open(path) as f:
        lines = f.read().splitlines()
    text = "\n".join(lines[:1]).strip()
    if text == "ply":
        verts, faces = _parse_ply(lines)
    else:
        verts, faces = _parse_obj(lines)
    if not verts or not faces:
        raise MeshLoadError(f"{path}: no triangles found")
    vertices = np.asarray(verts, dtype=float)
    triangles = np.asarray(faces, dtype=np.int64)
    if triangles.min() < 0 or triangles.max() >= len(vertices):
        raise MeshLoadError("face index out of range")
    if normal_orientation == "outward":
        normals = _winding_normals(vertices, triangles)
        center = vertices.mean(axis=0)
        tri_c = vertices[triangles].mean(axis=1)
        flip = np.einsum("ij,ij->i", normals, tri_c - center) < 0
        triangles[flip] = triangles[flip][:, [0, 2, 1]]
    return TriangleMesh(vertices, triangles)


def mesh_to_patches(mesh: TriangleMesh) -> list[Patch]:
    """One unweighted patch per triangle: centroid plus triangle normal."""
    cents = mesh.centroids()
    return [Patch(c, n) for c, n in zip(cents, mesh.normals)]


# Cuboid face layout in the local frame: +x is the heading direction,
# +y is left, +z is up, base on z=0.
_CUBOID_FACES = (
    ("front", (0.5, 0.0, 0.5), (1.0, 0.0, 0.0)),
    ("back", (-0.5, 0.0, 0.5), (-1.0, 0.0, 0.0)),
    ("left", (0.0, 0.5, 0.5), (0.0, 1.0, 0.0)),
    ("right", (0.0, -0.5, 0.5), (0.0, -1.0, 0.0)),
    ("top", (0.0, 0.0, 1.0), (0.0, 0.0, 1.0)),
)


def build_cuboid(pose: ActorPose2D, spec: CuboidSpec) -> list[Patch]:
    """Five faces (no bottom) of a heading-aligned cuboid standing on z=0."""
    c, s = math.cos(pose.yaw), math.sin(pose.yaw)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    scale = np.array([spec.depth, spec.width, spec.height])
    offset = np.array([pose.x, pose.y, 0.0])
    patches = []
    for _, rel_c, n in _CUBOID_FACES:
        centroid = rot @ (np.asarray(rel_c) * scale) + offset
        patches.append(Patch(centroid, rot @ np.asarray(n)))
    return patches


def cuboid_center(pose: ActorPose2D, spec: CuboidSpec) -> np.ndarray:
    """Volumetric center of the cuboid (used as the look-at target)."""
    return np.array([pose.x, pose.y, spec.height / 2.0])


@dataclass(frozen=True)
class ActorSequence:
    """Time-ordered actor animation: (timestamp, pose, local-frame mesh)."""

    frames: tuple

    def __post_init__(self):
        frames = tuple(self.frames)
        ts = [f[0] for f in frames]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("timestamps must be strictly increasing")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "_timestamps", ts)

    def __len__(self) -> int:
        return len(self.frames)

    def pose_at(self, t: float) -> tuple[ActorPose2D, TriangleMesh]:
        """Zero-order hold: the frame with the greatest timestamp <= t."""
        ts = self._timestamps
        if not ts or t < ts[0] or t > ts[-1]:
            raise ValueError(f"t={t} outside sequence range [{ts[0]}, {ts[-1]}]")
        k = bisect.bisect_right(ts, t) - 1
        _, pose, mesh = self.frames[k]
        return pose, mesh


def pose_at(seq: ActorSequence, t: float) -> tuple[ActorPose2D, TriangleMesh]:
    return seq.pose_at(t)
