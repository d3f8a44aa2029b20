"""Procedural meshes used by the bundled scenarios and tests."""

from __future__ import annotations

import math

import numpy as np

from .actor import TriangleMesh


def unit_cube(center=(0.0, 0.0, 0.0), size: float = 1.0) -> TriangleMesh:
    """Axis-aligned cube, 12 triangles, outward winding."""
    c = np.asarray(center, dtype=float)
    h = size / 2.0
    corners = np.array([
        [-h, -h, -h], [h, -h, -h], [h, h, -h], [-h, h, -h],
        [-h, -h, h], [h, -h, h], [h, h, h], [-h, h, h],
    ]) + c
    # quads listed CCW viewed from outside
    quads = [
        (0, 3, 2, 1),  # bottom (-z)
        (4, 5, 6, 7),  # top (+z)
        (0, 1, 5, 4),  # -y
        (2, 3, 7, 6),  # +y
        (1, 2, 6, 5),  # +x
        (3, 0, 4, 7),  # -x
    ]
    tris = []
    for a, b, cc, d in quads:
        tris.append((a, b, cc))
        tris.append((a, cc, d))
    return TriangleMesh(corners, np.asarray(tris))


def uv_ellipsoid(center, radii, lat_steps: int = 12, lon_steps: int = 16,
                 yaw: float = 0.0) -> TriangleMesh:
    """Latitude/longitude tessellated ellipsoid with outward winding."""
    center = np.asarray(center, dtype=float)
    radii = np.asarray(radii, dtype=float)
    verts = [np.array([0.0, 0.0, -1.0]), np.array([0.0, 0.0, 1.0])]
    rings = []
    for i in range(1, lat_steps):
        phi = math.pi * i / lat_steps - math.pi / 2.0  # latitude from -pi/2
        ring = []
        for k in range(lon_steps):
            az = 2.0 * math.pi * k / lon_steps
            ring.append(len(verts))
            verts.append(np.array([
                math.cos(phi) * math.cos(az),
                math.cos(phi) * math.sin(az),
                math.sin(phi),
            ]))
        rings.append(ring)
    tris = []
    bottom, top = 0, 1
    for k in range(lon_steps):
        k2 = (k + 1) % lon_steps
        tris.append((bottom, rings[0][k2], rings[0][k]))
        tris.append((top, rings[-1][k], rings[-1][k2]))
    for r0, r1 in zip(rings, rings[1:]):
        for k in range(lon_steps):
            k2 = (k + 1) % lon_steps
            tris.append((r0[k], r0[k2], r1[k2]))
            tris.append((r0[k], r1[k2], r1[k]))
    v = np.stack(verts) * radii
    if yaw:
        cy, sy = math.cos(yaw), math.sin(yaw)
        rot = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
        v = v @ rot.T
    return TriangleMesh(v + center, np.asarray(tris))


def merge_meshes(meshes: list[TriangleMesh]) -> TriangleMesh:
    verts, tris, offset = [], [], 0
    for m in meshes:
        verts.append(m.vertices)
        tris.append(m.triangles + offset)
        offset += len(m.vertices)
    return TriangleMesh(np.vstack(verts), np.vstack(tris))


def humanoid(lat_steps: int = 12, lon_steps: int = 16) -> TriangleMesh:
    """Standing humanoid assembled from ellipsoid parts, feet on z=0.

    Local frame: heading +x, left +y, up +z; about 1.8 m tall. Default
    tessellation gives ~2100 triangles.
    """
    parts = [
        uv_ellipsoid((0.0, 0.0, 1.62), (0.10, 0.10, 0.12), lat_steps, lon_steps),   # head
        uv_ellipsoid((0.0, 0.0, 1.20), (0.11, 0.17, 0.32), lat_steps, lon_steps),   # torso
        uv_ellipsoid((0.0, 0.23, 1.13), (0.05, 0.05, 0.30), lat_steps, lon_steps),  # left arm
        uv_ellipsoid((0.0, -0.23, 1.13), (0.05, 0.05, 0.30), lat_steps, lon_steps), # right arm
        uv_ellipsoid((0.0, 0.08, 0.45), (0.07, 0.07, 0.45), lat_steps, lon_steps),  # left leg
        uv_ellipsoid((0.0, -0.08, 0.45), (0.07, 0.07, 0.45), lat_steps, lon_steps), # right leg
    ]
    return merge_meshes(parts)


_BUILTINS = {"cube": unit_cube, "humanoid": humanoid}


def builtin_mesh(name: str) -> TriangleMesh:
    try:
        return _BUILTINS[name]()
    except KeyError:
        raise ValueError(f"unknown builtin mesh {name!r}; options: {sorted(_BUILTINS)}") from None
