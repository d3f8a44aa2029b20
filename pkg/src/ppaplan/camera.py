"""Pinhole camera model and software depth rasterizer.

Conventions: camera frame is x-right, y-down, z-forward (along view_dir).
The image up direction is world +z projected orthogonal to the view axis
(+x when looking vertically); pixel centers sit at half-integer coordinates
with the top-left pixel center at (0.5, 0.5). Depth is the camera-frame z
coordinate (distance along the view axis), +inf for background.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .actor import TriangleMesh
from .ppa import CameraPose, _image_axes

NEAR_PLANE = 1e-4


@dataclass(frozen=True)
class CameraIntrinsics:
    width: int = 320
    height: int = 240
    fov_h_deg: float = 90.0

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")
        if not 0.0 < self.fov_h_deg < 180.0:
            raise ValueError("horizontal FOV must be in (0, 180) degrees")

    @property
    def focal(self) -> float:
        """Focal length in pixels (square pixels, shared by both axes)."""
        return (self.width / 2.0) / math.tan(math.radians(self.fov_h_deg) / 2.0)

    @property
    def aspect(self) -> float:
        return self.width / self.height


@dataclass(frozen=True)
class RenderedView:
    depth: np.ndarray        # (h, w) float, +inf background
    triangle_id: np.ndarray  # (h, w) int, -1 background
    pose: CameraPose
    intrinsics: CameraIntrinsics


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray  # (n, 3) float, world frame

    def __post_init__(self):
        p = np.ascontiguousarray(np.asarray(self.points, dtype=float).reshape(-1, 3))
        if p.size and not np.isfinite(p).all():
            raise ValueError("point cloud contains non-finite coordinates")
        object.__setattr__(self, "points", p)

    def __len__(self) -> int:
        return len(self.points)


def camera_rotation(pose: CameraPose) -> np.ndarray:
    """World-from-camera rotation; columns are the right/down/forward axes."""
    right, down = _image_axes(pose.view_dir)
    return np.column_stack([right, down, pose.view_dir])


def render(mesh: TriangleMesh, pose: CameraPose, intr: CameraIntrinsics) -> RenderedView:
    """Z-buffered rasterization; lowest triangle index wins depth ties."""
    w, h = intr.width, intr.height
    f = intr.focal
    cx, cy = w / 2.0, h / 2.0
    rot = camera_rotation(pose)
    cam_v = (mesh.vertices - pose.position) @ rot  # camera frame
    tv = cam_v[mesh.triangles]  # (M, 3, 3)

    depth = np.full((h, w), np.inf)
    tri_id = np.full((h, w), -1, dtype=np.int64)

    z = tv[:, :, 2]
    ok = (z > NEAR_PLANE).all(axis=1)  # no near-plane clipping; skip crossing tris
    if not ok.any():
        return RenderedView(depth, tri_id, pose, intr)

    u = cx + f * tv[:, :, 0] / z
    v = cy + f * tv[:, :, 1] / z
    inv_z = 1.0 / z

    for ti in np.nonzero(ok)[0]:
        uu, vv, iz = u[ti], v[ti], inv_z[ti]
        x0 = max(int(math.floor(uu.min() - 0.5)), 0)
        x1 = min(int(math.ceil(uu.max() - 0.5)), w - 1)
        y0 = max(int(math.floor(vv.min() - 0.5)), 0)
        y1 = min(int(math.ceil(vv.max() - 0.5)), h - 1)
        if x1 < x0 or y1 < y0:
            continue
        px = np.arange(x0, x1 + 1) + 0.5
        py = np.arange(y0, y1 + 1) + 0.5
        gx, gy = np.meshgrid(px, py)
        # signed edge functions; orientation-independent inside test
        e0 = (uu[1] - uu[0]) * (gy - vv[0]) - (vv[1] - vv[0]) * (gx - uu[0])
        e1 = (uu[2] - uu[1]) * (gy - vv[1]) - (vv[2] - vv[1]) * (gx - uu[1])
        e2 = (uu[0] - uu[2]) * (gy - vv[2]) - (vv[0] - vv[2]) * (gx - uu[2])
        area = (uu[1] - uu[0]) * (vv[2] - vv[0]) - (vv[1] - vv[0]) * (uu[2] - uu[0])
        if area == 0.0:
            continue
        inside = ((e0 >= 0) & (e1 >= 0) & (e2 >= 0)) if area > 0 \
            else ((e0 <= 0) & (e1 <= 0) & (e2 <= 0))
        if not inside.any():
            continue
        # perspective-correct depth: 1/z interpolates linearly in screen space
        b0, b1, b2 = e1 / area, e2 / area, e0 / area
        zi = 1.0 / (b0 * iz[0] + b1 * iz[1] + b2 * iz[2])
        sub_d = depth[y0:y1 + 1, x0:x1 + 1]
        sub_t = tri_id[y0:y1 + 1, x0:x1 + 1]
        win = inside & (zi < sub_d)
        sub_d[win] = zi[win]
        sub_t[win] = ti
    return RenderedView(depth, tri_id, pose, intr)


def backproject(view: RenderedView) -> PointCloud:
    """One world-frame point per foreground pixel via the inverse pinhole map."""
    intr = view.intrinsics
    ys, xs = np.nonzero(view.triangle_id >= 0)
    if len(ys) == 0:
        return PointCloud(np.zeros((0, 3)))
    z = view.depth[ys, xs]
    f = intr.focal
    xc = (xs + 0.5 - intr.width / 2.0) * z / f
    yc = (ys + 0.5 - intr.height / 2.0) * z / f
    cam_pts = np.column_stack([xc, yc, z])
    rot = camera_rotation(view.pose)
    return PointCloud(cam_pts @ rot.T + view.pose.position)


def sample_view_sphere(actor_pos, radii, polar_steps: int, azimuth_steps: int) -> list[CameraPose]:
    """Grid of poses uniform in radius, elevation and azimuth, all looking at
    actor_pos, restricted to the upper hemisphere (z >= 0)."""
    actor_pos = np.asarray(actor_pos, dtype=float)
    if polar_steps < 1 or azimuth_steps < 1:
        raise ValueError("polar_steps and azimuth_steps must be >= 1")
    poses = []
    for r in radii:
        if r <= 0:
            raise ValueError("radii must be positive")
        for i in range(polar_steps):
            elev = (i + 0.5) * (math.pi / 2.0) / polar_steps  # above the horizon
            for k in range(azimuth_steps):
                az = 2.0 * math.pi * k / azimuth_steps
                offset = r * np.array([
                    math.cos(elev) * math.cos(az),
                    math.cos(elev) * math.sin(az),
                    math.sin(elev),
                ])
                poses.append(CameraPose.looking_at(actor_pos + offset, actor_pos))
    return poses


def write_ply(cloud: PointCloud, path) -> None:
    """ASCII PLY point cloud writer."""
    with open(path, "w") as f:
        f.write("ply\nformat ascii 1.0\n")
        f.write(f"element vertex {len(cloud)}\n")
        f.write("property float x\nproperty float y\nproperty float z\n")
        f.write("end_header\n")
        for x, y, z in cloud.points:
            f.write(f"{x:.6f} {y:.6f} {z:.6f}\n")


def read_ply_points(path) -> PointCloud:
    pts = []
    with open(path) as f:
        lines = f.read().splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ValueError("not a PLY file")
    n_vert = 0
    for i, line in enumerate(lines):
        parts = line.split()
        if parts[:2] == ["element", "vertex"]:
            n_vert = int(parts[2])
        if parts and parts[0] == "end_header":
            body = lines[i + 1:i + 1 + n_vert]
            break
    else:
        raise ValueError("PLY header not terminated")
    for row in body:
        vals = row.split()
        pts.append([float(v) for v in vals[:3]])
    return PointCloud(np.asarray(pts) if pts else np.zeros((0, 3)))


def write_depth_pgm(view: RenderedView, path) -> None:
    """16-bit PGM depth dump, millimeter quantization, 65535 = background."""
    d = view.depth.copy()
    mm = np.where(np.isfinite(d), np.clip(np.round(d * 1000.0), 0, 65534), 65535)
    mm = mm.astype(np.uint16)
    with open(path, "wb") as f:
        f.write(f"P5\n{view.intrinsics.width} {view.intrinsics.height}\n65535\n".encode())
        f.write(mm.astype(">u2").tobytes())
