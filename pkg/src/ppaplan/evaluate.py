"""Reconstruction-quality metrics and the view-quality correlation study."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import spearmanr

from .actor import TriangleMesh, mesh_to_patches, Patch
from .camera import CameraIntrinsics, PointCloud, backproject, render
from .ppa import CameraPose, patch_arrays, visible_mask

PRISM_HEIGHT_DEFAULT = 0.01  # 1 cm prism height for the visibility test


@dataclass(frozen=True)
class CoverageReport:
    visible_triangles: int
    total_triangles: int
    coverage_ratio: float
    pixels_per_triangle: float


@dataclass(frozen=True)
class CorrelationRecord:
    view: CameraPose
    ppa_mesh: float
    ppa_cuboid: float
    coverage_ratio: float
    pixels_per_triangle: float


def triangle_coverage(cloud: PointCloud, mesh: TriangleMesh,
                      prism_height: float = PRISM_HEIGHT_DEFAULT,
                      triangle_id: np.ndarray | None = None) -> CoverageReport:
    """A triangle is visible iff some cloud point lies inside its prism.

    The prism is the triangle extruded +-prism_height/2 along its normal with
    barycentric containment of the point's in-plane projection. When a
    triangle-ID image is given, pixels-per-triangle comes from pixel counts,
    otherwise from in-prism point counts.
    """
    if prism_height <= 0:
        raise ValueError("prism_height must be positive")
    if mesh.num_triangles == 0:
        raise ValueError("mesh has no triangles")
    pts = cloud.points
    total = mesh.num_triangles
    visible = np.zeros(total, dtype=bool)
    in_prism_counts = np.zeros(total, dtype=np.int64)
    if len(pts):
        tree = cKDTree(pts)
        tv = mesh.triangle_vertices()
        cents = tv.mean(axis=1)
        circum = np.linalg.norm(tv - cents[:, None, :], axis=2).max(axis=1)
        half_h = prism_height / 2.0
        for ti in range(total):
            idx = tree.query_ball_point(cents[ti], circum[ti] + half_h)
            if not idx:
                continue
            p = pts[idx]
            a, b, c = tv[ti]
            n = mesh.normals[ti]
            rel = p - a
            dist = rel @ n
            near = np.abs(dist) <= half_h
            if not near.any():
                continue
            proj = rel[near] - np.outer(dist[near], n)
            e1, e2 = b - a, c - a
            d11, d12, d22 = e1 @ e1, e1 @ e2, e2 @ e2
            det = d11 * d22 - d12 * d12
            q1 = proj @ e1
            q2 = proj @ e2
            u = (d22 * q1 - d12 * q2) / det
            v = (d11 * q2 - d12 * q1) / det
            inside = (u >= 0) & (v >= 0) & (u + v <= 1)
            cnt = int(inside.sum())
            if cnt:
                visible[ti] = True
                in_prism_counts[ti] = cnt
    n_vis = int(visible.sum())
    if triangle_id is not None:
        ids, counts = np.unique(triangle_id[triangle_id >= 0], return_counts=True)
        ppt = float(counts.mean()) if len(ids) else 0.0
    else:
        ppt = float(in_prism_counts[visible].mean()) if n_vis else 0.0
    return CoverageReport(n_vis, total, n_vis / total, ppt)


def chamfer_distance(x: PointCloud, y: PointCloud) -> tuple[float, float, float]:
    """Symmetric Chamfer distance in millimeters: (forward, backward, mean)."""
    if len(x) == 0 or len(y) == 0:
        raise ValueError("chamfer distance requires non-empty clouds")
    fwd = float(cKDTree(y.points).query(x.points)[0].mean()) * 1000.0
    bwd = float(cKDTree(x.points).query(y.points)[0].mean()) * 1000.0
    return fwd, bwd, (fwd + bwd) / 2.0


def mean_visible_ppa(view: CameraPose, patches: list[Patch],
                     fov_h_deg: float, aspect: float) -> float:
    """Mean quality over the visible patch subset; 0 if none visible."""
    cents, norms = patch_arrays(patches)
    mask = visible_mask(view, cents, norms, fov_h_deg, aspect)
    if not mask.any():
        return 0.0
    rel = view.position - cents[mask]
    d = np.linalg.norm(rel, axis=1)
    return float(np.mean(np.abs(norms[mask] @ view.view_dir) / d))


def run_correlation_study(mesh: TriangleMesh, views: list[CameraPose],
                          intr: CameraIntrinsics, cuboid: list[Patch],
                          prism_height: float = PRISM_HEIGHT_DEFAULT) -> list[CorrelationRecord]:
    """Per-view mean PPA (mesh and cuboid) against rendered quality metrics."""
    if not views:
        raise ValueError("correlation study needs at least one view")
    mesh_patches = mesh_to_patches(mesh)
    records = []
    for view in views:
        rendered = render(mesh, view, intr)
        cloud = backproject(rendered)
        report = triangle_coverage(cloud, mesh, prism_height, rendered.triangle_id)
        records.append(CorrelationRecord(
            view=view,
            ppa_mesh=mean_visible_ppa(view, mesh_patches, intr.fov_h_deg, intr.aspect),
            ppa_cuboid=mean_visible_ppa(view, cuboid, intr.fov_h_deg, intr.aspect),
            coverage_ratio=report.coverage_ratio,
            pixels_per_triangle=report.pixels_per_triangle,
        ))
    return records


def correlation_summary(records: list[CorrelationRecord]) -> dict:
    """Spearman rank correlations between mesh PPA and the quality metrics."""
    ppa = [r.ppa_mesh for r in records]
    out = {}
    for key, vals in [
        ("spearman_ppa_vs_ppt", [r.pixels_per_triangle for r in records]),
        ("spearman_ppa_vs_coverage", [r.coverage_ratio for r in records]),
        ("spearman_ppa_mesh_vs_cuboid", [r.ppa_cuboid for r in records]),
    ]:
        if len(records) < 2:
            out[key] = float("nan")
        else:
            out[key] = float(spearmanr(ppa, vals).statistic)
    return out


def sample_mesh_surface(mesh: TriangleMesh, n: int, rng: np.random.Generator) -> PointCloud:
    """Uniform area-weighted surface sample, used as a Chamfer ground truth."""
    tv = mesh.triangle_vertices()
    cross = np.cross(tv[:, 1] - tv[:, 0], tv[:, 2] - tv[:, 0])
    areas = 0.5 * np.linalg.norm(cross, axis=1)
    idx = rng.choice(len(areas), size=n, p=areas / areas.sum())
    r1 = np.sqrt(rng.random(n))
    r2 = rng.random(n)
    a, b, c = tv[idx, 0], tv[idx, 1], tv[idx, 2]
    pts = (1 - r1)[:, None] * a + (r1 * (1 - r2))[:, None] * b + (r1 * r2)[:, None] * c
    return PointCloud(pts)
