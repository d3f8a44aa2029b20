"""Pixels-per-area view quality: values, analytic gradients, visibility.

The per-patch quality of a view is cos(alpha)/d where alpha is the acute
angle between the viewing direction and the patch normal and d is the
camera-to-patch distance. Sign convention: alpha is always acute, so the
patch normal is sign-corrected per term to give a positive dot product
with the viewing direction. This makes the position gradient point toward
a head-on patch (quality grows as the camera approaches).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .actor import Patch, UNIT_TOL

DEFAULT_FOV_H_DEG = 90.0
DEFAULT_ASPECT = 4.0 / 3.0


@dataclass(frozen=True)
class CameraPose:
    """Camera position and unit viewing direction."""

    position: np.ndarray
    view_dir: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.position, dtype=float).reshape(3)
        n = np.asarray(self.view_dir, dtype=float).reshape(3)
        if abs(np.linalg.norm(n) - 1.0) > UNIT_TOL:
            raise ValueError("view_dir must be unit length")
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "view_dir", n)

    @staticmethod
    def looking_at(position, target) -> "CameraPose":
        position = np.asarray(position, dtype=float)
        d = np.asarray(target, dtype=float) - position
        norm = np.linalg.norm(d)
        if norm == 0.0:
            raise ValueError("camera position coincides with look-at target")
        return CameraPose(position, d / norm)


@dataclass(frozen=True)
class PpaGradient:
    """Gradient of the summed quality w.r.t. camera position and view direction.

    ``d_view_dir`` lives in the tangent space of the unit sphere at view_dir.
    """

    d_position: np.ndarray
    d_view_dir: np.ndarray


def patch_arrays(patches: list[Patch]) -> tuple[np.ndarray, np.ndarray]:
    """Stack patch centroids and normals into (m, 3) arrays."""
    if not patches:
        return np.zeros((0, 3)), np.zeros((0, 3))
    cents = np.stack([p.centroid for p in patches])
    norms = np.stack([p.normal for p in patches])
    return cents, norms


def visible_mask(camera: CameraPose, centroids: np.ndarray, normals: np.ndarray,
                 fov_h_deg: float = DEFAULT_FOV_H_DEG,
                 aspect: float = DEFAULT_ASPECT) -> np.ndarray:
    """Front-facing + frustum culling; no occlusion test."""
    if len(centroids) == 0:
        return np.zeros(0, dtype=bool)
    rel = centroids - camera.position  # camera -> patch
    front = np.einsum("ij,ij->i", -rel, normals) > 0.0
    # frustum: centroid depth along view axis and lateral extents
    n = camera.view_dir
    z = rel @ n
    lateral = rel - np.outer(z, n)
    tan_h = math.tan(math.radians(fov_h_deg) / 2.0)
    tan_v = tan_h / aspect
    # split the lateral offset into the horizontal/vertical image axes
    right, down = _image_axes(n)
    x = lateral @ right
    y = lateral @ down
    in_frustum = (z > 0.0) & (np.abs(x) <= tan_h * z) & (np.abs(y) <= tan_v * z)
    return front & in_frustum


def _image_axes(view_dir: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Right and down image axes; world +z is up, +x when looking vertically."""
    up = np.array([0.0, 0.0, 1.0])
    if abs(view_dir @ up) > 1.0 - 1e-9:
        up = np.array([1.0, 0.0, 0.0])
    down = -(up - (up @ view_dir) * view_dir)
    down /= np.linalg.norm(down)
    right = np.cross(down, view_dir)
    return right, down


def visible_patches(camera: CameraPose, patches: list[Patch],
                    fov_h_deg: float = DEFAULT_FOV_H_DEG,
                    aspect: float = DEFAULT_ASPECT) -> list[Patch]:
    cents, norms = patch_arrays(patches)
    mask = visible_mask(camera, cents, norms, fov_h_deg, aspect)
    return [p for p, keep in zip(patches, mask) if keep]


def ppa_value(camera: CameraPose, patch: Patch) -> float:
    """cos(acute angle between view_dir and normal) / distance."""
    rel = camera.position - patch.centroid
    d = np.linalg.norm(rel)
    if d <= 0.0:
        raise ValueError("patch coincides with the camera position")
    return abs(camera.view_dir @ patch.normal) / d


def ppa_sum(camera: CameraPose, patches: list[Patch],
            fov_h_deg: float = DEFAULT_FOV_H_DEG,
            aspect: float = DEFAULT_ASPECT) -> float:
    """Summed quality over the visible subset; 0 for an empty visible set."""
    cents, norms = patch_arrays(patches)
    mask = visible_mask(camera, cents, norms, fov_h_deg, aspect)
    if not mask.any():
        return 0.0
    rel = camera.position - cents[mask]
    d = np.linalg.norm(rel, axis=1)
    return float(np.sum(np.abs(norms[mask] @ camera.view_dir) / d))


def ppa_jacobian(camera: CameraPose, patches: list[Patch]) -> PpaGradient:
    """Analytic gradient of the summed quality over the given patches.

    Callers pass the visible subset; every patch contributes. The view-dir
    component is tangent to the unit sphere at view_dir.
    """
    cents, norms = patch_arrays(patches)
    if len(cents) == 0:
        return PpaGradient(np.zeros(3), np.zeros(3))
    rel = camera.position - cents
    d = np.linalg.norm(rel, axis=1)
    if np.any(d <= 0.0):
        raise ValueError("patch coincides with the camera position")
    dots = norms @ camera.view_dir
    signed_norms = np.where(dots[:, None] < 0.0, -norms, norms)  # acute-angle convention
    cos_a = np.abs(dots)
    d_pos = -np.sum((cos_a / d**3)[:, None] * rel, axis=0)
    tang = signed_norms - cos_a[:, None] * camera.view_dir
    d_view = np.sum(tang / d[:, None], axis=0)
    # numerical cleanup: keep the gradient exactly tangent
    d_view = d_view - (d_view @ camera.view_dir) * camera.view_dir
    return PpaGradient(d_pos, d_view)


def ppa_constrained(camera_pos, patch: Patch) -> float:
    """Quality with the view direction slaved to point at the patch.

    Equals ((p_d - p_j) . n_j) / ||p_d - p_j||^2, positive when the camera is
    on the patch's front side.
    """
    rel = np.asarray(camera_pos, dtype=float) - patch.centroid
    d2 = rel @ rel
    if d2 <= 0.0:
        raise ValueError("patch coincides with the camera position")
    return float((rel @ patch.normal) / d2)


def ppa_constrained_sum(camera_pos, patches: list[Patch]) -> float:
    cents, norms = patch_arrays(patches)
    if len(cents) == 0:
        return 0.0
    rel = np.asarray(camera_pos, dtype=float) - cents
    d2 = np.einsum("ij,ij->i", rel, rel)
    if np.any(d2 <= 0.0):
        raise ValueError("patch coincides with the camera position")
    return float(np.sum(np.einsum("ij,ij->i", rel, norms) / d2))


def ppa_constrained_gradient(camera_pos, patches: list[Patch]) -> np.ndarray:
    """Position gradient of the look-at-constrained quality sum.

    Per patch: [n_j d - 2 cos(alpha) (p_d - p_j)] / d^3.
    """
    cents, norms = patch_arrays(patches)
    if len(cents) == 0:
        return np.zeros(3)
    rel = np.asarray(camera_pos, dtype=float) - cents
    d = np.linalg.norm(rel, axis=1)
    if np.any(d <= 0.0):
        raise ValueError("patch coincides with the camera position")
    cos_a = np.einsum("ij,ij->i", rel, norms) / d
    grad = (norms * d[:, None] - 2.0 * cos_a[:, None] * rel) / (d**3)[:, None]
    return grad.sum(axis=0)
