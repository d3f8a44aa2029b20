"""Frame merging: point-to-point ICP, concatenation, voxel downsampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.transform import Rotation

from .camera import PointCloud


class DegenerateCorrespondenceError(RuntimeError):
    """Fewer than 3 usable correspondences at some ICP iteration."""


@dataclass(frozen=True)
class RigidTransform:
    rotation: np.ndarray  # (3, 3)
    translation: np.ndarray  # (3,)

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=float).reshape(3, 3)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        if np.abs(r.T @ r - np.eye(3)).max() > 1e-9 or abs(np.linalg.det(r) - 1.0) > 1e-9:
            raise ValueError("rotation must be a proper orthonormal matrix")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity() -> "RigidTransform":
        return RigidTransform(np.eye(3), np.zeros(3))

    def apply(self, points: np.ndarray) -> np.ndarray:
        return points @ self.rotation.T + self.translation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self after other: (self o other)(x) = self(other(x))."""
        return RigidTransform(self.rotation @ other.rotation,
                              self.rotation @ other.translation + self.translation)


@dataclass(frozen=True)
class IcpResult:
    transform: RigidTransform
    iterations: int
    final_rmse: float
    converged: bool


def _kabsch(src: np.ndarray, dst: np.ndarray) -> RigidTransform:
    """Closed-form least-squares rigid fit mapping src onto dst."""
    mu_s, mu_d = src.mean(axis=0), dst.mean(axis=0)
    H = (src - mu_s).T @ (dst - mu_d)
    U, _, Vt = np.linalg.svd(H)
    d = np.sign(np.linalg.det(Vt.T @ U.T))
    D = np.diag([1.0, 1.0, d])
    R = Vt.T @ D @ U.T
    return RigidTransform(R, mu_d - R @ mu_s)


def icp_align(source: PointCloud, target: PointCloud, max_iters: int = 50,
              corr_dist: float = 0.1, tol: float = 1e-6,
              restarts: int = 0, restart_seed: int = 0) -> IcpResult:
    """Classic point-to-point ICP returning the source-to-target transform.

    With restarts > 0, the converged pose is re-seeded with small random
    perturbations (scaled to the residual) and the best final RMSE wins.
    This escapes the grid-aliasing local minima that pixel-lattice clouds
    produce; the result is deterministic for a fixed restart_seed.
    """
    best = _icp_once(source, target, max_iters, corr_dist, tol)
    rng = np.random.default_rng(restart_seed)
    for _ in range(restarts):
        if best.final_rmse < 1e-9:
            break
        scale = max(2.0 * best.final_rmse, 1e-4)
        axis = rng.standard_normal(3)
        axis /= np.linalg.norm(axis)
        jitter = RigidTransform(
            Rotation.from_rotvec(rng.normal(0.0, 0.01) * axis).as_matrix(),
            rng.normal(0.0, scale, 3)).compose(best.transform)
        moved = PointCloud(jitter.apply(source.points))
        trial = _icp_once(moved, target, max_iters, corr_dist, tol)
        if trial.final_rmse < best.final_rmse:
            best = IcpResult(trial.transform.compose(jitter), trial.iterations,
                             trial.final_rmse, trial.converged)
    return best


def _icp_once(source: PointCloud, target: PointCloud, max_iters: int,
              corr_dist: float, tol: float) -> IcpResult:
    if len(source) < 3 or len(target) < 3:
        raise DegenerateCorrespondenceError("clouds must have at least 3 points")
    tree = cKDTree(target.points)
    transform = RigidTransform.identity()
    moved = source.points.copy()
    prev_rmse = np.inf
    rmse = np.inf
    iters = 0
    converged = False
    for iters in range(1, max_iters + 1):
        dists, idx = tree.query(moved, distance_upper_bound=corr_dist)
        inlier = np.isfinite(dists)
        if inlier.sum() < 3:
            raise DegenerateCorrespondenceError(
                f"only {int(inlier.sum())} correspondences within {corr_dist} m")
        step = _kabsch(moved[inlier], target.points[idx[inlier]])
        transform = step.compose(transform)
        moved = step.apply(moved)
        rmse = float(np.sqrt(np.mean(
            np.sum((moved[inlier] - target.points[idx[inlier]])**2, axis=1))))
        if prev_rmse - rmse < tol:
            converged = True
            break
        prev_rmse = rmse
    return IcpResult(transform, iters, rmse, converged)


def voxel_downsample(cloud: PointCloud, voxel: float) -> PointCloud:
    """Centroid per occupied voxel of the given edge length."""
    if voxel <= 0:
        raise ValueError("voxel size must be positive")
    if len(cloud) == 0:
        return cloud
    keys = np.floor(cloud.points / voxel).astype(np.int64)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    sums = np.zeros((len(counts), 3))
    np.add.at(sums, inverse, cloud.points)
    return PointCloud(sums / counts[:, None])


def merge_frames(frames: list, use_icp: bool = True, voxel: float = 0.01,
                 max_iters: int = 50, corr_dist: float = 0.1,
                 tol: float = 1e-6) -> PointCloud:
    """Merge 2-5 world-frame clouds: optional ICP refinement against the first
    frame, concatenation, then voxel-grid downsampling.

    Each frame is a (PointCloud, CameraPose) pair; poses ride along for
    bookkeeping, clouds are already in the world frame.
    """
    if not frames:
        raise ValueError("merge_frames needs at least one frame")
    if len(frames) > 5:
        raise ValueError("merge window is limited to 5 frames")
    clouds = [f[0] if isinstance(f, tuple) else f for f in frames]
    merged = [clouds[0].points]
    for cloud in clouds[1:]:
        if use_icp and len(cloud) >= 3 and len(clouds[0]) >= 3:
            result = icp_align(cloud, clouds[0], max_iters, corr_dist, tol)
            merged.append(result.transform.apply(cloud.points))
        else:
            merged.append(cloud.points)
    return voxel_downsample(PointCloud(np.vstack(merged)), voxel)
