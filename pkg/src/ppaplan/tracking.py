"""Actor 2D-pose estimation: bbox-to-ground localization, heading oracle,
constant-velocity Kalman filter."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .actor import ActorPose2D, wrap_angle
from .camera import CameraIntrinsics, RenderedView, camera_rotation
from .ppa import CameraPose


class NoGroundIntersectionError(ValueError):
    """The localization ray does not hit the ground plane in front of the camera."""


@dataclass(frozen=True)
class BoundingBox:
    """Pixel-space box; max edges are exclusive (outer pixel boundaries)."""

    u_min: float
    v_min: float
    u_max: float
    v_max: float

    def __post_init__(self):
        if not (self.u_min < self.u_max and self.v_min < self.v_max):
            raise ValueError("bounding box must have positive extent")


def bbox_from_mask(triangle_id: np.ndarray) -> BoundingBox:
    """Tight pixel bounds of the foreground of a triangle-ID image."""
    ys, xs = np.nonzero(triangle_id >= 0)
    if len(ys) == 0:
        raise ValueError("empty foreground mask")
    return BoundingBox(float(xs.min()), float(ys.min()),
                       float(xs.max() + 1), float(ys.max() + 1))


def localize_from_bbox(bbox: BoundingBox, pose: CameraPose,
                       intr: CameraIntrinsics) -> np.ndarray:
    """Back-project the bottom-edge midpoint pixel onto the ground plane z=0."""
    u = (bbox.u_min + bbox.u_max) / 2.0
    v = bbox.v_max
    f = intr.focal
    dir_cam = np.array([(u - intr.width / 2.0) / f,
                        (v - intr.height / 2.0) / f, 1.0])
    d = camera_rotation(pose) @ dir_cam
    if d[2] >= -1e-12:
        raise NoGroundIntersectionError("localization ray does not descend to the ground")
    t = -pose.position[2] / d[2]
    if t <= 0:
        raise NoGroundIntersectionError("ground intersection behind the camera")
    hit = pose.position + t * d
    return hit[:2]


@dataclass(frozen=True)
class KalmanState:
    """Constant-velocity state (x, y, vx, vy) with covariance."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mean, dtype=float).reshape(4)
        p = np.asarray(self.covariance, dtype=float).reshape(4, 4)
        if np.abs(p - p.T).max() > 1e-12:
            raise ValueError("covariance must be symmetric")
        np.linalg.cholesky(p)  # raises if not positive-definite
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "covariance", p)


def kf_predict(state: KalmanState, dt: float, accel_noise: float) -> KalmanState:
    """Constant-velocity transition with piecewise-constant-acceleration noise."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    F = np.eye(4)
    F[0, 2] = F[1, 3] = dt
    q = accel_noise * np.array([[dt**4 / 4.0, dt**3 / 2.0],
                                [dt**3 / 2.0, dt**2]])
    Q = np.zeros((4, 4))
    for axis in range(2):
        ix = [axis, axis + 2]
        Q[np.ix_(ix, ix)] = q
    P = F @ state.covariance @ F.T + Q
    return KalmanState(F @ state.mean, 0.5 * (P + P.T))


def kf_update(state: KalmanState, measurement, meas_noise: float) -> KalmanState:
    """Position-only measurement update."""
    if meas_noise <= 0:
        raise ValueError("meas_noise must be positive")
    z = np.asarray(measurement, dtype=float).reshape(2)
    H = np.zeros((2, 4))
    H[0, 0] = H[1, 1] = 1.0
    P = state.covariance
    S = H @ P @ H.T + meas_noise * np.eye(2)
    K = P @ H.T @ np.linalg.inv(S)
    mean = state.mean + K @ (z - H @ state.mean)
    # Joseph form keeps the covariance symmetric positive-definite
    A = np.eye(4) - K @ H
    cov = A @ P @ A.T + K @ (meas_noise * np.eye(2)) @ K.T
    return KalmanState(mean, 0.5 * (cov + cov.T))


@dataclass(frozen=True)
class HeadingEstimate:
    yaw: float
    quality: str  # "oracle" | "noisy"


def heading_oracle(true_pose: ActorPose2D, noise_std: float,
                   rng: np.random.Generator) -> HeadingEstimate:
    """Ground-truth heading plus optional Gaussian noise, wrapped to (-pi, pi]."""
    if noise_std < 0:
        raise ValueError("noise_std must be non-negative")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    if noise_std == 0.0:
        return HeadingEstimate(true_pose.yaw, "oracle")
    return HeadingEstimate(wrap_angle(true_pose.yaw + noise_std * rng.standard_normal()),
                           "noisy")


class GroundTruthEstimator:
    """Pass-through actor estimator."""

    def estimate(self, t: float, true_pose: ActorPose2D) -> ActorPose2D:
        return true_pose


class NoisyPoseEstimator:
    """Ground truth with seeded Gaussian noise on position and yaw."""

    def __init__(self, pos_std: float, yaw_std: float, rng: np.random.Generator):
        self.pos_std = pos_std
        self.yaw_std = yaw_std
        self.rng = rng

    def estimate(self, t: float, true_pose: ActorPose2D) -> ActorPose2D:
        dx, dy = self.pos_std * self.rng.standard_normal(2)
        heading = heading_oracle(true_pose, self.yaw_std, self.rng)
        return ActorPose2D(true_pose.x + dx, true_pose.y + dy, heading.yaw)


class KalmanPoseEstimator:
    """Noisy position measurements smoothed by the constant-velocity filter."""

    def __init__(self, pos_std: float, yaw_std: float, rng: np.random.Generator,
                 accel_noise: float = 1.0):
        self.pos_std = pos_std
        self.yaw_std = yaw_std
        self.rng = rng
        self.accel_noise = accel_noise
        self.state: KalmanState | None = None
        self.last_t: float | None = None

    def estimate(self, t: float, true_pose: ActorPose2D) -> ActorPose2D:
        meas = true_pose.position + self.pos_std * self.rng.standard_normal(2)
        if self.state is None:
            self.state = KalmanState(np.array([meas[0], meas[1], 0.0, 0.0]),
                                     np.diag([1.0, 1.0, 4.0, 4.0]))
        else:
            dt = t - self.last_t
            if dt > 0:
                self.state = kf_predict(self.state, dt, self.accel_noise)
            self.state = kf_update(self.state, meas, max(self.pos_std**2, 1e-6))
        self.last_t = t
        heading = heading_oracle(true_pose, self.yaw_std, self.rng)
        return ActorPose2D(self.state.mean[0], self.state.mean[1], heading.yaw)
