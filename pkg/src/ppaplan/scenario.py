"""Scenario files: flat key = value text with explicit units in key names.

Repeated ``frame = t x y yaw`` lines define the actor trajectory. The mesh is
either ``builtin:<name>`` or a path to an ASCII OBJ/PLY file, resolved
relative to the scenario file.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .actor import ActorPose2D, ActorSequence, CuboidSpec, TriangleMesh, load_mesh
from .camera import CameraIntrinsics
from .planner import PlannerConfig
from .shapes import builtin_mesh


class ScenarioError(ValueError):
    """Unparseable scenario file or unresolved reference."""


@dataclass
class Scenario:
    seed: int
    mesh: TriangleMesh
    sequence: ActorSequence
    cuboid: CuboidSpec
    intrinsics: CameraIntrinsics
    r_safe: float
    t_max: float
    delta_t: float
    enum_samples: int
    camera_start: tuple
    noise_pos_std: float = 0.0
    noise_yaw_std: float = 0.0
    estimator_kind: str = "ground_truth"  # ground_truth | noisy | kalman
    merge_window: int = 5
    voxel_m: float = 0.02
    correlate_views: int = 100
    correlate_radii: tuple = (8.0, 10.0, 12.0, 16.0)

    def planner_config(self, kind: str, orientation_mode: str = "look_at") -> PlannerConfig:
        return PlannerConfig(r_safe=self.r_safe, t_max=self.t_max,
                             delta_t=self.delta_t, planner_kind=kind,
                             enum_samples=self.enum_samples,
                             orientation_mode=orientation_mode, cuboid=self.cuboid)


_DEFAULTS = {
    "cuboid_width_m": 0.6,
    "cuboid_depth_m": 0.4,
    "cuboid_height_m": 1.8,
    "r_safe_m": 8.0,
    "t_max_m": 1.0,
    "delta_t": 0.5,
    "enum_samples": 30,
    "fov_h_deg": 90.0,
    "width_px": 320,
    "height_px": 240,
    "noise_pos_std_m": 0.0,
    "noise_yaw_std_rad": 0.0,
    "estimator": "ground_truth",
    "merge_window": 5,
    "voxel_m": 0.02,
    "correlate_views": 100,
    "correlate_radii_m": "8 10 12 16",
}


def load_scenario(path) -> Scenario:
    path = Path(path)
    if not path.exists():
        raise ScenarioError(f"scenario file not found: {path}")
    values = dict(_DEFAULTS)
    frames = []
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"{path}:{lineno}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key == "frame":
            parts = val.split()
            if len(parts) != 4:
                raise ScenarioError(f"{path}:{lineno}: frame needs 't x y yaw'")
            t, x, y, yaw = (float(p) for p in parts)
            frames.append((t, x, y, yaw))
        else:
            values[key] = val
    required = ("seed", "mesh", "camera_start")
    missing = [k for k in required if k not in values]
    if missing:
        raise ScenarioError(f"{path}: missing required keys {missing}")
    if not frames:
        raise ScenarioError(f"{path}: no 'frame =' lines")

    mesh_ref = str(values["mesh"])
    try:
        if mesh_ref.startswith("builtin:"):
            mesh = builtin_mesh(mesh_ref.split(":", 1)[1])
        else:
            mesh = load_mesh(path.parent / mesh_ref)
    except (ValueError, OSError) as e:
        raise ScenarioError(f"{path}: cannot resolve mesh {mesh_ref!r}: {e}") from e

    try:
        seq = ActorSequence(tuple(
            (t, ActorPose2D(x, y, yaw), mesh) for t, x, y, yaw in frames))
        cam_start = tuple(float(v) for v in str(values["camera_start"]).split())
        if len(cam_start) != 3:
            raise ValueError("camera_start needs 'x y z'")
        radii = tuple(float(v) for v in str(values["correlate_radii_m"]).split())
        return Scenario(
            seed=int(values["seed"]),
            mesh=mesh,
            sequence=seq,
            cuboid=CuboidSpec(float(values["cuboid_width_m"]),
                              float(values["cuboid_depth_m"]),
                              float(values["cuboid_height_m"])),
            intrinsics=CameraIntrinsics(int(values["width_px"]),
                                        int(values["height_px"]),
                                        float(values["fov_h_deg"])),
            r_safe=float(values["r_safe_m"]),
            t_max=float(values["t_max_m"]),
            delta_t=float(values["delta_t"]),
            enum_samples=int(values["enum_samples"]),
            camera_start=cam_start,
            noise_pos_std=float(values["noise_pos_std_m"]),
            noise_yaw_std=float(values["noise_yaw_std_rad"]),
            estimator_kind=str(values["estimator"]),
            merge_window=int(values["merge_window"]),
            voxel_m=float(values["voxel_m"]),
            correlate_views=int(values["correlate_views"]),
            correlate_radii=radii,
        )
    except ScenarioError:
        raise
    except ValueError as e:
        raise ScenarioError(f"{path}: {e}") from e


def bundled_scenario_path(name: str) -> Path:
    """Path to a scenario file shipped with the package."""
    base = resources.files("ppaplan") / "data" / f"{name}.scenario"
    p = Path(str(base))
    if not p.exists():
        raise ScenarioError(f"no bundled scenario named {name!r}")
    return p
