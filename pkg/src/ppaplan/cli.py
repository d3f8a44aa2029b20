"""Experiment driver CLI: correlate | plan | tour | replay.

Each subcommand reads a scenario file and writes CSVs, ASCII PLY clouds and
matplotlib figures into the output directory. Exit codes: 0 success,
2 configuration error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from pathlib import Path

import numpy as np

from .actor import ActorPose2D, build_cuboid, mesh_to_patches
from .camera import CameraIntrinsics, PointCloud, backproject, render, sample_view_sphere, write_ply
from .evaluate import (chamfer_distance, correlation_summary, run_correlation_study,
                       sample_mesh_surface, triangle_coverage)
from .planner import PLANNER_KINDS, InfeasiblePoseError, PlanRun, plan_sequence, write_plan_csv
from .ppa import CameraPose
from .reconstruct import DegenerateCorrespondenceError, merge_frames
from .rng import stream
from .scenario import Scenario, ScenarioError, load_scenario
from .tour import InfeasibleThresholdError, build_neighborhood, solve_tour, validate_tour
from .tracking import GroundTruthEstimator, KalmanPoseEstimator, NoisyPoseEstimator
from . import plots

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2

_G = "{:.9g}".format


def _make_estimator(scn: Scenario, kind: str):
    if scn.noise_pos_std == 0.0 and scn.noise_yaw_std == 0.0:
        return GroundTruthEstimator()
    rng = stream(scn.seed, f"estimator/{kind}")
    if scn.estimator_kind == "kalman":
        return KalmanPoseEstimator(scn.noise_pos_std, scn.noise_yaw_std, rng)
    return NoisyPoseEstimator(scn.noise_pos_std, scn.noise_yaw_std, rng)


def reconstruct_run(scn: Scenario, run: PlanRun) -> tuple[PointCloud, float, float]:
    """Render at executed poses, merge windows, score against ground truth.

    Returns (merged cloud over all windows, mean coverage %, mean Chamfer mm).
    """
    frames = scn.sequence.frames
    gt_rng = stream(scn.seed, "gt-chamfer-sample")
    gt_local = sample_mesh_surface(scn.mesh, 20000, gt_rng)
    window = max(2, min(5, scn.merge_window))

    clouds = []
    for step, (t, pose, mesh) in zip(run.steps, frames):
        view = render(mesh.transformed(pose), step.camera_after, scn.intrinsics)
        clouds.append((backproject(view), step.camera_after, pose))

    coverages, cds, merged_all = [], [], []
    for start in range(0, len(clouds), window):
        chunk = clouds[start:start + window]
        nonempty = [(c, p) for c, p, _ in chunk if len(c) >= 3]
        if not nonempty:
            continue
        try:
            merged = merge_frames(nonempty, use_icp=len(nonempty) > 1, voxel=scn.voxel_m)
        except DegenerateCorrespondenceError:
            # frames too far apart to register; fall back to plain concatenation
            merged = merge_frames(nonempty, use_icp=False, voxel=scn.voxel_m)
        ref_pose = chunk[0][2]
        world_mesh = scn.mesh.transformed(ref_pose)
        report = triangle_coverage(merged, world_mesh)
        coverages.append(report.coverage_ratio * 100.0)
        rot_sample = _transform_points(gt_local.points, ref_pose)
        cds.append(chamfer_distance(merged, PointCloud(rot_sample))[2])
        merged_all.append(merged.points)
    if not coverages:
        return PointCloud(np.zeros((0, 3))), 0.0, float("inf")
    merged_cloud = PointCloud(np.vstack(merged_all))
    return merged_cloud, float(np.mean(coverages)), float(np.mean(cds))


def _transform_points(points: np.ndarray, pose: ActorPose2D) -> np.ndarray:
    c, s = math.cos(pose.yaw), math.sin(pose.yaw)
    rot = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return points @ rot.T + np.array([pose.x, pose.y, 0.0])


def run_planner_suite(scn: Scenario, kinds: list[str]) -> dict:
    """Plan + reconstruct + score every requested planner kind."""
    initial = CameraPose.looking_at(
        np.asarray(scn.camera_start, dtype=float),
        np.array([scn.sequence.frames[0][1].x, scn.sequence.frames[0][1].y, scn.cuboid.height / 2]))
    results = {}
    for kind in kinds:
        config = scn.planner_config(kind)
        run = plan_sequence(scn.sequence, initial, config,
                            _make_estimator(scn, kind), seed=scn.seed,
                            intr=scn.intrinsics)
        cloud, cov, cd = reconstruct_run(scn, run)
        results[kind] = {"run": run, "cloud": cloud, "coverage_pct": cov, "cd_mm": cd}
    return results


def cmd_correlate(args) -> int:
    scn = _load(args)
    out = _outdir(args)
    actor_pose = scn.sequence.frames[0][1]
    world_mesh = scn.mesh.transformed(actor_pose)
    center = world_mesh.centroids().mean(axis=0)
    n_az = max(1, scn.correlate_views // (len(scn.correlate_radii) * 5))
    views = sample_view_sphere(center, scn.correlate_radii, 5, n_az)[:scn.correlate_views]
    cuboid = build_cuboid(actor_pose, scn.cuboid)
    records = run_correlation_study(world_mesh, views, scn.intrinsics, cuboid)
    summary = correlation_summary(records)
    if len(records) < 2:
        print("warning: degenerate correlation (fewer than 2 views)", file=sys.stderr)

    with open(out / "correlation.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["view", "r", "theta", "phi", "ppa_mesh", "ppa_cuboid",
                    "coverage", "ppt"])
        for i, r in enumerate(records):
            rel = r.view.position - center
            rad = np.linalg.norm(rel)
            theta = np.arccos(np.clip(rel[2] / rad, -1, 1))
            phi = np.arctan2(rel[1], rel[0])
            w.writerow([i, _G(rad), _G(theta), _G(phi), _G(r.ppa_mesh),
                        _G(r.ppa_cuboid), _G(r.coverage_ratio),
                        _G(r.pixels_per_triangle)])
    with open(out / "summary.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(sorted(summary))
        w.writerow([_G(summary[k]) for k in sorted(summary)])
    plots.correlation_figure(records, out / "correlation.png")
    for k in sorted(summary):
        print(f"{k} = {summary[k]:.4f}")
    return EXIT_OK


def cmd_plan(args) -> int:
    scn = _load(args)
    out = _outdir(args)
    kinds = args.planners.split(",") if args.planners else ["no_plan", "greedy",
                                                            "ppa_cuboid", "ppa_mesh"]
    for k in kinds:
        if k not in PLANNER_KINDS:
            raise ScenarioError(f"unknown planner {k!r}; options: {PLANNER_KINDS}")
    results = run_planner_suite(scn, kinds)

    rows = []
    with open(out / "metrics.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow([f"# r_safe_m={_G(scn.r_safe)} t_max_m={_G(scn.t_max)} "
                    f"noise_pos_std_m={_G(scn.noise_pos_std)} "
                    f"noise_yaw_std_rad={_G(scn.noise_yaw_std)}"])
        w.writerow(["planner", "coverage_pct", "cd_mm"])
        for kind in kinds:
            r = results[kind]
            w.writerow([kind, _G(r["coverage_pct"]), _G(r["cd_mm"])])
            rows.append((kind, r["coverage_pct"], r["cd_mm"]))
            write_plan_csv(r["run"], out / f"run_{kind}.csv")
            write_ply(r["cloud"], out / f"reconstruction_{kind}.ply")
            print(f"{kind}: coverage {r['coverage_pct']:.2f}% cd {r['cd_mm']:.2f} mm")
    plots.metrics_figure(rows, out / "metrics.png")
    actor_xy = np.array([[p.x, p.y] for _, p, _ in scn.sequence.frames])
    plots.trajectory_figure({k: results[k]["run"] for k in kinds},
                            actor_xy, out / "trajectory.png")
    return EXIT_OK


def cmd_tour(args) -> int:
    scn = _load(args)
    out = _outdir(args)
    actor_pose = scn.sequence.frames[0][1]
    patches = build_cuboid(actor_pose, scn.cuboid)
    rng = stream(scn.seed, "tour-sampling")
    neighborhoods = [
        build_neighborhood(p, args.threshold, scn.r_safe, args.samples, rng,
                           patch_index=i)
        for i, p in enumerate(patches)
    ]
    tour = solve_tour(neighborhoods, seed=scn.seed)
    if not validate_tour(tour, patches, args.threshold, scn.r_safe):
        raise RuntimeError("tour failed post-hoc constraint validation")
    with open(out / "tour.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["stop", "patch_index", "x", "y", "z"])
        for k, (pi, vp) in enumerate(zip(tour.order, tour.viewpoints)):
            w.writerow([k, pi, _G(vp[0]), _G(vp[1]), _G(vp[2])])
    plots.tour_figure(tour, patches, out / "tour.png")
    print(f"tour stops: {len(tour.order)} total length: {tour.total_length:.3f} m")
    return EXIT_OK


def cmd_replay(args) -> int:
    scn = _load(args)
    out = _outdir(args)
    with open(args.run, newline="") as f:
        rows = list(csv.DictReader(f))
    if not rows:
        raise ScenarioError(f"{args.run}: empty plan run")
    clouds = []
    for row, (t, pose, mesh) in zip(rows, scn.sequence.frames):
        vd = np.array([float(row["vx"]), float(row["vy"]), float(row["vz"])])
        cam = CameraPose(np.array([float(row["ax"]), float(row["ay"]), float(row["az"])]),
                         vd / np.linalg.norm(vd))
        view = render(mesh.transformed(pose), cam, scn.intrinsics)
        clouds.append(backproject(view))
    pts = [c.points for c in clouds if len(c)]
    merged = PointCloud(np.vstack(pts)) if pts else PointCloud(np.zeros((0, 3)))
    write_ply(merged, out / "replay.ply")
    print(f"replayed {len(rows)} steps -> {len(merged)} points")
    return EXIT_OK


def _load(args) -> Scenario:
    scn = load_scenario(args.scenario)
    if args.seed is not None:
        scn.seed = args.seed
    if args.noise_pos_std is not None:
        scn.noise_pos_std = args.noise_pos_std
    if args.noise_yaw_std is not None:
        scn.noise_yaw_std = args.noise_yaw_std
    if args.resolution:
        try:
            w, h = (int(v) for v in args.resolution.lower().split("x"))
        except ValueError:
            raise ScenarioError(f"bad --resolution {args.resolution!r}; expected WxH")
        scn.intrinsics = CameraIntrinsics(w, h, scn.intrinsics.fov_h_deg)
    return scn


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ppaplan")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--scenario", required=True, help="scenario file path")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--noise-pos-std", type=float, default=None, dest="noise_pos_std",
                       metavar="M")
        p.add_argument("--noise-yaw-std", type=float, default=None, dest="noise_yaw_std",
                       metavar="RAD")
        p.add_argument("--resolution", default=None, metavar="WxH")

    p = sub.add_parser("correlate", help="view-quality correlation study")
    common(p)
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("plan", help="run planners and score reconstructions")
    common(p)
    p.add_argument("--planners", default=None,
                   help=f"comma-separated subset of {','.join(PLANNER_KINDS)}")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("tour", help="multi-patch viewpoint tour")
    common(p)
    p.add_argument("--threshold", type=float, default=0.05,
                   help="quality threshold per neighborhood [1/m]")
    p.add_argument("--samples", type=int, default=64,
                   help="candidate viewpoints per neighborhood")
    p.set_defaults(func=cmd_tour)

    p = sub.add_parser("replay", help="re-render a recorded plan run")
    common(p)
    p.add_argument("--run", required=True, help="plan run CSV to replay")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, InfeasibleThresholdError, InfeasiblePoseError) as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as e:  # runtime failures map to a distinct exit code
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
