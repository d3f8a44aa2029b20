import numpy as np
import pytest

from ppaplan.actor import ActorPose2D, CuboidSpec, TriangleMesh, build_cuboid
from ppaplan.camera import CameraIntrinsics, PointCloud, backproject, render
from ppaplan.evaluate import (chamfer_distance, correlation_summary,
                              mean_visible_ppa, run_correlation_study,
                              sample_mesh_surface, triangle_coverage)
from ppaplan.ppa import CameraPose
from ppaplan.shapes import humanoid, unit_cube


def single_triangle():
    return TriangleMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])


class TestChamfer:
    def test_identical_clouds(self, rng):
        cloud = PointCloud(rng.standard_normal((100, 3)))
        fwd, bwd, mean = chamfer_distance(cloud, cloud)
        assert fwd == bwd == mean == 0.0

    def test_single_pair_millimeters(self):
        x = PointCloud([[0, 0, 0]])
        y = PointCloud([[0.001, 0, 0]])
        fwd, bwd, mean = chamfer_distance(x, y)
        assert fwd == pytest.approx(1.0)
        assert mean == pytest.approx(1.0)

    def test_symmetric(self, rng):
        x = PointCloud(rng.standard_normal((60, 3)))
        y = PointCloud(rng.standard_normal((40, 3)))
        fxy = chamfer_distance(x, y)
        fyx = chamfer_distance(y, x)
        assert fxy[0] == pytest.approx(fyx[1])
        assert fxy[2] == pytest.approx(fyx[2])

    def test_permutation_invariant(self, rng):
        pts = rng.standard_normal((50, 3))
        x = PointCloud(pts)
        xp = PointCloud(pts[rng.permutation(50)])
        y = PointCloud(rng.standard_normal((30, 3)))
        assert chamfer_distance(x, y) == pytest.approx(chamfer_distance(xp, y))

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            chamfer_distance(PointCloud(np.zeros((0, 3))), PointCloud([[0, 0, 0]]))


class TestCoverage:
    def test_point_on_triangle(self):
        report = triangle_coverage(PointCloud([[0.25, 0.25, 0.0]]), single_triangle())
        assert report.visible_triangles == 1
        assert report.coverage_ratio == 1.0
        assert report.pixels_per_triangle == 1.0

    def test_point_inside_prism_height(self):
        report = triangle_coverage(PointCloud([[0.25, 0.25, 0.004]]),
                                   single_triangle(), prism_height=0.01)
        assert report.visible_triangles == 1

    def test_point_outside_prism_height(self):
        report = triangle_coverage(PointCloud([[0.25, 0.25, 0.006]]),
                                   single_triangle(), prism_height=0.01)
        assert report.visible_triangles == 0
        assert report.coverage_ratio == 0.0

    def test_point_outside_barycentric(self):
        report = triangle_coverage(PointCloud([[0.9, 0.9, 0.0]]), single_triangle())
        assert report.visible_triangles == 0

    def test_empty_cloud(self):
        report = triangle_coverage(PointCloud(np.zeros((0, 3))), single_triangle())
        assert report.coverage_ratio == 0.0
        assert report.pixels_per_triangle == 0.0

    def test_cube_face_sample(self, rng):
        # points on the +x face only: exactly 2 of 12 triangles visible
        n = 200
        pts = np.column_stack([np.full(n, 0.5),
                               rng.uniform(-0.45, 0.45, n),
                               rng.uniform(-0.45, 0.45, n)])
        report = triangle_coverage(PointCloud(pts), unit_cube())
        assert report.visible_triangles == 2
        assert report.coverage_ratio == pytest.approx(2 / 12)

    def test_monotone_in_cloud(self, rng):
        """Adding points never reduces coverage; 100 randomized cases."""
        mesh = unit_cube()
        for _ in range(100):
            base = sample_mesh_surface(mesh, int(rng.integers(5, 60)), rng)
            extra = sample_mesh_surface(mesh, int(rng.integers(1, 40)), rng)
            both = PointCloud(np.vstack([base.points, extra.points]))
            r1 = triangle_coverage(base, mesh)
            r2 = triangle_coverage(both, mesh)
            assert r2.visible_triangles >= r1.visible_triangles

    def test_prism_height_monotone(self, rng):
        mesh = unit_cube()
        cloud = PointCloud(sample_mesh_surface(mesh, 100, rng).points
                           + rng.normal(0, 0.003, (100, 3)))
        r_thin = triangle_coverage(cloud, mesh, prism_height=0.002)
        r_thick = triangle_coverage(cloud, mesh, prism_height=0.02)
        assert r_thick.visible_triangles >= r_thin.visible_triangles

    def test_bad_prism_height(self):
        with pytest.raises(ValueError):
            triangle_coverage(PointCloud([[0, 0, 0]]), single_triangle(),
                              prism_height=0.0)

    def test_ppt_from_triangle_id(self):
        tid = np.full((4, 4), -1, dtype=np.int64)
        tid[0, :2] = 0   # 2 px on triangle 0
        report = triangle_coverage(PointCloud([[0.25, 0.25, 0.0]]),
                                   single_triangle(), triangle_id=tid)
        assert report.pixels_per_triangle == 2.0


class TestSurfaceSample:
    def test_points_on_cube(self, rng):
        cloud = sample_mesh_surface(unit_cube(), 500, rng)
        assert len(cloud) == 500
        assert np.abs(np.abs(cloud.points).max(axis=1) - 0.5).max() < 1e-12

    def test_area_weighting(self, rng):
        # two triangles with a 9:1 area ratio
        mesh = TriangleMesh(
            [[0, 0, 0], [3, 0, 0], [0, 3, 0], [10, 0, 0], [11, 0, 0], [10, 1, 0]],
            [[0, 1, 2], [3, 4, 5]])
        cloud = sample_mesh_surface(mesh, 4000, rng)
        frac_big = float((cloud.points[:, 0] < 5).mean())
        assert frac_big == pytest.approx(0.9, abs=0.03)


class TestCorrelation:
    INTR = CameraIntrinsics(160, 120, 90.0)

    def views(self):
        rng = np.random.default_rng(3)
        out = []
        for r in [4.0, 6.0, 9.0]:
            for _ in range(4):
                az = rng.uniform(0, 2 * np.pi)
                el = rng.uniform(0.1, 1.2)
                pos = r * np.array([np.cos(el) * np.cos(az),
                                    np.cos(el) * np.sin(az), np.sin(el)])
                out.append(CameraPose.looking_at(pos + [0, 0, 0.9], (0, 0, 0.9)))
        return out

    def test_deterministic(self):
        mesh = humanoid()
        cuboid = build_cuboid(ActorPose2D(0, 0, 0), CuboidSpec())
        views = self.views()
        a = run_correlation_study(mesh, views, self.INTR, cuboid)
        b = run_correlation_study(mesh, views, self.INTR, cuboid)
        for ra, rb in zip(a, b):
            assert ra.ppa_mesh == rb.ppa_mesh
            assert ra.coverage_ratio == rb.coverage_ratio
            assert ra.pixels_per_triangle == rb.pixels_per_triangle

    def test_distance_monotonicity(self):
        """Mean view quality decreases with distance at fixed bearing."""
        mesh = humanoid()
        from ppaplan.actor import mesh_to_patches
        patches = mesh_to_patches(mesh)
        vals = []
        for r in [4.0, 6.0, 9.0, 14.0]:
            view = CameraPose.looking_at((r, 0, 1.5), (0, 0, 0.9))
            vals.append(mean_visible_ppa(view, patches, 90.0, 4 / 3))
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_summary_keys_and_range(self):
        mesh = humanoid()
        cuboid = build_cuboid(ActorPose2D(0, 0, 0), CuboidSpec())
        records = run_correlation_study(mesh, self.views(), self.INTR, cuboid)
        summary = correlation_summary(records)
        assert set(summary) == {"spearman_ppa_vs_ppt", "spearman_ppa_vs_coverage",
                                "spearman_ppa_mesh_vs_cuboid"}
        for v in summary.values():
            assert -1.0 <= v <= 1.0

    def test_no_views_raises(self):
        with pytest.raises(ValueError):
            run_correlation_study(unit_cube(), [], self.INTR, [])

    def test_single_record_summary_nan(self):
        mesh = unit_cube()
        cuboid = build_cuboid(ActorPose2D(0, 0, 0), CuboidSpec())
        records = run_correlation_study(
            mesh, [CameraPose.looking_at((4, 0, 1), (0, 0, 0))], self.INTR, cuboid)
        summary = correlation_summary(records)
        assert all(np.isnan(v) for v in summary.values())


def test_render_coverage_agrees_with_ids():
    """Prism coverage of a backprojected cloud matches the rendered ID set."""
    mesh = unit_cube()
    cam = CameraPose.looking_at((5, 0, 0), (0, 0, 0))
    view = render(mesh, cam, CameraIntrinsics(320, 240, 90.0))
    cloud = backproject(view)
    seen = set(np.unique(view.triangle_id[view.triangle_id >= 0]).tolist())
    report = triangle_coverage(cloud, mesh)
    assert report.visible_triangles == len(seen) == 2
