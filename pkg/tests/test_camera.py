import math

import numpy as np
import pytest

from ppaplan.actor import TriangleMesh
from ppaplan.camera import (CameraIntrinsics, PointCloud, backproject, read_ply_points,
                            render, sample_view_sphere, write_depth_pgm, write_ply)
from ppaplan.ppa import CameraPose
from ppaplan.shapes import unit_cube

INTR = CameraIntrinsics(320, 240, 90.0)


def facing_triangle(dist, half=1.0):
    """Triangle in the plane x=dist facing a camera at the origin looking +x."""
    return TriangleMesh(
        [[dist, -half, -half], [dist, half, -half], [dist, 0.0, half]],
        [[0, 2, 1]])


class TestIntrinsics:
    def test_focal(self):
        assert INTR.focal == pytest.approx(160.0)

    def test_bad_fov(self):
        with pytest.raises(ValueError):
            CameraIntrinsics(320, 240, 180.0)


class TestRender:
    def test_center_pixel_depth(self):
        cam = CameraPose((0, 0, 0), (1, 0, 0))
        view = render(facing_triangle(2.0), cam, INTR)
        cy, cx = 120, 160
        assert view.triangle_id[cy, cx] == 0
        assert view.depth[cy, cx] == pytest.approx(2.0, abs=1e-9)

    def test_facing_away(self):
        cam = CameraPose((0, 0, 0), (-1, 0, 0))
        view = render(facing_triangle(2.0), cam, INTR)
        assert (view.triangle_id == -1).all()
        assert np.isinf(view.depth).all()

    def test_two_coaxial_triangles(self):
        near = facing_triangle(2.0, half=0.5)
        far = facing_triangle(4.0, half=2.0)
        mesh = TriangleMesh(np.vstack([near.vertices, far.vertices]),
                            np.vstack([near.triangles, far.triangles + 3]))
        cam = CameraPose((0, 0, 0), (1, 0, 0))
        view = render(mesh, cam, INTR)
        assert view.triangle_id[120, 160] == 0  # near triangle wins the center
        # a pixel inside the far silhouette but outside the near one shows id 1;
        # world +y maps to -u (camera x-right, y-down, z-forward)
        f = INTR.focal
        u_far = int(160 - 0.75 * f / 4.0)  # y=0.75, z~0: far spans |y|<1 there
        assert view.triangle_id[120, u_far] == 1

    def test_depth_winner_is_nearer(self):
        near = facing_triangle(2.0)
        far = facing_triangle(4.0)
        mesh = TriangleMesh(np.vstack([near.vertices, far.vertices]),
                            np.vstack([near.triangles, far.triangles + 3]))
        cam = CameraPose((0, 0, 0), (1, 0, 0))
        both = render(mesh, cam, INTR)
        far_only = render(far, cam, INTR)
        overlap = (both.triangle_id == 0) & (far_only.triangle_id == 0)
        assert overlap.any()
        assert (both.depth[overlap] < far_only.depth[overlap]).all()

    def test_resolution_covariance(self):
        cam = CameraPose.looking_at((4, 0.3, 0.2), (0, 0, 0))
        base = render(unit_cube(), cam, INTR)
        double = render(unit_cube(), cam, CameraIntrinsics(640, 480, 90.0))
        for ti in np.unique(base.triangle_id[base.triangle_id >= 0]):
            n1 = (base.triangle_id == ti).sum()
            n2 = (double.triangle_id == ti).sum()
            if n1 >= 50:
                assert n2 == pytest.approx(4 * n1, rel=0.10)


class TestBackproject:
    def test_principal_ray(self):
        cam = CameraPose((0, 0, 0), (1, 0, 0))
        view = render(facing_triangle(2.0), cam, INTR)
        cloud = backproject(view)
        d = view.depth[120, 160]
        expected = cam.position + d * cam.view_dir
        best = np.linalg.norm(cloud.points - expected, axis=1).min()
        # nearest pixel center sits half a pixel off the principal ray
        assert best < 0.5 / INTR.focal * d * 1.5

    def test_empty_view(self):
        cam = CameraPose((0, 0, 0), (-1, 0, 0))
        cloud = backproject(render(facing_triangle(2.0), cam, INTR))
        assert len(cloud) == 0

    def test_plane_fit_residual(self):
        # big triangle in the plane x=3, oblique camera
        mesh = TriangleMesh([[3, -5, -4], [3, 5, -4], [3, 0, 5]], [[0, 2, 1]])
        cam = CameraPose.looking_at((0, 1, 2), (3, 0, 0))
        cloud = backproject(render(mesh, cam, INTR))
        assert len(cloud) > 1000
        assert np.abs(cloud.points[:, 0] - 3.0).max() < 1e-4

    def test_convex_surface_consistency(self):
        cube = unit_cube()
        cam = CameraPose.looking_at((4, 2, 3), (0, 0, 0))
        cloud = backproject(render(cube, cam, INTR))
        # every point should lie on the cube surface: max |coord| == 0.5
        dist = np.abs(np.abs(cloud.points).max(axis=1) - 0.5)
        assert dist.max() < 1e-3


class TestViewSphere:
    def test_counts_and_radius(self):
        poses = sample_view_sphere((0, 0, 0), [8.0], 1, 4)
        assert len(poses) == 4
        for p in poses:
            assert np.linalg.norm(p.position) == pytest.approx(8.0, abs=1e-9)

    def test_looking_at_actor(self):
        target = np.array([1.0, -2.0, 0.5])
        for p in sample_view_sphere(target, [8.0, 12.0], 3, 5):
            aim = target - p.position
            aim /= np.linalg.norm(aim)
            np.testing.assert_allclose(aim, p.view_dir, atol=1e-9)

    def test_upper_hemisphere(self):
        for p in sample_view_sphere((0, 0, 0), [5.0], 4, 6):
            assert p.position[2] >= 0.0


class TestIO:
    def test_ply_roundtrip(self, tmp_path, rng):
        cloud = PointCloud(rng.standard_normal((50, 3)))
        path = tmp_path / "cloud.ply"
        write_ply(cloud, path)
        loaded = read_ply_points(path)
        np.testing.assert_allclose(loaded.points, cloud.points, atol=1e-5)

    def test_pgm_header(self, tmp_path):
        cam = CameraPose((0, 0, 0), (1, 0, 0))
        view = render(facing_triangle(2.0), cam, INTR)
        path = tmp_path / "depth.pgm"
        write_depth_pgm(view, path)
        data = path.read_bytes()
        assert data.startswith(b"P5\n320 240\n65535\n")
        assert len(data) == len(b"P5\n320 240\n65535\n") + 320 * 240 * 2
