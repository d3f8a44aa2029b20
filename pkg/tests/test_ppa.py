"""Value and gradient checks for the view-quality core.

Gradients are verified against central finite differences of an
independently coded quality sum (the oracle normalizes the view direction
explicitly, so perturbing it off the unit sphere is well-defined).
"""

import math

import numpy as np
import pytest

from ppaplan.actor import Patch
from ppaplan.ppa import (CameraPose, ppa_constrained, ppa_constrained_gradient,
                         ppa_constrained_sum, ppa_jacobian, ppa_sum, ppa_value,
                         visible_patches)

from conftest import random_unit


def oracle_sum(position, view_dir, patches):
    """Brute-force quality sum, written independently of the library path."""
    total = 0.0
    for p in patches:
        rel = np.asarray(position) - p.centroid
        d = math.sqrt(float(rel @ rel))
        cos_a = abs(float(np.asarray(view_dir) @ p.normal)) / np.linalg.norm(view_dir)
        total += cos_a / d
    return total


def oracle_constrained_sum(position, patches):
    total = 0.0
    for p in patches:
        rel = np.asarray(position) - p.centroid
        total += float(rel @ p.normal) / float(rel @ rel)
    return total


def fd_gradient(fn, x, eps=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.zeros(3)
    for i in range(3):
        e = np.zeros(3)
        e[i] = eps
        g[i] = (fn(x + e) - fn(x - e)) / (2 * eps)
    return g


def random_config(rng, n_patches=5, min_dist=0.5, min_cos=0.05):
    """Random camera/patch layout, bounded away from grazing and contact."""
    pos = rng.standard_normal(3) * 3.0
    view = random_unit(rng)
    patches = []
    while len(patches) < n_patches:
        c = rng.standard_normal(3) * 2.0
        n = random_unit(rng)
        if np.linalg.norm(pos - c) < min_dist:
            continue
        if abs(view @ n) < min_cos:
            continue
        patches.append(Patch(c, n))
    return CameraPose(pos, view), patches


HEAD_ON = (CameraPose((0, 0, 0), (1, 0, 0)), Patch((2, 0, 0), (-1, 0, 0)))


class TestValue:
    def test_head_on(self):
        cam, patch = HEAD_ON
        assert ppa_value(cam, patch) == pytest.approx(0.5)

    def test_oblique_45deg(self):
        cam, _ = HEAD_ON
        patch = Patch((2, 0, 0), (-math.sqrt(2) / 2, math.sqrt(2) / 2, 0))
        assert ppa_value(cam, patch) == pytest.approx(0.353553, abs=1e-6)

    def test_grazing(self):
        cam, _ = HEAD_ON
        assert ppa_value(cam, Patch((2, 0, 0), (0, 0, 1))) == 0.0

    def test_nonnegative_and_scale_covariant(self, rng):
        for _ in range(50):
            cam, patches = random_config(rng, n_patches=1)
            v = ppa_value(cam, patches[0])
            assert v >= 0.0
            s = 3.0
            cam2 = CameraPose(cam.position * s, cam.view_dir)
            patch2 = Patch(patches[0].centroid * s, patches[0].normal)
            assert ppa_value(cam2, patch2) == pytest.approx(v / s, rel=1e-12)

    def test_zero_distance_raises(self):
        cam, _ = HEAD_ON
        with pytest.raises(ValueError):
            ppa_value(cam, Patch((0, 0, 0), (1, 0, 0)))


class TestVisibility:
    def test_head_on_retained(self):
        cam, patch = HEAD_ON
        assert visible_patches(cam, [patch]) == [patch]

    def test_back_facing_filtered(self):
        cam, _ = HEAD_ON
        assert visible_patches(cam, [Patch((2, 0, 0), (1, 0, 0))]) == []

    def test_behind_camera_filtered(self):
        cam, _ = HEAD_ON
        assert visible_patches(cam, [Patch((-2, 0, 0), (1, 0, 0))]) == []


class TestSum:
    def test_single(self):
        cam, patch = HEAD_ON
        assert ppa_sum(cam, [patch]) == pytest.approx(0.5)

    def test_additivity(self):
        cam, patch = HEAD_ON
        assert ppa_sum(cam, [patch, patch]) == pytest.approx(1.0)

    def test_matches_per_patch_loop(self):
        from ppaplan.actor import mesh_to_patches
        from ppaplan.shapes import unit_cube
        cam = CameraPose.looking_at((6, 1, 2), (0, 0, 0))
        patches = visible_patches(cam, mesh_to_patches(unit_cube()))
        assert ppa_sum(cam, patches) == pytest.approx(
            sum(ppa_value(cam, p) for p in patches), rel=1e-12)

    def test_empty(self):
        cam, _ = HEAD_ON
        assert ppa_sum(cam, []) == 0.0


class TestJacobian:
    def test_head_on_position_gradient(self):
        cam, patch = HEAD_ON
        g = ppa_jacobian(cam, [patch])
        np.testing.assert_allclose(g.d_position, [0.25, 0, 0], atol=1e-12)

    def test_head_on_orientation_stationary(self):
        cam, patch = HEAD_ON
        g = ppa_jacobian(cam, [patch])
        np.testing.assert_allclose(g.d_view_dir, [0, 0, 0], atol=1e-9)

    def test_matches_finite_differences(self, rng):
        for _ in range(300):
            cam, patches = random_config(rng)
            g = ppa_jacobian(cam, patches)
            fd_pos = fd_gradient(lambda x: oracle_sum(x, cam.view_dir, patches),
                                 cam.position)
            fd_view = fd_gradient(lambda n: oracle_sum(cam.position, n, patches),
                                  cam.view_dir)
            assert np.linalg.norm(g.d_position - fd_pos) < 1e-6 * max(
                np.linalg.norm(fd_pos), 1.0)
            assert np.linalg.norm(g.d_view_dir - fd_view) < 1e-6 * max(
                np.linalg.norm(fd_view), 1.0)

    def test_tangency(self, rng):
        for _ in range(100):
            cam, patches = random_config(rng)
            g = ppa_jacobian(cam, patches)
            assert abs(g.d_view_dir @ cam.view_dir) < 1e-9

    def test_small_ascent_step(self, rng):
        eps = 1e-4
        for _ in range(100):
            cam, patches = random_config(rng)
            g = ppa_jacobian(cam, patches)
            before = oracle_sum(cam.position, cam.view_dir, patches)
            nd = cam.view_dir + eps * g.d_view_dir
            after = oracle_sum(cam.position + eps * g.d_position,
                               nd / np.linalg.norm(nd), patches)
            assert after >= before - 1e-12


class TestConstrained:
    def test_head_on(self):
        patch = Patch((0, 0, 0), (1, 0, 0))
        assert ppa_constrained((2, 0, 0), patch) == pytest.approx(0.5)

    def test_grazing(self):
        patch = Patch((0, 0, 0), (1, 0, 0))
        assert ppa_constrained((0, 2, 0), patch) == pytest.approx(0.0)

    def test_oblique(self):
        patch = Patch((0, 0, 0), (1, 0, 0))
        assert ppa_constrained((2, 2, 0), patch) == pytest.approx(0.25)

    def test_gradient_matches_finite_differences(self, rng):
        for _ in range(300):
            pos = rng.standard_normal(3) * 3.0
            patches = []
            while len(patches) < 4:
                c = rng.standard_normal(3) * 1.5
                if np.linalg.norm(pos - c) >= 0.5:
                    patches.append(Patch(c, random_unit(rng)))
            g = ppa_constrained_gradient(pos, patches)
            fd = fd_gradient(lambda x: oracle_constrained_sum(x, patches), pos)
            assert np.linalg.norm(g - fd) < 1e-6 * max(np.linalg.norm(fd), 1.0)

    def test_on_axis_gradient_parallel_to_normal(self):
        patch = Patch((0, 0, 0), (0, 0, 1))
        g = ppa_constrained_gradient((0, 0, 3.0), [patch])
        assert abs(g[0]) < 1e-12 and abs(g[1]) < 1e-12

    def test_level_set_circle(self):
        # all points with d = t*cos(alpha) have constrained quality 1/t
        patch = Patch((0, 0, 0), (0, 0, 1))
        t = 5.0
        for alpha in np.linspace(0.0, math.pi / 2 - 0.01, 360):
            d = t * math.cos(alpha)
            if d <= 0:
                continue
            pos = d * np.array([math.sin(alpha), 0.0, math.cos(alpha)])
            assert ppa_constrained(pos, patch) == pytest.approx(1 / t, abs=1e-12)

    def test_circle_tangential_gradient_vanishes(self):
        # the gradient is normal to the level-set circle
        patch = Patch((0, 0, 0), (0, 0, 1))
        t = 4.0
        for alpha in np.linspace(0.05, math.pi / 2 - 0.05, 25):
            d = t * math.cos(alpha)
            pos = d * np.array([math.sin(alpha), 0.0, math.cos(alpha)])
            g = ppa_constrained_gradient(pos, [patch])
            # tangent of the circle at pos, within the x-z plane
            tangent = np.array([math.cos(2 * alpha), 0.0, -math.sin(2 * alpha)])
            # numerical check: moving along the circle keeps the value constant
            assert abs(g @ tangent) < 1e-9

    def test_sum_consistency(self, rng):
        pos = np.array([3.0, 1.0, 2.0])
        patches = [Patch(rng.standard_normal(3), random_unit(rng)) for _ in range(6)]
        assert ppa_constrained_sum(pos, patches) == pytest.approx(
            sum(ppa_constrained(pos, p) for p in patches), rel=1e-12)
