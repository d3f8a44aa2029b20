"""Multi-patch tour planning: quality-thresholded viewpoint neighborhoods and
a nearest-neighbor + 2-opt heuristic for the shortest visiting path."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .actor import Patch
from .ppa import ppa_constrained


class InfeasibleThresholdError(ValueError):
    """Quality threshold exceeds the best achievable at the safety radius."""


@dataclass(frozen=True)
class Neighborhood:
    patch_index: int
    candidate_viewpoints: np.ndarray  # (k, 3)

    def centroid(self) -> np.ndarray:
        return self.candidate_viewpoints.mean(axis=0)


@dataclass(frozen=True)
class Tour:
    order: tuple  # patch indices, each exactly once
    viewpoints: np.ndarray  # (m, 3), chosen viewpoint per stop
    total_length: float


def build_neighborhood(patch: Patch, c_threshold: float, r_safe: float,
                       samples: int, rng, patch_index: int = 0) -> Neighborhood:
    """Seeded rejection sampling of viewpoints with quality >= c_threshold and
    distance >= r_safe from the patch.

    The feasible set shrinks to the single point at r_safe along the normal as
    c_threshold approaches 1/r_safe; that near-degenerate case returns the apex
    point alone.
    """
    if c_threshold <= 0 or r_safe <= 0 or samples < 1:
        raise ValueError("c_threshold, r_safe and samples must be positive")
    if c_threshold > 1.0 / r_safe:
        raise InfeasibleThresholdError(
            f"threshold {c_threshold} infeasible: head-on quality at the safety "
            f"radius is {1.0 / r_safe}")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    n = patch.normal
    apex = patch.centroid + r_safe * n
    d_max = 1.0 / c_threshold
    if d_max - r_safe < 1e-9:
        return Neighborhood(patch_index, apex[None, :].copy())
    # orthonormal frame around the patch normal
    aux = np.array([1.0, 0.0, 0.0])
    if abs(n @ aux) > 0.9:
        aux = np.array([0.0, 1.0, 0.0])
    e1 = np.cross(n, aux)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    accepted = []
    attempts = 0
    max_attempts = samples * 200
    while len(accepted) < samples and attempts < max_attempts:
        attempts += 1
        cos_a = rng.random()
        d = r_safe + (d_max - r_safe) * rng.random()
        if cos_a < c_threshold * d:
            continue
        az = 2.0 * math.pi * rng.random()
        sin_a = math.sqrt(1.0 - cos_a * cos_a)
        direction = cos_a * n + sin_a * (math.cos(az) * e1 + math.sin(az) * e2)
        accepted.append(patch.centroid + d * direction)
    if not accepted:
        raise InfeasibleThresholdError(
            "no feasible viewpoint found; threshold is near-degenerate")
    return Neighborhood(patch_index, np.asarray(accepted))


def _path_length(points: np.ndarray) -> float:
    return float(np.linalg.norm(np.diff(points, axis=0), axis=1).sum())


def _nearest_construction(neighborhoods, start: int):
    centroids = [nb.centroid() for nb in neighborhoods]
    m = len(neighborhoods)
    order = [start]
    first = neighborhoods[start]
    current = first.candidate_viewpoints[
        np.argmin(np.linalg.norm(first.candidate_viewpoints - centroids[start], axis=1))]
    chosen = {start: current}
    remaining = set(range(m)) - {start}
    while remaining:
        nxt = min(remaining,
                  key=lambda j: (np.linalg.norm(centroids[j] - current), j))
        cands = neighborhoods[nxt].candidate_viewpoints
        current = cands[np.argmin(np.linalg.norm(cands - current, axis=1))]
        chosen[nxt] = current
        order.append(nxt)
        remaining.discard(nxt)
    pts = np.asarray([chosen[j] for j in order])
    return order, pts


def _reselect(neighborhoods, order, pts):
    """Coordinate descent: best candidate per stop given its neighbors."""
    improved = False
    for k, j in enumerate(order):
        cands = neighborhoods[j].candidate_viewpoints
        cost = np.zeros(len(cands))
        if k > 0:
            cost += np.linalg.norm(cands - pts[k - 1], axis=1)
        if k < len(order) - 1:
            cost += np.linalg.norm(cands - pts[k + 1], axis=1)
        best = int(np.argmin(cost))
        if not np.allclose(cands[best], pts[k]):
            old = np.linalg.norm(pts[k] - pts[k - 1]) if k > 0 else 0.0
            old += np.linalg.norm(pts[k] - pts[k + 1]) if k < len(order) - 1 else 0.0
            if cost[best] < old - 1e-12:
                pts[k] = cands[best]
                improved = True
    return improved


def _two_opt(order, pts):
    """Open-path 2-opt: reverse segments while the total length improves."""
    m = len(order)
    improved = False
    for i in range(m - 1):
        for j in range(i + 1, m):
            new_pts = np.vstack([pts[:i], pts[i:j + 1][::-1], pts[j + 1:]])
            if _path_length(new_pts) < _path_length(pts) - 1e-12:
                pts[:] = new_pts
                order[i:j + 1] = order[i:j + 1][::-1]
                improved = True
    return improved


def solve_tour(neighborhoods: list[Neighborhood], seed: int = 0) -> Tour:
    """Nearest-neighbor construction (best over all starts) refined by 2-opt
    plus per-stop candidate re-selection; deterministic."""
    if not neighborhoods:
        raise ValueError("no neighborhoods to tour")
    for nb in neighborhoods:
        if len(nb.candidate_viewpoints) == 0:
            raise ValueError(f"neighborhood {nb.patch_index} has no candidates")
    if len(neighborhoods) == 1:
        nb = neighborhoods[0]
        return Tour((nb.patch_index,), nb.candidate_viewpoints[:1].copy(), 0.0)

    best_order, best_pts = None, None
    for start in range(len(neighborhoods)):
        order, pts = _nearest_construction(neighborhoods, start)
        if best_pts is None or _path_length(pts) < _path_length(best_pts):
            best_order, best_pts = order, pts
    for _ in range(100):
        changed = _two_opt(best_order, best_pts)
        changed |= _reselect(neighborhoods, best_order, best_pts)
        if not changed:
            break
    patch_ids = tuple(neighborhoods[j].patch_index for j in best_order)
    return Tour(patch_ids, best_pts, _path_length(best_pts))


def validate_tour(tour: Tour, patches: list[Patch], c_threshold: float,
                  r_safe: float, tol: float = 1e-9) -> bool:
    """Post-hoc re-check of both neighborhood constraints at every stop."""
    for patch_index, vp in zip(tour.order, tour.viewpoints):
        patch = patches[patch_index]
        if np.linalg.norm(vp - patch.centroid) < r_safe - tol:
            return False
        if ppa_constrained(vp, patch) < c_threshold - tol:
            return False
    return True


def brute_force_tour(neighborhoods: list[Neighborhood]) -> Tour:
    """Exhaustive optimum over visit orders for singleton neighborhoods."""
    pts = [nb.candidate_viewpoints[0] for nb in neighborhoods]
    best_perm, best_len = None, np.inf
    for perm in itertools.permutations(range(len(pts))):
        length = _path_length(np.asarray([pts[j] for j in perm]))
        if length < best_len:
            best_perm, best_len = perm, length
    patch_ids = tuple(neighborhoods[j].patch_index for j in best_perm)
    return Tour(patch_ids, np.asarray([pts[j] for j in best_perm]), best_len)
