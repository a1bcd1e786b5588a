"""Surface-distance machinery against independent oracles.

The brute-force oracle here is written from the textbook segment/plane
projection definition, independent of the library's vectorized region
classification and BVH/KDTree pruning.
"""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_cube
from visfid.geomdist import (MeshDistanceIndex, SurfaceSampler,
                             closest_points_on_triangles, metro_measures,
                             one_sided_distances)
from visfid.mesh import TriMesh, signed_volume


def oracle_point_triangle(p, a, b, c):
    """Exact point-triangle distance by dense sampling-free projection:
    clamp the barycentric solution, then check all three edges."""
    ab, ac, ap = b - a, c - a, p - a
    # project onto the plane
    n = np.cross(ab, ac)
    nn = n @ n
    best = min(np.linalg.norm(p - a), np.linalg.norm(p - b), np.linalg.norm(p - c))
    if nn > 0:
        # interior test via barycentric coordinates of the projection
        d1, d2 = ab @ ap, ac @ ap
        d00, d01, d11 = ab @ ab, ab @ ac, ac @ ac
        denom = d00 * d11 - d01 * d01
        if denom > 0:
            v = (d11 * d1 - d01 * d2) / denom
            w = (d00 * d2 - d01 * d1) / denom
            if v >= 0 and w >= 0 and v + w <= 1:
                q = a + v * ab + w * ac
                best = min(best, np.linalg.norm(p - q))
    for s, t in ((a, b), (b, c), (a, c)):
        e = t - s
        u = np.clip((p - s) @ e / (e @ e), 0.0, 1.0)
        best = min(best, np.linalg.norm(p - (s + u * e)))
    return best


def oracle_distances(points, mesh):
    out = np.empty(len(points))
    tri = mesh.vertices[mesh.faces]
    for i, p in enumerate(points):
        out[i] = min(oracle_point_triangle(p, *t) for t in tri)
    return out


class TestExactDistance:
    def test_regions_of_single_triangle(self):
        a, b, c = np.array([[0.0, 0, 0], [1.0, 0, 0], [0.0, 1, 0]])
        cases = [
            ([0.25, 0.25, 1.0], 1.0),            # above the interior
            ([-1.0, -1.0, 0.0], np.sqrt(2.0)),   # vertex region
            ([0.5, -2.0, 0.0], 2.0),             # edge region
            ([2.0, 2.0, 0.0], np.sqrt(2 * 1.5**2)),  # beyond the hypotenuse
        ]
        for p, want in cases:
            q = closest_points_on_triangles(
                np.array([p]), a[None], b[None], c[None])
            assert np.linalg.norm(np.asarray(p) - q[0]) == pytest.approx(want, abs=1e-14)

    def test_index_matches_oracle(self, icosphere):
        rng = np.random.default_rng(11)
        pts = rng.uniform(-1.5, 1.5, size=(200, 3))
        index = MeshDistanceIndex(icosphere)
        got = index.query(pts)
        want = oracle_distances(pts, icosphere)
        assert np.max(np.abs(got - want)) <= 1e-12

    def test_single_point_bvh_matches_oracle(self, icosphere):
        rng = np.random.default_rng(12)
        pts = rng.uniform(-2.0, 2.0, size=(50, 3))
        index = MeshDistanceIndex(icosphere)
        want = oracle_distances(pts, icosphere)
        for p, w in zip(pts, want):
            assert index.query_point(p) == pytest.approx(w, abs=1e-12)

    def test_on_surface_points_are_zero(self, cube):
        index = MeshDistanceIndex(cube)
        sampler = SurfaceSampler(500, seed=4)
        pts = sampler.sample(cube)
        d = index.query(pts)
        assert np.all(d == 0.0)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1))
    def test_random_queries_match_oracle(self, cube, seed):
        rng = np.random.default_rng(seed)
        pts = rng.uniform(-2, 2, size=(20, 3))
        got = MeshDistanceIndex(cube).query(pts)
        want = oracle_distances(pts, cube)
        assert np.max(np.abs(got - want)) <= 1e-12


class TestSampler:
    def test_deterministic(self, icosphere):
        a = SurfaceSampler(1000, seed=9).sample(icosphere)
        b = SurfaceSampler(1000, seed=9).sample(icosphere)
        assert np.array_equal(a, b)

    def test_area_weighting(self):
        # two triangles with areas 1/2 and 2: expect ~80% of samples on the big one
        verts = np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0],
                          [10.0, 0, 0], [12, 0, 0], [10, 2, 0]])
        m = TriMesh(verts, np.array([[0, 1, 2], [3, 4, 5]]))
        pts = SurfaceSampler(20000, seed=1).sample(m)
        frac_big = np.mean(pts[:, 0] > 5)
        assert frac_big == pytest.approx(0.8, abs=0.02)

    def test_samples_lie_on_surface(self, cube):
        pts = SurfaceSampler(2000, seed=2).sample(cube)
        # every cube surface point has max |coord| == 0.5
        assert np.allclose(np.max(np.abs(pts), axis=1), 0.5, atol=1e-12)


class TestMetro:
    def test_identity_is_exactly_zero(self, icosphere):
        mm = metro_measures(icosphere, icosphere, SurfaceSampler(5000, seed=3))
        assert mm["metro_mn"] == 0.0
        assert mm["metro_mse"] == 0.0
        assert mm["metro_max"] == 0.0
        assert mm["metro_vol"] == 0.0

    def test_concentric_cubes_one_sided_mean(self):
        inner, outer = make_cube(1.0), make_cube(1.2)
        summary = one_sided_distances(inner, outer, SurfaceSampler(50000, seed=5))
        # every inner-surface point is exactly 0.1 from the outer cube
        assert summary.mean == pytest.approx(0.1, rel=1e-9)
        assert summary.mean_sq == pytest.approx(0.01, rel=1e-9)

    def test_concentric_cubes_hausdorff(self):
        inner, outer = make_cube(1.0), make_cube(1.2)
        mm = metro_measures(inner, outer, SurfaceSampler(50000, seed=5))
        # farthest point: outer corner to inner corner = 0.1*sqrt(3)
        want = 0.1 * np.sqrt(3.0) / np.sqrt(3.0)  # normalized by diag(inner)=sqrt(3)
        assert mm["metro_max"] == pytest.approx(want, rel=1e-12)

    def test_volume_difference(self):
        inner, outer = make_cube(1.0), make_cube(1.2)
        mm = metro_measures(inner, outer, SurfaceSampler(1000, seed=5))
        assert mm["metro_vol"] == pytest.approx(1.2**3 - 1.0, abs=1e-12)

    def test_volume_orientation_independent(self, cube):
        flipped = TriMesh(cube.vertices, cube.faces[:, ::-1])
        assert abs(signed_volume(flipped)) == pytest.approx(1.0, abs=1e-12)
