"""Simplification: quadric edge collapse and vertex clustering.

Oracles: a flat grid must collapse to a plane with zero geometric error;
a cube's quadric minimum at each corner is the corner itself; clustering
counts follow directly from the grid resolution.
"""

from __future__ import annotations

import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_cube, make_grid
from visfid.geomdist import MeshDistanceIndex, SurfaceSampler, metro_measures
from visfid.mesh import TriMesh, bounding_box, diagonal, surface_area
from visfid.simplify import (Algorithm, SimplifySpec, TargetUnreachableWarning,
                             build_family, qem_simplify, standardize,
                             vclust_to_target, vertex_cluster)


class TestQem:
    def test_identity_when_target_met(self, icosphere):
        out = qem_simplify(icosphere, SimplifySpec(Algorithm.QEM, icosphere.n_faces))
        assert out.n_faces == icosphere.n_faces

    def test_flat_grid_collapses_to_plane(self, flat_grid):
        out = qem_simplify(flat_grid, SimplifySpec(Algorithm.QEM, 8))
        assert out.n_faces <= 8
        # all geometry must remain exactly in the z=0 plane with the
        # original footprint
        assert np.all(out.vertices[:, 2] == 0.0)
        assert surface_area(out) == pytest.approx(surface_area(flat_grid), rel=1e-9)
        mm = metro_measures(flat_grid, out, SurfaceSampler(20000, seed=1))
        assert mm["metro_max"] < 1e-6

    def test_cube_is_a_fixed_point_down_to_12(self, cube):
        # a cube cannot be simplified below 12 faces without distortion,
        # but 12 -> 12 must keep the exact corner geometry
        out = qem_simplify(cube, SimplifySpec(Algorithm.QEM, 12))
        assert np.array_equal(np.sort(out.vertices.view("f8,f8,f8"), axis=0),
                              np.sort(cube.vertices.view("f8,f8,f8"), axis=0))

    def test_deterministic(self, icosphere):
        a = qem_simplify(icosphere, SimplifySpec(Algorithm.QEM, 200))
        b = qem_simplify(icosphere, SimplifySpec(Algorithm.QEM, 200))
        assert np.array_equal(a.vertices, b.vertices)
        assert np.array_equal(a.faces, b.faces)

    def test_monotone_error(self, icosphere):
        sampler = SurfaceSampler(20000, seed=2)
        errs = []
        for target in (640, 160, 40):
            out = qem_simplify(icosphere, SimplifySpec(Algorithm.QEM, target))
            errs.append(metro_measures(icosphere, out, sampler)["metro_mn"])
        assert errs[0] < errs[1] < errs[2]

    def test_no_degenerate_output(self, icosphere):
        out = qem_simplify(icosphere, SimplifySpec(Algorithm.QEM, 100))
        assert out.degenerate_face_count() == 0
        # no duplicated faces
        key = np.sort(out.faces, axis=1)
        assert len(np.unique(key, axis=0)) == out.n_faces

    @settings(max_examples=10, deadline=None)
    @given(target=st.integers(20, 1200))
    def test_reaches_target_on_closed_mesh(self, icosphere, target):
        out = qem_simplify(icosphere, SimplifySpec(Algorithm.QEM, target))
        assert out.n_faces <= max(target, 4)


class TestVclust:
    def test_one_cell_collapses_everything(self, icosphere):
        out = vertex_cluster(icosphere, 1)
        assert out.n_faces == 0

    def test_fine_grid_is_identity_like(self, cube):
        # with a very fine grid every vertex is alone in its cell
        out = vertex_cluster(cube, 64)
        assert out.n_faces == cube.n_faces
        assert np.allclose(np.sort(out.vertices, axis=0),
                           np.sort(cube.vertices, axis=0))

    def test_representative_is_cell_centroid(self):
        # two vertices in one cell, third elsewhere: rep = midpoint
        verts = np.array([[0.0, 0, 0], [0.1, 0, 0], [10.0, 0, 0],
                          [0.0, 10, 0]])
        m = TriMesh(verts, np.array([[0, 2, 3], [1, 2, 3]]))
        out = vertex_cluster(m, 4)
        xs = out.vertices[:, 0]
        assert np.any(np.abs(xs - 0.05) < 1e-12)

    def test_duplicate_faces_collapsed(self):
        verts = np.array([[0.0, 0, 0], [0.1, 0, 0], [10.0, 0, 0],
                          [0.0, 10, 0]])
        m = TriMesh(verts, np.array([[0, 2, 3], [1, 2, 3]]))
        out = vertex_cluster(m, 4)
        assert out.n_faces == 1  # the two faces become identical

    def test_to_target_binary_search(self, icosphere):
        res = vclust_to_target(icosphere, 300)
        assert res.achieved_faces == res.mesh.n_faces
        assert res.achieved_faces <= round(1.02 * 300)
        assert 1 <= res.cells_per_axis <= 1024

    def test_unreachable_target_warns(self, cube):
        # cube clustering yields only 0 or 12 faces; 6 is unreachable
        with pytest.warns(TargetUnreachableWarning):
            vclust_to_target(cube, 6)


class TestFamily:
    def test_build_family_targets(self, icosphere, tmp_path):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TargetUnreachableWarning)
            fam = build_family(icosphere, budget=640, name="ball", object_type="animal")
        assert fam.s.n_faces == 640
        assert fam.q5.n_faces <= 320
        assert fam.q8.n_faces <= 128
        assert set(fam.versions()) == {"s", "q5", "q8", "v5", "v8"}
        assert [p for p, _ in fam.pairs()] == ["s,q5", "s,q8", "s,v5", "s,v8"]

    def test_standardize_uses_qem(self, icosphere):
        out = standardize(icosphere, 320)
        assert out.n_faces <= 320
        ref = qem_simplify(icosphere, SimplifySpec(Algorithm.QEM, 320))
        assert np.array_equal(out.faces, ref.faces)
