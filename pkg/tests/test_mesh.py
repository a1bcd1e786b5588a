"""Mesh container, file formats, and basic geometric quantities.

Oracles: the unit cube (area 6, volume 1, diagonal sqrt(3)) and exact
hand-written OFF/OBJ/PLY snippets.
"""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_cube
from visfid.mesh import (MeshParseError, TriMesh, bounding_box, diagonal,
                         load_mesh, save_off, signed_volume, surface_area,
                         vertex_centroid)


class TestTriMesh:
    def test_invariants_rejected(self):
        verts = np.zeros((3, 3))
        with pytest.raises(Exception):
            TriMesh(verts, np.array([[0, 1, 5]]))  # index out of range
        with pytest.raises(Exception):
            TriMesh(verts, np.array([[0, 1]]))  # not triangles
        with pytest.raises(Exception):
            TriMesh(np.array([[0.0, 0.0, np.nan]]), np.zeros((0, 3), dtype=np.int64))

    def test_dtypes(self, cube):
        assert cube.vertices.dtype == np.float64
        assert cube.faces.dtype == np.int64

    def test_cube_quantities(self, cube):
        assert surface_area(cube) == pytest.approx(6.0, abs=1e-12)
        assert signed_volume(cube) == pytest.approx(1.0, abs=1e-12)
        assert diagonal(bounding_box(cube)) == pytest.approx(math.sqrt(3.0), abs=1e-12)
        assert np.allclose(vertex_centroid(cube), 0.0)

    def test_scaled_shifted_cube(self):
        m = make_cube(scale=1.2, center=(3.0, -1.0, 2.0))
        assert surface_area(m) == pytest.approx(6 * 1.2**2, abs=1e-12)
        assert signed_volume(m) == pytest.approx(1.2**3, abs=1e-12)
        box = bounding_box(m)
        assert np.allclose(box.max - box.min, 1.2)

    def test_volume_orientation(self, cube):
        flipped = TriMesh(cube.vertices, cube.faces[:, ::-1])
        assert signed_volume(flipped) == pytest.approx(-1.0, abs=1e-12)


class TestFormats:
    def test_off_round_trip_bit_exact(self, tmp_path, icosphere):
        p = tmp_path / "m.off"
        save_off(icosphere, p)
        again = load_mesh(p)
        assert np.array_equal(icosphere.vertices, again.vertices)
        assert np.array_equal(icosphere.faces, again.faces)

    def test_obj(self, tmp_path):
        p = tmp_path / "m.obj"
        p.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 3\nf 2 4 3\n")
        m = load_mesh(p)
        assert m.n_vertices == 4 and m.n_faces == 2

    def test_obj_quad_fan(self, tmp_path):
        p = tmp_path / "m.obj"
        p.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
        m = load_mesh(p)
        assert m.n_faces == 2  # quad triangulated as a fan

    def test_ply_ascii(self, tmp_path):
        p = tmp_path / "m.ply"
        p.write_text(
            "ply\nformat ascii 1.0\nelement vertex 3\n"
            "property float x\nproperty float y\nproperty float z\n"
            "element face 1\nproperty list uchar int vertex_indices\n"
            "end_header\n0 0 0\n1 0 0\n0 1 0\n3 0 1 2\n")
        m = load_mesh(p)
        assert m.n_vertices == 3 and m.n_faces == 1

    def test_parse_error_has_line_number(self, tmp_path):
        p = tmp_path / "bad.off"
        p.write_text("OFF\n3 1 0\n0 0 zero\n")
        with pytest.raises(MeshParseError) as exc:
            load_mesh(p)
        assert ":3:" in str(exc.value)

    @settings(max_examples=25, deadline=None)
    @given(scale=st.floats(0.01, 100.0), shift=st.floats(-50.0, 50.0))
    def test_round_trip_any_cube(self, tmp_path_factory, scale, shift):
        m = make_cube(scale=scale, center=(shift, -shift, shift / 2))
        p = tmp_path_factory.mktemp("rt") / "c.off"
        save_off(m, p)
        again = load_mesh(p)
        assert np.array_equal(m.vertices, again.vertices)
