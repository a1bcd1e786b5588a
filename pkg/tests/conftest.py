"""Shared fixtures: canonical meshes and a small procedural corpus."""

from __future__ import annotations

import numpy as np
import pytest

from visfid.corpus import generate_corpus, load_manifest
from visfid.mesh import TriMesh


def make_cube(scale: float = 1.0, center=(0.0, 0.0, 0.0)) -> TriMesh:
    """Axis-aligned cube of edge length ``scale`` with outward-facing
    triangles (12 faces)."""
    c = np.asarray(center, dtype=np.float64)
    h = scale / 2.0
    corners = np.array([[x, y, z] for x in (-h, h) for y in (-h, h) for z in (-h, h)])
    # index: bit2 = x, bit1 = y, bit0 = z
    quads = [
        (0, 1, 3, 2),  # -x
        (4, 6, 7, 5),  # +x
        (0, 4, 5, 1),  # -y
        (2, 3, 7, 6),  # +y
        (0, 2, 6, 4),  # -z
        (1, 5, 7, 3),  # +z
    ]
    faces = []
    for a, b, cc, d in quads:
        faces.append((a, b, cc))
        faces.append((a, cc, d))
    return TriMesh(corners + c, np.array(faces, dtype=np.int64))


def make_grid(n: int = 16, size: float = 2.0) -> TriMesh:
    """Flat triangulated square grid in the z=0 plane with 2*n*n faces."""
    xs = np.linspace(-size / 2, size / 2, n + 1)
    vv, uu = np.meshgrid(xs, xs, indexing="ij")
    verts = np.column_stack([uu.ravel(), vv.ravel(), np.zeros((n + 1) ** 2)])
    faces = []
    for i in range(n):
        for j in range(n):
            a = i * (n + 1) + j
            b = a + 1
            c = a + (n + 1)
            d = c + 1
            faces.append((a, b, d))
            faces.append((a, d, c))
    return TriMesh(verts, np.array(faces, dtype=np.int64))


@pytest.fixture(scope="session")
def cube():
    return make_cube()


@pytest.fixture(scope="session")
def icosphere():
    from visfid.corpus import icosphere as gen

    return gen(subdivisions=3)  # 1280 faces


@pytest.fixture(scope="session")
def flat_grid():
    return make_grid(16)  # 512 faces


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """Six-object procedural corpus with a modest polygon budget."""
    root = tmp_path_factory.mktemp("corpus6")
    manifest = generate_corpus(str(root), budget=500, n_objects=6)
    return load_manifest(manifest)


@pytest.fixture(scope="session")
def small_corpus_path(small_corpus):
    import os

    return os.path.join(small_corpus.root, "manifest.yaml")
