"""Corpus manifest handling and procedural meshes for the bundled corpus.

The manifest is a YAML file mapping model files to object names, object
types and optional per-model camera overrides:

    budget: 960
    models:
      - name: blob
        file: meshes/blob.off
        object_type: animal
        camera: {azimuth_deg: 30, elevation_deg: 20, look_at: [0, 0, 0]}
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import yaml

from .mesh import TriMesh, load_mesh

OBJECT_TYPES = ("animal", "artifact")


class CorpusError(Exception):
    pass


@dataclass(frozen=True)
class CorpusEntry:
    name: str
    file: str
    object_type: str
    camera_overrides: dict = field(default_factory=dict)

    def load(self, root: str) -> TriMesh:
        return load_mesh(os.path.join(root, self.file), label=self.name)


@dataclass(frozen=True)
class Corpus:
    root: str
    budget: int
    entries: tuple[CorpusEntry, ...]

    @property
    def names(self):
        return [e.name for e in self.entries]

    def entry(self, name: str) -> CorpusEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise CorpusError(f"no corpus entry named {name!r}")


def load_manifest(path: str | os.PathLike) -> Corpus:
    path = os.fspath(path)
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict) or "models" not in doc:
        raise CorpusError(f"{path}: manifest must be a mapping with a 'models' list")
    entries = []
    seen = set()
    for i, item in enumerate(doc["models"]):
        try:
            name = item["name"]
            file = item["file"]
            otype = item["object_type"]
        except (TypeError, KeyError) as exc:
            raise CorpusError(f"{path}: models[{i}] missing {exc}") from None
        if otype not in OBJECT_TYPES:
            raise CorpusError(f"{path}: models[{i}] object_type must be one of {OBJECT_TYPES}")
        if name in seen:
            raise CorpusError(f"{path}: duplicate object name {name!r}")
        seen.add(name)
        entries.append(CorpusEntry(name, file, otype,
                                   dict(item.get("camera") or {})))
    return Corpus(root=os.path.dirname(os.path.abspath(path)),
                  budget=int(doc.get("budget", 3700)),
                  entries=tuple(entries))


def save_manifest(corpus: Corpus, path: str | os.PathLike) -> None:
    doc = {
        "budget": corpus.budget,
        "models": [
            {"name": e.name, "file": e.file, "object_type": e.object_type,
             **({"camera": e.camera_overrides} if e.camera_overrides else {})}
            for e in corpus.entries
        ],
    }
    with open(os.fspath(path), "w") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)


# ---------------------------------------------------------------------------
# procedural meshes


def icosphere(subdivisions: int = 3, radius: float = 1.0) -> TriMesh:
    t = (1.0 + np.sqrt(5.0)) / 2.0
    verts = [np.array(v, dtype=np.float64) for v in [
        (-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
        (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
        (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]]
    verts = [v / np.linalg.norm(v) for v in verts]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
             (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
             (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
             (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        next_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            next_faces += [(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)]
        faces = next_faces
    return TriMesh(radius * np.array(verts), np.array(faces), label="icosphere")


def torus(major: float = 1.0, minor: float = 0.35,
          nu: int = 32, nv: int = 16) -> TriMesh:
    u = np.arange(nu) * (2 * np.pi / nu)
    v = np.arange(nv) * (2 * np.pi / nv)
    uu, vv = np.meshgrid(u, v, indexing="ij")
    x = (major + minor * np.cos(vv)) * np.cos(uu)
    y = minor * np.sin(vv)
    z = (major + minor * np.cos(vv)) * np.sin(uu)
    verts = np.stack([x.ravel(), y.ravel(), z.ravel()], axis=1)
    faces = []
    for i in range(nu):
        for j in range(nv):
            a = i * nv + j
            b = ((i + 1) % nu) * nv + j
            c = ((i + 1) % nu) * nv + (j + 1) % nv
            d = i * nv + (j + 1) % nv
            faces += [(a, b, c), (a, c, d)]
    return TriMesh(verts, np.array(faces), label="torus")


def superellipsoid(e1: float = 1.0, e2: float = 1.0,
                   scales=(1.0, 1.0, 1.0), nu: int = 24, nv: int = 48) -> TriMesh:
    """Closed superquadric surface with pole caps."""

    def spow(x, e):
        return np.sign(x) * np.abs(x) ** e

    thetas = np.linspace(-np.pi / 2, np.pi / 2, nu + 1)[1:-1]
    phis = np.arange(nv) * (2 * np.pi / nv)
    rows = []
    for th in thetas:
        x = scales[0] * spow(np.cos(th), e1) * spow(np.cos(phis), e2)
        y = np.full(nv, scales[1] * spow(np.sin(th), e1))
        z = scales[2] * spow(np.cos(th), e1) * spow(np.sin(phis), e2)
        rows.append(np.stack([x, y, z], axis=1))
    verts = np.concatenate(rows)
    south = len(verts)
    north = len(verts) + 1
    verts = np.concatenate([verts, [[0, -scales[1], 0]], [[0, scales[1], 0]]])
    faces = []
    n_rows = len(thetas)
    for i in range(n_rows - 1):
        for j in range(nv):
            a = i * nv + j
            b = i * nv + (j + 1) % nv
            c = (i + 1) * nv + (j + 1) % nv
            d = (i + 1) * nv + j
            faces += [(a, c, b), (a, d, c)]
    for j in range(nv):  # caps
        faces.append((south, (j + 1) % nv, j))
        base = (n_rows - 1) * nv
        faces.append((north, base + j, base + (j + 1) % nv))
    return TriMesh(verts, np.array(faces), label="superellipsoid")


def bumpy_sphere(subdivisions: int = 3, amplitude: float = 0.25,
                 lobes: int = 3, phase: float = 0.0) -> TriMesh:
    """Icosphere with a smooth deterministic radial perturbation."""
    base = icosphere(subdivisions)
    v = base.vertices
    theta = np.arctan2(v[:, 2], v[:, 0])
    phi = np.arcsin(np.clip(v[:, 1], -1, 1))
    r = 1.0 + amplitude * np.sin(lobes * theta + phase) * np.cos(lobes * phi + phase)
    return TriMesh(v * r[:, None], base.faces, label="bumpy_sphere")


def knot(p: int = 2, q: int = 3, tube_radius: float = 0.25,
         nu: int = 96, nv: int = 12) -> TriMesh:
    """Torus-knot tube."""
    t = np.arange(nu) * (2 * np.pi / nu)
    r = np.cos(q * t) + 2.0
    center = np.stack([r * np.cos(p * t), -np.sin(q * t), r * np.sin(p * t)], axis=1)
    # frame along the curve
    nxt = np.roll(center, -1, axis=0)
    tangent = nxt - center
    tangent /= np.linalg.norm(tangent, axis=1, keepdims=True)
    ref = np.array([0.0, 1.0, 0.0])
    side = np.cross(tangent, ref)
    side /= np.linalg.norm(side, axis=1, keepdims=True)
    up = np.cross(side, tangent)
    ang = np.arange(nv) * (2 * np.pi / nv)
    verts = (center[:, None, :]
             + tube_radius * (np.cos(ang)[None, :, None] * side[:, None, :]
                              + np.sin(ang)[None, :, None] * up[:, None, :]))
    verts = verts.reshape(-1, 3)
    faces = []
    for i in range(nu):
        for j in range(nv):
            a = i * nv + j
            b = ((i + 1) % nu) * nv + j
            c = ((i + 1) % nu) * nv + (j + 1) % nv
            d = i * nv + (j + 1) % nv
            faces += [(a, b, c), (a, c, d)]
    return TriMesh(verts, np.array(faces), label="knot")


_ANIMAL_NAMES = ["blob", "slug", "urchin", "jelly", "grub", "snail",
                 "newt", "worm", "polyp", "mite", "larva", "cub",
                 "finch", "toad", "eel", "koi", "moth", "crab"]
_ARTIFACT_NAMES = ["ring", "washer", "pretzel", "cable", "box", "lens",
                   "hoop", "coil", "puck", "brick", "dome", "spool",
                   "plate", "cone", "tube", "knob", "tile", "gear"]


def _animal_builder(i: int):
    kind = i % 3
    if kind == 0:
        return lambda: bumpy_sphere(3, 0.16 + 0.03 * (i % 5), 2 + (i % 4), 0.61 * i)
    if kind == 1:
        return lambda: superellipsoid(1.2 + 0.1 * (i % 3), 1.0,
                                      (1.0, 0.6 + 0.05 * (i % 4), 1.0), 20, 40)
    return lambda: bumpy_sphere(3, 0.24 + 0.02 * (i % 4), 3 + (i % 3), 1.1 * i + 0.4)


def _artifact_builder(i: int):
    kind = i % 4
    if kind == 0:
        return lambda: torus(1.0, 0.15 + 0.04 * (i % 5), 40, 20)
    if kind == 1:
        return lambda: knot(2 + (i % 2), 3 - (i % 2), 0.2 + 0.02 * (i % 4), 80, 12)
    if kind == 2:
        return lambda: superellipsoid(0.3, 0.3 + 0.1 * (i % 3),
                                      (0.8, 0.5 + 0.05 * (i % 4), 1.0), 20, 40)
    return lambda: superellipsoid(1.0, 0.4 + 0.1 * (i % 3),
                                  (1.0, 0.35 + 0.05 * (i % 3), 1.0), 20, 40)


def generate_corpus(out_dir: str | os.PathLike, budget: int = 640,
                    n_objects: int = 12) -> str:
    """Write a procedural corpus (meshes/ + manifest.yaml); returns the
    manifest path.  Half the objects are labeled animals (organic blobs)
    and half artifacts (regular solids); all exceed the standardization
    budget.  Supports up to 36 objects."""
    from .mesh import save_off

    if n_objects % 2 or n_objects < 2:
        raise CorpusError("n_objects must be even and >= 2")
    half = n_objects // 2
    if half > len(_ANIMAL_NAMES):
        raise CorpusError(f"at most {2 * len(_ANIMAL_NAMES)} procedural objects available")
    out_dir = os.fspath(out_dir)
    mesh_dir = os.path.join(out_dir, "meshes")
    os.makedirs(mesh_dir, exist_ok=True)
    entries = []
    specs = [(_ANIMAL_NAMES[i], "animal", _animal_builder(i)) for i in range(half)]
    specs += [(_ARTIFACT_NAMES[i], "artifact", _artifact_builder(i)) for i in range(half)]
    for name, otype, build in specs:
        mesh = build()
        if mesh.n_faces < budget:
            raise CorpusError(
                f"procedural mesh {name} has {mesh.n_faces} faces, below budget {budget}")
        save_off(mesh, os.path.join(mesh_dir, f"{name}.off"))
        entries.append(CorpusEntry(name, f"meshes/{name}.off", otype))
    corpus = Corpus(root=out_dir, budget=budget, entries=tuple(entries))
    manifest = os.path.join(out_dir, "manifest.yaml")
    save_manifest(corpus, manifest)
    return manifest
