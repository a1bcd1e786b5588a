"""Triangle mesh container, file I/O, and global geometric quantities."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np


class MeshError(Exception):
    """Invalid mesh data or unusable mesh file."""


class MeshParseError(MeshError):
    def __init__(self, path, line, message):
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


@dataclass(frozen=True)
class Aabb:
    """Axis-aligned bounding box."""

    min: np.ndarray
    max: np.ndarray

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.max - self.min))

    @property
    def is_degenerate(self) -> bool:
        return self.diagonal == 0.0


@dataclass(frozen=True)
class TriMesh:
    """Indexed triangle mesh. Immutable after construction.

    Degenerate faces (repeated indices, zero area) are tolerated because
    vertex clustering legitimately produces them; they are countable via
    :meth:`degenerate_face_count`.
    """

    vertices: np.ndarray  # (n, 3) float64
    faces: np.ndarray  # (m, 3) int64
    label: str = ""

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64))
        f = np.ascontiguousarray(np.asarray(self.faces, dtype=np.int64))
        if v.ndim != 2 or v.shape[1] != 3:
            raise MeshError(f"vertices must be (n, 3), got {v.shape}")
        if f.size == 0:
            f = f.reshape(0, 3)
        if f.ndim != 2 or f.shape[1] != 3:
            raise MeshError(f"faces must be (m, 3), got {f.shape}")
        if not np.isfinite(v).all():
            raise MeshError("vertex coordinates must be finite")
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise MeshError(
                f"face index out of range: max index {f.max() if f.size else 0} "
                f"for {len(v)} vertices"
            )
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def triangle_corners(self):
        """Corner arrays (a, b, c), each (m, 3)."""
        v, f = self.vertices, self.faces
        return v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]

    def face_areas(self) -> np.ndarray:
        a, b, c = self.triangle_corners()
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def degenerate_face_count(self) -> int:
        f = self.faces
        repeated = (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])
        return int(np.count_nonzero(repeated | (self.face_areas() == 0.0)))

    def nondegenerate_face_count(self) -> int:
        return self.n_faces - self.degenerate_face_count()

    def is_closed(self) -> bool:
        """True when every undirected edge is shared by exactly two faces."""
        f = self.faces
        if f.size == 0:
            return False
        edges = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        edges = np.sort(edges, axis=1)
        _, counts = np.unique(edges, axis=0, return_counts=True)
        return bool((counts == 2).all())


def bounding_box(mesh: TriMesh) -> Aabb:
    if mesh.n_vertices == 0:
        raise MeshError("bounding box of an empty mesh is undefined")
    return Aabb(mesh.vertices.min(axis=0), mesh.vertices.max(axis=0))


def diagonal(aabb: Aabb) -> float:
    return aabb.diagonal


def surface_area(mesh: TriMesh) -> float:
    if mesh.n_faces == 0:
        return 0.0
    return float(mesh.face_areas().sum())


def signed_volume(mesh: TriMesh) -> float:
    """Divergence-theorem sum of tetrahedra against the origin.

    Exact (up to rounding) for closed consistently-oriented meshes; open
    meshes yield a defined but geometry-dependent value.
    """
    if mesh.n_faces == 0:
        return 0.0
    a, b, c = mesh.triangle_corners()
    return float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)


def vertex_centroid(mesh: TriMesh) -> np.ndarray:
    if mesh.n_vertices == 0:
        raise MeshError("centroid of an empty mesh is undefined")
    return mesh.vertices.mean(axis=0)


# ---------------------------------------------------------------------------
# File I/O.  Native interchange format is ASCII OFF; OBJ and ASCII PLY are
# read-only.  Polygonal faces with more than 3 vertices are fan-triangulated.


def _fan(indices, path, lineno):
    if len(indices) < 3:
        raise MeshParseError(path, lineno, f"face with {len(indices)} vertices")
    return [(indices[0], indices[i], indices[i + 1]) for i in range(1, len(indices) - 1)]


def _load_off(path):
    with open(path) as fh:
        lines = fh.readlines()
    tokens = []  # (lineno, token list) with comments/blank lines stripped
    for i, line in enumerate(lines, start=1):
        body = line.split("#", 1)[0].strip()
        if body:
            tokens.append((i, body.split()))
    if not tokens:
        raise MeshParseError(path, 1, "empty OFF file")
    pos = 0
    if tokens[0][1] == ["OFF"]:
        pos = 1
    elif tokens[0][1][0] == "OFF":  # counts on the header line
        tokens[0] = (tokens[0][0], tokens[0][1][1:])
    if pos >= len(tokens):
        raise MeshParseError(path, tokens[-1][0], "missing OFF counts")
    lineno, counts = tokens[pos]
    if len(counts) < 2:
        raise MeshParseError(path, lineno, "OFF counts line needs nv nf")
    try:
        nv, nf = int(counts[0]), int(counts[1])
    except ValueError:
        raise MeshParseError(path, lineno, f"bad OFF counts {counts!r}") from None
    pos += 1
    if len(tokens) < pos + nv + nf:
        raise MeshParseError(path, tokens[-1][0], "truncated OFF file")
    vertices = []
    for lineno, toks in tokens[pos : pos + nv]:
        try:
            vertices.append([float(t) for t in toks[:3]])
        except (ValueError, IndexError):
            raise MeshParseError(path, lineno, f"bad vertex line {toks!r}") from None
    faces = []
    for lineno, toks in tokens[pos + nv : pos + nv + nf]:
        try:
            k = int(toks[0])
            idx = [int(t) for t in toks[1 : 1 + k]]
        except (ValueError, IndexError):
            raise MeshParseError(path, lineno, f"bad face line {toks!r}") from None
        if len(idx) != k:
            raise MeshParseError(path, lineno, "face vertex count mismatch")
        faces.extend(_fan(idx, path, lineno))
    return vertices, faces


def _load_obj(path):
    vertices, faces = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            toks = body.split()
            if toks[0] == "v":
                try:
                    vertices.append([float(t) for t in toks[1:4]])
                except (ValueError, IndexError):
                    raise MeshParseError(path, lineno, f"bad vertex {body!r}") from None
            elif toks[0] == "f":
                try:
                    raw = [int(t.split("/", 1)[0]) for t in toks[1:]]
                except ValueError:
                    raise MeshParseError(path, lineno, f"bad face {body!r}") from None
                # OBJ indices are 1-based; negatives count from the end
                idx = [r - 1 if r > 0 else len(vertices) + r for r in raw]
                faces.extend(_fan(idx, path, lineno))
    return vertices, faces


def _load_ply_ascii(path):
    with open(path) as fh:
        lines = fh.readlines()
    if not lines or lines[0].strip() != "ply":
        raise MeshParseError(path, 1, "not a PLY file")
    nv = nf = None
    elements = []  # (name, count) in declaration order
    body_start = None
    vertex_props = []
    current_element = None
    for lineno, line in enumerate(lines[1:], start=2):
        toks = line.split()
        if not toks:
            continue
        if toks[0] == "format":
            if toks[1] != "ascii":
                raise MeshParseError(path, lineno, "only ascii PLY is supported")
        elif toks[0] == "element":
            current_element = toks[1]
            elements.append((toks[1], int(toks[2])))
            if toks[1] == "vertex":
                nv = int(toks[2])
            elif toks[1] == "face":
                nf = int(toks[2])
        elif toks[0] == "property" and current_element == "vertex" and toks[1] != "list":
            vertex_props.append(toks[-1])
        elif toks[0] == "end_header":
            body_start = lineno
            break
    if body_start is None or nv is None or nf is None:
        raise MeshParseError(path, len(lines), "incomplete PLY header")
    try:
        xi, yi, zi = (vertex_props.index(k) for k in ("x", "y", "z"))
    except ValueError:
        raise MeshParseError(path, body_start, "PLY vertex element lacks x/y/z") from None
    data = [
        (lineno, line.split())
        for lineno, line in enumerate(lines[body_start:], start=body_start + 1)
        if line.strip()
    ]
    vertices, faces = [], []
    pos = 0
    for name, count in elements:
        if pos + count > len(data):
            raise MeshParseError(path, len(lines), "truncated PLY body")
        rows = data[pos : pos + count]
        pos += count
        if name == "vertex":
            for lineno, toks in rows:
                try:
                    vertices.append([float(toks[xi]), float(toks[yi]), float(toks[zi])])
                except (ValueError, IndexError):
                    raise MeshParseError(path, lineno, "bad PLY vertex") from None
        elif name == "face":
            for lineno, toks in rows:
                try:
                    k = int(toks[0])
                    idx = [int(t) for t in toks[1 : 1 + k]]
                except (ValueError, IndexError):
                    raise MeshParseError(path, lineno, "bad PLY face") from None
                faces.extend(_fan(idx, path, lineno))
    return vertices, faces


_LOADERS = {"off": _load_off, "obj": _load_obj, "ply": _load_ply_ascii}


def load_mesh(path: str | os.PathLike, fmt: str | None = None, label: str = "") -> TriMesh:
    """Load an OFF / OBJ / ASCII-PLY file, fan-triangulating polygon faces."""
    path = os.fspath(path)
    if fmt is None:
        fmt = os.path.splitext(path)[1].lstrip(".").lower()
    fmt = fmt.lower()
    if fmt not in _LOADERS:
        raise MeshError(f"unsupported mesh format {fmt!r} for {path}")
    vertices, faces = _LOADERS[fmt](path)
    if not vertices:
        raise MeshError(f"{path}: mesh has no vertices")
    try:
        return TriMesh(np.array(vertices), np.array(faces, dtype=np.int64).reshape(-1, 3),
                       label=label or os.path.basename(path))
    except MeshError as exc:
        raise MeshError(f"{path}: {exc}") from None


def save_off(mesh: TriMesh, path: str | os.PathLike) -> None:
    """Write ASCII OFF with full float precision (round-trips bit-exactly)."""
    with open(os.fspath(path), "w") as fh:
        fh.write("OFF\n")
        fh.write(f"{mesh.n_vertices} {mesh.n_faces} 0\n")
        for v in mesh.vertices:
            fh.write(f"{float(v[0])!r} {float(v[1])!r} {float(v[2])!r}\n")
        for f in mesh.faces:
            fh.write(f"3 {f[0]} {f[1]} {f[2]}\n")
