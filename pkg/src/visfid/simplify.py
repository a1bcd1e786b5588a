"""Stimulus-family construction: QEM and vertex-clustering simplification."""

from __future__ import annotations

import heapq
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .mesh import TriMesh

BOUNDARY_PENALTY = 1000.0  # x mean face area, weight of boundary constraint quadrics


class Algorithm(str, Enum):
    QEM = "qem"
    VCLUST = "vclust"


@dataclass(frozen=True)
class SimplifySpec:
    algorithm: Algorithm = Algorithm.QEM
    target_faces: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.target_faces < 1:
            raise ValueError("target_faces must be >= 1")


class TargetUnreachableWarning(UserWarning):
    pass


def _plane_quadric(a, b, c):
    """Fundamental error quadric of the supporting plane, area-weighted."""
    n = np.cross(b - a, c - a)
    norm = np.linalg.norm(n)
    if norm == 0.0:
        return np.zeros((4, 4))
    area = 0.5 * norm
    n = n / norm
    p = np.append(n, -n.dot(a))
    return area * np.outer(p, p)


def _edge_constraint_quadric(a, b, face_normal, weight):
    """Plane through edge (a, b) perpendicular to the adjacent face."""
    e = b - a
    n = np.cross(e, face_normal)
    norm = np.linalg.norm(n)
    if norm == 0.0:
        return np.zeros((4, 4))
    n = n / norm
    p = np.append(n, -n.dot(a))
    return weight * np.outer(p, p)


def _quadric_cost(q, pos):
    v = np.append(pos, 1.0)
    return float(v @ q @ v)


def _optimal_position(q, p1, p2):
    """Minimizer of the quadric, falling back to best of mid/endpoints."""
    A = q[:3, :3]
    b = -q[:3, 3]
    scale = np.abs(A).max()
    if scale > 0:
        try:
            pos = np.linalg.solve(A, b)
            # reject near-singular solves that shoot far away
            if np.linalg.cond(A) < 1e12 and np.isfinite(pos).all():
                return pos
        except np.linalg.LinAlgError:
            pass
    candidates = [0.5 * (p1 + p2), p1, p2]
    costs = [_quadric_cost(q, c) for c in candidates]
    return candidates[int(np.argmin(costs))]


class _QemState:
    """Mutable working state for one simplification run."""

    def __init__(self, mesh: TriMesh):
        self.verts = mesh.vertices.copy()
        self.faces = mesh.faces.copy()
        self.face_alive = np.ones(len(self.faces), dtype=bool)
        areas = mesh.face_areas()
        self.face_alive &= ~(
            (self.faces[:, 0] == self.faces[:, 1])
            | (self.faces[:, 1] == self.faces[:, 2])
            | (self.faces[:, 0] == self.faces[:, 2])
        )
        self.vertex_faces = [set() for _ in range(len(self.verts))]
        for fi, f in enumerate(self.faces):
            if self.face_alive[fi]:
                for vi in f:
                    self.vertex_faces[vi].add(fi)
        self.live_faces = int(self.face_alive.sum())
        self.quadrics = np.zeros((len(self.verts), 4, 4))
        a, b, c = mesh.triangle_corners()
        for fi in np.flatnonzero(self.face_alive):
            q = _plane_quadric(a[fi], b[fi], c[fi])
            for vi in self.faces[fi]:
                self.quadrics[vi] += q
        self._add_boundary_quadrics(areas[self.face_alive])
        self.version = np.zeros(len(self.verts), dtype=np.int64)
        self._entry_tick = 0

    def _add_boundary_quadrics(self, live_areas):
        edge_faces: dict[tuple[int, int], list[int]] = {}
        for fi in np.flatnonzero(self.face_alive):
            f = self.faces[fi]
            for i, j in ((f[0], f[1]), (f[1], f[2]), (f[2], f[0])):
                key = (min(i, j), max(i, j))
                edge_faces.setdefault(key, []).append(fi)
        weight = BOUNDARY_PENALTY * float(live_areas.mean()) if len(live_areas) else 0.0
        if weight == 0.0:
            return
        for (i, j), fids in edge_faces.items():
            if len(fids) != 1:
                continue
            f = self.faces[fids[0]]
            n = np.cross(self.verts[f[1]] - self.verts[f[0]],
                         self.verts[f[2]] - self.verts[f[0]])
            norm = np.linalg.norm(n)
            if norm == 0.0:
                continue
            q = _edge_constraint_quadric(self.verts[i], self.verts[j], n / norm, weight)
            self.quadrics[i] += q
            self.quadrics[j] += q

    def edges(self):
        seen = set()
        for fi in np.flatnonzero(self.face_alive):
            f = self.faces[fi]
            for i, j in ((f[0], f[1]), (f[1], f[2]), (f[2], f[0])):
                key = (min(i, j), max(i, j))
                if key not in seen:
                    seen.add(key)
                    yield key

    def neighbors(self, vi):
        out = set()
        for fi in self.vertex_faces[vi]:
            out.update(int(x) for x in self.faces[fi])
        out.discard(vi)
        return out

    _entry_tick = 0  # deterministic tiebreak; keeps numpy payloads uncompared

    def edge_entry(self, i, j):
        q = self.quadrics[i] + self.quadrics[j]
        pos = _optimal_position(q, self.verts[i], self.verts[j])
        cost = max(_quadric_cost(q, pos), 0.0)
        self._entry_tick += 1
        return (cost, min(i, j), max(i, j), self._entry_tick,
                int(self.version[i]), int(self.version[j]), pos)

    def _face_normal(self, f, verts):
        return np.cross(verts[f[1]] - verts[f[0]], verts[f[2]] - verts[f[0]])

    def collapse_would_flip(self, i, j, pos):
        """True if moving i/j to pos reverses a surviving incident face."""
        for fi in self.vertex_faces[i] | self.vertex_faces[j]:
            f = self.faces[fi]
            if i in f and j in f:
                continue  # face vanishes in the collapse
            old_n = self._face_normal(f, self.verts)
            moved = self.verts[list(f)].copy()
            for k, vi in enumerate(f):
                if vi == i or vi == j:
                    moved[k] = pos
            new_n = np.cross(moved[1] - moved[0], moved[2] - moved[0])
            denom = np.linalg.norm(old_n) * np.linalg.norm(new_n)
            if denom > 0 and float(old_n.dot(new_n)) / denom < -1e-9:
                return True
        return False

    def collapse(self, i, j, pos):
        """Collapse j into i placed at pos; returns newly affected vertices."""
        self.verts[i] = pos
        self.quadrics[i] = self.quadrics[i] + self.quadrics[j]
        dead = [fi for fi in self.vertex_faces[i] | self.vertex_faces[j]
                if i in self.faces[fi] and j in self.faces[fi]]
        for fi in sorted(self.vertex_faces[j]):
            f = self.faces[fi]
            self.faces[fi] = np.where(f == j, i, f)
        merged = self.vertex_faces[i] | self.vertex_faces[j]
        for fi in dead:
            if self.face_alive[fi]:
                self.face_alive[fi] = False
                self.live_faces -= 1
            merged.discard(fi)
            for vi in set(int(x) for x in self.faces[fi]):
                self.vertex_faces[vi].discard(fi)
        self.vertex_faces[i] = {fi for fi in merged if self.face_alive[fi]}
        self.vertex_faces[j] = set()
        self.version[i] += 1
        self.version[j] += 1
        return self.neighbors(i) | {i}

    def to_mesh(self, label):
        live = np.flatnonzero(self.face_alive)
        faces = self.faces[live]
        used = np.unique(faces)
        remap = np.full(len(self.verts), -1, dtype=np.int64)
        remap[used] = np.arange(len(used))
        return TriMesh(self.verts[used], remap[faces], label=label)


def qem_simplify(mesh: TriMesh, spec: SimplifySpec) -> TriMesh:
    """Iterative edge collapse minimizing accumulated per-vertex quadric error.

    Collapse candidates are mesh edges only; ties break on
    (cost, lower vertex index, higher vertex index).  If the mesh is
    exhausted before the target a :class:`TargetUnreachableWarning` is
    emitted and the best achieved result returned.
    """
    target = spec.target_faces
    if target > mesh.n_faces:
        raise ValueError(f"target_faces {target} exceeds mesh faces {mesh.n_faces}")
    if target == mesh.n_faces:
        return TriMesh(mesh.vertices.copy(), mesh.faces.copy(), label=mesh.label)
    state = _QemState(mesh)
    heap = [state.edge_entry(i, j) for i, j in state.edges()]
    heapq.heapify(heap)
    while state.live_faces > target and heap:
        cost, i, j, _tick, ver_i, ver_j, pos = heapq.heappop(heap)
        if ver_i != state.version[i] or ver_j != state.version[j]:
            continue  # stale entry
        if not (state.vertex_faces[i] and state.vertex_faces[j]):
            continue
        if j not in state.neighbors(i):
            continue
        if state.collapse_would_flip(i, j, pos):
            continue
        touched = state.collapse(i, j, pos)
        for vi in sorted(touched):
            for vj in sorted(state.neighbors(vi)):
                if vi < vj:
                    heapq.heappush(heap, state.edge_entry(vi, vj))
    if state.live_faces > target:
        warnings.warn(
            f"QEM target {target} unreachable; stopped at {state.live_faces} faces",
            TargetUnreachableWarning,
        )
    return state.to_mesh(mesh.label)


def vertex_cluster(mesh: TriMesh, cells_per_axis: int) -> TriMesh:
    """Merge vertices by uniform grid cell; representative = member centroid.

    Faces with fewer than 3 distinct representatives are dropped and
    duplicate faces (same vertex set) collapse to one.
    """
    if cells_per_axis < 1:
        raise ValueError("cells_per_axis must be >= 1")
    if mesh.n_vertices == 0:
        return mesh
    lo = mesh.vertices.min(axis=0)
    hi = mesh.vertices.max(axis=0)
    extent = np.where(hi - lo > 0, hi - lo, 1.0)
    cell = np.floor((mesh.vertices - lo) / extent * cells_per_axis).astype(np.int64)
    np.clip(cell, 0, cells_per_axis - 1, out=cell)
    keys = (cell[:, 0] * cells_per_axis + cell[:, 1]) * cells_per_axis + cell[:, 2]
    uniq, inverse = np.unique(keys, return_inverse=True)
    reps = np.zeros((len(uniq), 3))
    counts = np.bincount(inverse, minlength=len(uniq)).astype(np.float64)
    for axis in range(3):
        reps[:, axis] = np.bincount(inverse, weights=mesh.vertices[:, axis],
                                    minlength=len(uniq)) / counts
    mapped = inverse[mesh.faces]
    keep = (
        (mapped[:, 0] != mapped[:, 1])
        & (mapped[:, 1] != mapped[:, 2])
        & (mapped[:, 0] != mapped[:, 2])
    )
    mapped = mapped[keep]
    if len(mapped):
        canon = np.sort(mapped, axis=1)
        _, first = np.unique(canon, axis=0, return_index=True)
        mapped = mapped[np.sort(first)]
    used = np.unique(mapped) if len(mapped) else np.arange(len(reps))
    remap = np.full(len(reps), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    faces = remap[mapped] if len(mapped) else np.empty((0, 3), dtype=np.int64)
    return TriMesh(reps[used], faces, label=mesh.label)


@dataclass(frozen=True)
class VclustResult:
    mesh: TriMesh
    cells_per_axis: int
    achieved_faces: int
    within_tolerance: bool


def vclust_to_target(mesh: TriMesh, target_faces: int,
                     max_cells: int = 1024) -> VclustResult:
    """Search cells_per_axis for the face count closest to the target.

    Accepts results up to 1.02x the target; warns when nothing lands within
    +-20% and returns the closest result found.
    """
    if target_faces < 1:
        raise ValueError("target_faces must be >= 1")
    if target_faces >= mesh.n_faces:
        raise ValueError("vclust target must be below the input face count")
    ceiling = int(target_faces * 1.02)
    cache: dict[int, int] = {}

    def faces_at(c):
        if c not in cache:
            cache[c] = vertex_cluster(mesh, c).n_faces
        return cache[c]

    lo, hi = 1, max_cells
    while lo < hi:  # largest grid whose face count stays under the ceiling
        mid = (lo + hi + 1) // 2
        if faces_at(mid) <= ceiling:
            lo = mid
        else:
            hi = mid - 1
    # monotonicity is only approximate; scan a small neighborhood for the
    # admissible count closest to the target
    for c in range(max(1, lo - 3), min(max_cells, lo + 4) + 1):
        faces_at(c)
    admissible = {c: n for c, n in cache.items() if n <= ceiling}
    pool = admissible if admissible else cache
    best_c = min(pool, key=lambda c: (abs(pool[c] - target_faces), c))
    achieved = cache[best_c]
    within = abs(achieved - target_faces) <= 0.2 * target_faces and achieved <= ceiling
    if not within:
        warnings.warn(
            f"vertex clustering reached {achieved} faces for target {target_faces}",
            TargetUnreachableWarning,
        )
    return VclustResult(vertex_cluster(mesh, best_c), best_c, achieved, within)


def standardize(mesh: TriMesh, budget: int) -> TriMesh:
    """QEM-simplify a source model to the common polygon budget."""
    if mesh.n_faces < budget:
        raise ValueError(f"mesh has {mesh.n_faces} faces, below the budget {budget}")
    return qem_simplify(mesh, SimplifySpec(Algorithm.QEM, budget))


@dataclass(frozen=True)
class ModelFamily:
    """One object's standard plus its four simplified versions."""

    name: str
    object_type: str  # "animal" | "artifact"
    s: TriMesh
    q5: TriMesh
    q8: TriMesh
    v5: TriMesh
    v8: TriMesh
    achieved: dict = field(default_factory=dict)

    def versions(self):
        return {"s": self.s, "q5": self.q5, "q8": self.q8, "v5": self.v5, "v8": self.v8}

    def pairs(self):
        return [("s,q5", self.q5), ("s,q8", self.q8),
                ("s,v5", self.v5), ("s,v8", self.v8)]


def build_family(mesh: TriMesh, budget: int, name: str = "",
                 object_type: str = "artifact") -> ModelFamily:
    """Standard at the budget, then 50%/80% reductions by both algorithms."""
    s = standardize(mesh, budget)
    t5 = max(1, round(0.5 * budget))
    t8 = max(1, round(0.2 * budget))
    q5 = qem_simplify(s, SimplifySpec(Algorithm.QEM, t5))
    q8 = qem_simplify(s, SimplifySpec(Algorithm.QEM, t8))
    r5 = vclust_to_target(s, t5)
    r8 = vclust_to_target(s, t8)
    return ModelFamily(
        name=name or mesh.label, object_type=object_type,
        s=s, q5=q5, q8=q8, v5=r5.mesh, v8=r8.mesh,
        achieved={"s": s.n_faces, "q5": q5.n_faces, "q8": q8.n_faces,
                  "v5": r5.achieved_faces, "v8": r8.achieved_faces,
                  "v5_cells": r5.cells_per_axis, "v8_cells": r8.cells_per_axis},
    )
