"""Indexed triangle meshes in the closed unit ball.

A :class:`TriMesh` is an immutable value: vertex positions, consistently wound
triangles and a per-vertex flag marking vertices that sit on the unit sphere.
Meshes built by the equivariant constructors additionally carry the symmetry
group and, for every group element, the vertex permutation it induces.
"""

from __future__ import annotations

import io
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .config import DEFAULT_TOLERANCES

log = logging.getLogger(__name__)

BALL_VOLUME = 4.0 * np.pi / 3.0


class MeshError(ValueError):
    """Structural problem with a mesh (invalid indices, non-manifold edges, ...)."""


@dataclass(frozen=True, eq=False)
class TriMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    boundary_flags: np.ndarray
    group: Any = None
    perm: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        verts = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        tris = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        flags = np.asarray(self.boundary_flags, dtype=bool).reshape(-1)
        if flags.shape[0] != verts.shape[0]:
            raise MeshError("boundary_flags must have one entry per vertex")
        if len(tris):
            if tris.min() < 0 or tris.max() >= len(verts):
                raise MeshError("triangle references a vertex index out of range")
            bad = (tris[:, 0] == tris[:, 1]) | (tris[:, 1] == tris[:, 2]) | (tris[:, 0] == tris[:, 2])
            if bad.any():
                raise MeshError(f"triangle {int(np.flatnonzero(bad)[0])} repeats a vertex")
        for arr in (verts, tris, flags):
            arr.setflags(write=False)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "triangles", tris)
        object.__setattr__(self, "boundary_flags", flags)
        if self.perm is not None:
            perm = np.asarray(self.perm, dtype=np.int64)
            perm.setflags(write=False)
            object.__setattr__(self, "perm", perm)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def with_vertices(self, vertices: np.ndarray) -> "TriMesh":
        """Same connectivity, flags and symmetry data with new positions."""
        return TriMesh(vertices, self.triangles, self.boundary_flags, self.group, self.perm, dict(self.meta))

    def transformed(self, matrix: np.ndarray) -> "TriMesh":
        matrix = np.asarray(matrix, dtype=float)
        tris = self.triangles if np.linalg.det(matrix) > 0 else self.triangles[:, ::-1]
        return TriMesh(self.vertices @ matrix.T, tris, self.boundary_flags, meta=dict(self.meta))

    def without_symmetry(self) -> "TriMesh":
        return TriMesh(self.vertices, self.triangles, self.boundary_flags, meta=dict(self.meta))


@dataclass(frozen=True)
class TopologySummary:
    euler_characteristic: int
    genus: int
    boundary_components: int
    orientable: bool
    connected_components: int

    def as_dict(self) -> dict:
        return {
            "euler_characteristic": self.euler_characteristic,
            "genus": self.genus,
            "boundary_components": self.boundary_components,
            "orientable": self.orientable,
            "connected_components": self.connected_components,
        }


def empty_mesh() -> TriMesh:
    return TriMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64), np.zeros(0, dtype=bool))


# ----------------------------------------------------------------------------
# combinatorics


def directed_edges(tris: np.ndarray) -> np.ndarray:
    return np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])


def edge_table(mesh: TriMesh) -> tuple[np.ndarray, np.ndarray]:
    """Unique undirected edges (sorted pairs) and how many triangles use each."""
    if mesh.n_triangles == 0:
        return np.zeros((0, 2), dtype=np.int64), np.zeros(0, dtype=np.int64)
    und = np.sort(directed_edges(mesh.triangles), axis=1)
    edges, counts = np.unique(und, axis=0, return_counts=True)
    return edges, counts


def boundary_directed_edges(mesh: TriMesh) -> np.ndarray:
    """Boundary edges oriented as they appear in their triangle."""
    if mesh.n_triangles == 0:
        return np.zeros((0, 2), dtype=np.int64)
    dirs = directed_edges(mesh.triangles)
    und = np.sort(dirs, axis=1)
    _, inverse, counts = np.unique(und, axis=0, return_inverse=True, return_counts=True)
    return dirs[counts[inverse.ravel()] == 1]


def boundary_loops(mesh: TriMesh) -> list[np.ndarray]:
    """Boundary vertex cycles, each ordered along the triangle orientation."""
    edges = boundary_directed_edges(mesh)
    successors: dict[int, list[int]] = {}
    for a, b in edges:
        successors.setdefault(int(a), []).append(int(b))
    loops: list[np.ndarray] = []
    while successors:
        start = min(successors)
        loop = [start]
        cur = start
        while True:
            nxt_list = successors[cur]
            nxt = nxt_list.pop()
            if not nxt_list:
                del successors[cur]
            if nxt == start:
                break
            loop.append(nxt)
            cur = nxt
            if cur not in successors:
                raise MeshError(f"boundary walk from vertex {start} does not close")
        loops.append(np.array(loop, dtype=np.int64))
    return loops


def _orientable(mesh: TriMesh) -> bool:
    tris = mesh.triangles
    dirs = directed_edges(tris)
    face_of = np.tile(np.arange(len(tris)), 3)
    und = np.sort(dirs, axis=1)
    same_dir = dirs[:, 0] < dirs[:, 1]
    order = np.lexsort((und[:, 1], und[:, 0]))
    und, face_of, same_dir = und[order], face_of[order], same_dir[order]
    pair = np.flatnonzero(np.all(und[1:] == und[:-1], axis=1))
    if len(pair) == 0:
        return True
    f1, f2 = face_of[pair], face_of[pair + 1]
    # consistent orientation means the shared edge is traversed in opposite directions
    parity = (same_dir[pair] == same_dir[pair + 1]).astype(np.int8)
    n = len(tris)
    adjacency: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for a, b, p in zip(f1.tolist(), f2.tolist(), parity.tolist()):
        adjacency[a].append((b, p))
        adjacency[b].append((a, p))
    flip = np.full(n, -1, dtype=np.int8)
    for root in range(n):
        if flip[root] >= 0:
            continue
        flip[root] = 0
        stack = [root]
        while stack:
            f = stack.pop()
            for g, p in adjacency[f]:
                want = flip[f] ^ p
                if flip[g] < 0:
                    flip[g] = want
                    stack.append(g)
                elif flip[g] != want:
                    return False
    return True


def topology(mesh: TriMesh) -> TopologySummary:
    """Euler characteristic, genus, boundary count, orientability and components."""
    if mesh.n_triangles == 0:
        return TopologySummary(0, 0, 0, True, 0)
    edges, counts = edge_table(mesh)
    if (counts > 2).any():
        bad = edges[np.flatnonzero(counts > 2)[0]]
        raise MeshError(f"non-manifold edge ({int(bad[0])}, {int(bad[1])}) has {int(counts[counts > 2][0])} triangles")
    used = np.unique(mesh.triangles)
    chi = len(used) - len(edges) + mesh.n_triangles
    b = len(boundary_loops(mesh))
    n = mesh.n_vertices
    graph = coo_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    comps = len(np.unique(labels[used]))
    orientable = _orientable(mesh)
    if orientable:
        genus = max((2 * comps - chi - b) // 2, 0)
    else:
        genus = max(2 * comps - chi - b, 0)
    return TopologySummary(int(chi), int(genus), int(b), bool(orientable), int(comps))


# ----------------------------------------------------------------------------
# measure


def triangle_normals(mesh: TriMesh) -> tuple[np.ndarray, np.ndarray]:
    """Unit normals and areas of all triangles."""
    v, t = mesh.vertices, mesh.triangles
    n = np.cross(v[t[:, 1]] - v[t[:, 0]], v[t[:, 2]] - v[t[:, 0]])
    norm = np.linalg.norm(n, axis=1)
    unit = n / np.where(norm > 0.0, norm, 1.0)[:, None]
    return unit, 0.5 * norm


def vertex_normals(mesh: TriMesh) -> np.ndarray:
    """Area-weighted unit vertex normals."""
    v, t = mesh.vertices, mesh.triangles
    n = np.cross(v[t[:, 1]] - v[t[:, 0]], v[t[:, 2]] - v[t[:, 0]])
    acc = np.zeros_like(v)
    for k in range(3):
        np.add.at(acc, t[:, k], n)
    norm = np.linalg.norm(acc, axis=1)
    return acc / np.where(norm > 0.0, norm, 1.0)[:, None]


def vertex_adjacency(mesh: TriMesh):
    """Symmetric 0/1 vertex adjacency as a CSR matrix."""
    t = mesh.triangles
    rows = np.concatenate([t[:, 0], t[:, 1], t[:, 2], t[:, 1], t[:, 2], t[:, 0]])
    cols = np.concatenate([t[:, 1], t[:, 2], t[:, 0], t[:, 0], t[:, 1], t[:, 2]])
    adj = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(mesh.n_vertices,) * 2).tocsr()
    adj.data[:] = 1.0
    return adj


@dataclass(frozen=True)
class QuadricFit:
    normals: np.ndarray
    shape_norm_sq: np.ndarray  # |A|^2 at each vertex
    mean_curvature: np.ndarray  # trace of the shape operator, sign relative to ``normals``


def quadric_fit(mesh: TriMesh, rings: int = 3, degree: int = 3) -> QuadricFit:
    """Least-squares osculating height function over the ``rings``-ring of every vertex.

    ``degree`` 2 fits a quadric, 3 a cubic (which needs ``rings`` >= 3 to be
    well posed on the boundary). Even the quadric gives second-order normals
    on the boundary, where averaged face normals are only first-order.
    """
    approx = vertex_normals(mesh)
    adj = vertex_adjacency(mesh)
    reach = adj.copy()
    for _ in range(rings - 1):
        reach = reach + reach @ adj
    reach = reach.tocsr()
    v = mesh.vertices
    normals = approx.copy()
    shape_sq = np.zeros(len(v))
    mean = np.zeros(len(v))
    for i in range(len(v)):
        nbrs = reach.indices[reach.indptr[i] : reach.indptr[i + 1]]
        nbrs = nbrs[nbrs != i]
        if len(nbrs) < (5 if degree == 2 else 9):
            continue
        n0 = approx[i]
        helper = np.eye(3)[np.argmin(np.abs(n0))]
        e1 = np.cross(n0, helper)
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(n0, e1)
        d = v[nbrs] - v[i]
        x, y, h = d @ e1, d @ e2, d @ n0
        cols = [x * x, x * y, y * y, x, y]
        if degree == 3:
            cols += [x**3, x * x * y, x * y * y, y**3]
        coef, *_ = np.linalg.lstsq(np.column_stack(cols), h, rcond=None)
        a, b, c, hx, hy = coef[:5]
        grad = np.array([hx, hy])
        first = np.eye(2) + np.outer(grad, grad)
        scale = np.sqrt(1.0 + grad @ grad)
        second = np.array([[2 * a, b], [b, 2 * c]]) / scale
        shape = np.linalg.solve(first, second)
        nrm = (n0 - hx * e1 - hy * e2) / scale
        normals[i] = nrm
        shape_sq[i] = float(np.sum(shape * shape.T))
        mean[i] = float(np.trace(shape))
    return QuadricFit(normals, shape_sq, mean)


def area(mesh: TriMesh, tol=DEFAULT_TOLERANCES) -> float:
    """Total area; warns about triangles far below the mean triangle area."""
    if mesh.n_triangles == 0:
        return 0.0
    _, areas = triangle_normals(mesh)
    mean = areas.mean()
    degenerate = int(np.count_nonzero(areas < tol.degenerate_area * mean))
    if degenerate:
        log.debug("%d degenerate triangle(s) below %.1e of the mean area", degenerate, tol.degenerate_area)
    return float(np.sum(areas))


def _spherical_left_area(points: np.ndarray) -> float:
    """Area to the left of a closed geodesic polygon on the unit sphere."""
    p = points
    prev, nxt = np.roll(p, 1, axis=0), np.roll(p, -1, axis=0)
    incoming = -(prev - np.einsum("ij,ij->i", prev, p)[:, None] * p)
    outgoing = nxt - np.einsum("ij,ij->i", nxt, p)[:, None] * p
    turn = np.arctan2(np.einsum("ij,ij->i", p, np.cross(incoming, outgoing)), np.einsum("ij,ij->i", incoming, outgoing))
    return float(2.0 * np.pi - turn.sum())


def _fan_solid_angle(apex: np.ndarray, points: np.ndarray) -> float:
    a, b = points, np.roll(points, -1, axis=0)
    det = np.einsum("j,ij->i", apex, np.cross(a, b))
    den = 1.0 + a @ apex + b @ apex + np.einsum("ij,ij->i", a, b)
    return float(np.sum(2.0 * np.arctan2(det, den)))


def _left_indicator(point: np.ndarray, loop: np.ndarray, left_area: float) -> int:
    fan = _fan_solid_angle(-point, loop)
    return int(round((left_area - fan) / (4.0 * np.pi)))


def _ray_crossings(mesh: TriMesh, origin: np.ndarray, direction: np.ndarray, length: float) -> int:
    v, t = mesh.vertices, mesh.triangles
    a, b, c = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
    e1, e2 = b - a, c - a
    pvec = np.cross(direction, e2)
    det = np.einsum("ij,ij->i", e1, pvec)
    ok = np.abs(det) > 1e-15
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    tvec = origin - a
    u = np.einsum("ij,ij->i", tvec, pvec) * inv
    qvec = np.cross(tvec, e1)
    w = (qvec @ direction) * inv
    dist = np.einsum("ij,ij->i", e2, qvec) * inv
    hit = ok & (u >= 0) & (w >= 0) & (u + w <= 1) & (dist > 0) & (dist < length)
    return int(np.count_nonzero(hit))


def side_volumes(mesh: TriMesh, tol: float = 1e-6) -> tuple[float, float, list[tuple[np.ndarray, float]], float]:
    """Volumes on the normal (+) and opposite (-) side of a surface spanning the ball.

    Also returns the oriented boundary loops with their left areas and the
    offset constant used to label spherical regions.
    """
    if mesh.n_triangles == 0:
        raise MeshError("empty mesh does not separate the ball")
    loops = boundary_loops(mesh)
    if not loops:
        raise MeshError("mesh has no boundary on the sphere")
    v = mesh.vertices
    b_idx = np.concatenate(loops)
    gap = float(np.max(np.abs(np.linalg.norm(v[b_idx], axis=1) - 1.0)))
    if gap > tol:
        raise MeshError(f"boundary does not close against the sphere: max gap {gap:.3e}")
    # orient every loop so that the normal side lies to its left
    tri_of_edge: dict[tuple[int, int], int] = {}
    for f, (a, b, c) in enumerate(mesh.triangles.tolist()):
        tri_of_edge[(a, b)] = f
        tri_of_edge[(b, c)] = f
        tri_of_edge[(c, a)] = f
    normals, _ = triangle_normals(mesh)
    oriented: list[tuple[np.ndarray, float]] = []
    for loop in loops:
        nxt = np.roll(loop, -1)
        score = 0.0
        for a, b in zip(loop.tolist(), nxt.tolist()):
            mid = v[a] + v[b]
            score += float(normals[tri_of_edge[(a, b)]] @ np.cross(mid, v[b] - v[a]))
        pts = v[loop] / np.linalg.norm(v[loop], axis=1)[:, None]
        if score < 0:
            pts = pts[::-1]
        oriented.append((pts, _spherical_left_area(pts)))
    # a point just left of the first loop lies in a region on the normal side
    pts0 = oriented[0][0]
    a, b = pts0[0], pts0[1]
    mid = (a + b) / np.linalg.norm(a + b)
    left = np.cross(mid, b - a)
    probe = mid + 0.1 * left
    probe /= np.linalg.norm(probe)
    sigma = sum(2 * _left_indicator(probe, pts, la) - 1 for pts, la in oriented)
    offset = sigma - 1
    plus_area = sum(la - 2.0 * np.pi for _, la in oriented) + 2.0 * np.pi * (1 - offset)
    t = mesh.triangles
    det = np.einsum("ij,ij->i", v[t[:, 0]], np.cross(v[t[:, 1]], v[t[:, 2]]))
    plus = -det.sum() / 6.0 + plus_area / 3.0
    return float(plus), float(BALL_VOLUME - plus), oriented, float(offset)


def sphere_point_side(point: np.ndarray, oriented: list[tuple[np.ndarray, float]], offset: float) -> int:
    p = np.asarray(point, dtype=float)
    p = p / np.linalg.norm(p)
    sigma = sum(2 * _left_indicator(p, pts, la) - 1 for pts, la in oriented)
    return int(round(sigma - offset))


def point_side(mesh: TriMesh, point: np.ndarray, oriented=None, offset=None) -> int:
    """+1 if ``point`` lies on the normal side of the surface, -1 otherwise."""
    if oriented is None:
        _, _, oriented, offset = side_volumes(mesh)
    p = np.asarray(point, dtype=float)
    r = np.linalg.norm(p)
    if r > 1.0 - 1e-9:
        return sphere_point_side(p, oriented, offset)
    direction = p / r if r > 1e-12 else np.array([0.2672612419124244, 0.5345224838248488, 0.8017837257372732])
    direction = direction + np.array([1e-7, -2e-7, 3e-7])
    direction /= np.linalg.norm(direction)
    # distance from p to the sphere along the ray
    pd = p @ direction
    length = -pd + np.sqrt(pd * pd - (p @ p - 1.0))
    exit_point = p + length * direction
    crossings = _ray_crossings(mesh, p, direction, length)
    return sphere_point_side(exit_point, oriented, offset) * (-1) ** crossings


def enclosed_volume(mesh: TriMesh, side_selector: Iterable[float]) -> float:
    """Volume of the component of the ball minus the surface containing the reference point."""
    plus, minus, oriented, offset = side_volumes(mesh)
    side = point_side(mesh, np.asarray(side_selector, dtype=float), oriented, offset)
    return plus if side > 0 else minus


# ----------------------------------------------------------------------------
# refinement and validation


def subdivide(mesh: TriMesh) -> TriMesh:
    """One step of midpoint subdivision; new boundary midpoints are pushed to the sphere."""
    v, t = mesh.vertices, mesh.triangles
    edges, _ = edge_table(mesh)
    n = len(v)
    key = {(int(a), int(b)): n + i for i, (a, b) in enumerate(edges)}
    mids = 0.5 * (v[edges[:, 0]] + v[edges[:, 1]])
    bedges = np.sort(boundary_directed_edges(mesh), axis=1)
    bset = {(int(a), int(b)) for a, b in bedges}
    on_sphere = np.array([(int(a), int(b)) in bset for a, b in edges], dtype=bool)
    mids[on_sphere] /= np.linalg.norm(mids[on_sphere], axis=1)[:, None]

    def mid(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        return np.array([key[(int(x), int(y))] for x, y in zip(lo, hi)], dtype=np.int64)

    a, b, c = t[:, 0], t[:, 1], t[:, 2]
    ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
    new_t = np.concatenate([
        np.stack([a, ab, ca], axis=1),
        np.stack([ab, b, bc], axis=1),
        np.stack([ca, bc, c], axis=1),
        np.stack([ab, bc, ca], axis=1),
    ])
    flags = np.concatenate([mesh.boundary_flags, on_sphere])
    return TriMesh(np.vstack([v, mids]), new_t, flags, meta=dict(mesh.meta))


def validate(mesh: TriMesh, tol: float = DEFAULT_TOLERANCES.geometric) -> None:
    """Raise :class:`MeshError` if any TriMesh invariant fails."""
    topology(mesh)
    edges, counts = edge_table(mesh)
    radii = np.linalg.norm(mesh.vertices, axis=1)
    if mesh.n_vertices and radii.max() > 1.0 + tol:
        raise MeshError(f"vertex outside the ball: |x| = {radii.max():.12f}")
    flagged = mesh.boundary_flags
    if flagged.any():
        gap = np.abs(radii[flagged] - 1.0).max()
        if gap > tol:
            raise MeshError(f"boundary-flagged vertex off the sphere by {gap:.3e}")
    if mesh.n_triangles and not _orientable(mesh):
        raise MeshError("mesh is not consistently orientable")
    dirs = directed_edges(mesh.triangles)
    if len(np.unique(dirs, axis=0)) != len(dirs):
        raise MeshError("two triangles traverse an edge in the same direction")


def merge_vertices(verts: np.ndarray, tris: np.ndarray, flags: np.ndarray, decimals: int = 12) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Identify vertices whose coordinates agree after rounding."""
    keys = np.round(verts + 0.0, decimals) + 0.0
    _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.ravel()
    order = np.argsort(first)
    remap = np.empty_like(order)
    remap[order] = np.arange(len(order))
    new_index = remap[inverse]
    new_verts = verts[first[order]]
    new_flags = np.zeros(len(new_verts), dtype=bool)
    np.logical_or.at(new_flags, new_index, flags)
    return new_verts, new_index[tris], new_flags


# ----------------------------------------------------------------------------
# file formats


def export_mesh(mesh: TriMesh, fmt: str = "obj") -> bytes:
    """Serialise to OBJ (text) or binary little-endian PLY."""
    fmt = fmt.lower()
    if fmt == "obj":
        out = io.StringIO()
        out.write("# fbms mesh\n")
        flagged = np.flatnonzero(mesh.boundary_flags)
        out.write("# on_sphere " + " ".join(str(int(i)) for i in flagged) + "\n")
        for x, y, z in mesh.vertices.tolist():
            out.write(f"v {x!r} {y!r} {z!r}\n")
        for a, b, c in (mesh.triangles + 1).tolist():
            out.write(f"f {a} {b} {c}\n")
        return out.getvalue().encode("utf-8")
    if fmt == "ply":
        header = (
            "ply\nformat binary_little_endian 1.0\n"
            f"element vertex {mesh.n_vertices}\n"
            "property double x\nproperty double y\nproperty double z\nproperty uchar on_sphere\n"
            f"element face {mesh.n_triangles}\n"
            "property list uchar int vertex_indices\nend_header\n"
        )
        vdtype = np.dtype([("x", "<f8"), ("y", "<f8"), ("z", "<f8"), ("on_sphere", "u1")])
        vrec = np.empty(mesh.n_vertices, dtype=vdtype)
        vrec["x"], vrec["y"], vrec["z"] = mesh.vertices.T
        vrec["on_sphere"] = mesh.boundary_flags.astype(np.uint8)
        fdtype = np.dtype([("n", "u1"), ("idx", "<i4", (3,))])
        frec = np.empty(mesh.n_triangles, dtype=fdtype)
        frec["n"] = 3
        frec["idx"] = mesh.triangles
        return header.encode("ascii") + vrec.tobytes() + frec.tobytes()
    raise ValueError(f"unsupported mesh format {fmt!r}")


def import_mesh(data: bytes, fmt: str = "obj", rederive_flags: bool = False, tol: float = 1e-9) -> TriMesh:
    """Parse bytes written by :func:`export_mesh`.

    With ``rederive_flags`` the boundary flags come from the |x| = 1 test
    instead of the stored property.
    """
    fmt = fmt.lower()
    if fmt == "obj":
        verts, tris, flagged = [], [], []
        for line in data.decode("utf-8").splitlines():
            if line.startswith("v "):
                verts.append([float(x) for x in line.split()[1:4]])
            elif line.startswith("f "):
                tris.append([int(tok.split("/")[0]) - 1 for tok in line.split()[1:4]])
            elif line.startswith("# on_sphere"):
                flagged = [int(x) for x in line.split()[2:]]
        v = np.array(verts, dtype=float).reshape(-1, 3)
        flags = np.zeros(len(v), dtype=bool)
        flags[flagged] = True
        t = np.array(tris, dtype=np.int64).reshape(-1, 3)
    elif fmt == "ply":
        end = data.index(b"end_header\n") + len(b"end_header\n")
        header = data[:end].decode("ascii").splitlines()
        nv = nf = 0
        for line in header:
            if line.startswith("element vertex"):
                nv = int(line.split()[2])
            elif line.startswith("element face"):
                nf = int(line.split()[2])
        vdtype = np.dtype([("x", "<f8"), ("y", "<f8"), ("z", "<f8"), ("on_sphere", "u1")])
        fdtype = np.dtype([("n", "u1"), ("idx", "<i4", (3,))])
        vrec = np.frombuffer(data, dtype=vdtype, count=nv, offset=end)
        frec = np.frombuffer(data, dtype=fdtype, count=nf, offset=end + nv * vdtype.itemsize)
        v = np.stack([vrec["x"], vrec["y"], vrec["z"]], axis=1)
        flags = vrec["on_sphere"].astype(bool)
        t = frec["idx"].astype(np.int64)
    else:
        raise ValueError(f"unsupported mesh format {fmt!r}")
    if rederive_flags:
        flags = np.abs(np.linalg.norm(v, axis=1) - 1.0) < tol
    return TriMesh(v, t, flags)


def write_atomic(path, payload: bytes) -> None:
    """Write through a temporary file and rename, so readers never see partial output."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp{os.getpid()}")
    tmp.write_bytes(payload)
    os.replace(tmp, path)

