"""Finite subgroups of O(3): concrete matrices, singular loci and equivariance tools.

Coordinates follow the usual prismatic convention: the principal axis is x3,
the half-turn axes of dihedral-type groups start at the x1-axis and the
horizontal mirror is the plane {x3 = 0}.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.spatial import cKDTree

from .mesh import TriMesh, vertex_normals

CATALOG = (
    "cyclic",
    "dihedral",
    "pyramidal",
    "prismatic",
    "antiprismatic",
    "pro-prismatic",
    "pro-antiprismatic",
    "chiro-tetrahedral",
    "chiro-octahedral",
    "chiro-icosahedral",
    "pyritohedral",
    "tetrahedral",
    "octahedral",
    "icosahedral",
)

AXIAL = CATALOG[:7]
FIXED_POINT_TOL = 1e-9


class SymmetryError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SymmetryGroup:
    elements: np.ndarray  # (order, 3, 3); element 0 is the identity
    catalog_name: str
    order_parameter: int | None = None

    @property
    def order(self) -> int:
        return len(self.elements)

    def index_of(self, matrix: np.ndarray, tol: float = 1e-9) -> int:
        diffs = np.abs(self.elements - np.asarray(matrix)[None]).reshape(self.order, -1).max(axis=1)
        k = int(np.argmin(diffs))
        if diffs[k] > tol:
            raise SymmetryError("matrix is not an element of the group")
        return k

    def to_dict(self) -> dict:
        return {
            "catalog_name": self.catalog_name,
            "n": self.order_parameter,
            "elements": [[float(x) for x in m.ravel()] for m in self.elements],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass(frozen=True)
class SingularStratum:
    dimension: int
    geometry: str  # "point", "line" or "plane"
    vector: tuple[float, float, float] = field(default=(0.0, 0.0, 0.0))  # direction or normal
    isotropy_label: str = ""

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "geometry": self.geometry,
            "vector": list(self.vector),
            "isotropy_label": self.isotropy_label,
        }


# ----------------------------------------------------------------------------
# matrices


def rotation(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    x, y, z = axis
    k = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


def reflection(normal) -> np.ndarray:
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    return np.eye(3) - 2.0 * np.outer(n, n)


def _clean(m: np.ndarray) -> np.ndarray:
    m = np.where(np.abs(m) < 1e-15, 0.0, m)
    rounded = np.round(m)
    return np.where(np.abs(m - rounded) < 1e-14, rounded, m)


def _closure(generators: list[np.ndarray], limit: int = 200) -> np.ndarray:
    elements = [np.eye(3)]
    keys = {tuple(np.round(np.eye(3), 8).ravel())}
    frontier = [np.eye(3)]
    while frontier:
        new = []
        for g in frontier:
            for h in generators:
                p = _clean(h @ g)
                key = tuple(np.round(p, 8).ravel() + 0.0)
                if key not in keys:
                    keys.add(key)
                    elements.append(p)
                    new.append(p)
        frontier = new
        if len(elements) > limit:
            raise SymmetryError("generators do not produce a finite group within the limit")
    return np.array(elements)


_GOLDEN = (1.0 + np.sqrt(5.0)) / 2.0
_CYCLE = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
_FIVEFOLD = 0.5 * np.array([
    [1.0, -_GOLDEN, 1.0 / _GOLDEN],
    [_GOLDEN, 1.0 / _GOLDEN, -1.0],
    [1.0 / _GOLDEN, 1.0, _GOLDEN],
])
_HORIZONTAL_MIRROR = np.diag([1.0, 1.0, -1.0])


def _rotations_T() -> np.ndarray:
    return _closure([np.diag([-1.0, -1.0, 1.0]), np.diag([1.0, -1.0, -1.0]), _CYCLE])


def _rotations_O() -> np.ndarray:
    return _closure([rotation([0, 0, 1], np.pi / 2), _CYCLE])


def _rotations_I() -> np.ndarray:
    return _closure([np.diag([-1.0, -1.0, 1.0]), _CYCLE, _FIVEFOLD])


def _with_inversion(rot: np.ndarray) -> np.ndarray:
    return np.concatenate([rot, -rot])


def _generators(name: str, n: int) -> list[np.ndarray]:
    rz = rotation([0, 0, 1], 2.0 * np.pi / n)
    half_x = rotation([1, 0, 0], np.pi)
    if name == "cyclic":
        return [rz]
    if name == "dihedral":
        return [rz, half_x]
    if name == "pyramidal":
        return [rz, reflection([0, 1, 0])]
    if name == "prismatic":
        return [_HORIZONTAL_MIRROR, half_x, rz]
    if name == "antiprismatic":
        return [rotation([0, 0, 1], np.pi / n) @ _HORIZONTAL_MIRROR, half_x]
    if name == "pro-prismatic":
        return [rz, _HORIZONTAL_MIRROR]
    if name == "pro-antiprismatic":
        return [rotation([0, 0, 1], np.pi / n) @ _HORIZONTAL_MIRROR]
    raise SymmetryError(f"unknown catalog name {name!r}")


@lru_cache(maxsize=None)
def _catalog_elements(name: str, n: int | None) -> np.ndarray:
    if name in AXIAL:
        return _closure(_generators(name, n))
    if name == "chiro-tetrahedral":
        return _rotations_T()
    if name == "chiro-octahedral":
        return _rotations_O()
    if name == "chiro-icosahedral":
        return _rotations_I()
    if name == "pyritohedral":
        return _with_inversion(_rotations_T())
    if name == "tetrahedral":
        t = _rotations_T()
        tkeys = {tuple(np.round(m, 8).ravel()) for m in t}
        extra = [-m for m in _rotations_O() if tuple(np.round(m, 8).ravel()) not in tkeys]
        return np.concatenate([t, np.array(extra)])
    if name == "octahedral":
        return _with_inversion(_rotations_O())
    if name == "icosahedral":
        return _with_inversion(_rotations_I())
    raise SymmetryError(f"unknown catalog name {name!r}")


def group_from_catalog(name: str, n: int | None = None) -> SymmetryGroup:
    """Concrete matrix realisation of a catalog group."""
    name = name.strip().lower()
    if name not in CATALOG:
        raise SymmetryError(f"unknown catalog name {name!r}; expected one of {', '.join(CATALOG)}")
    if name in AXIAL:
        if n is None or int(n) != n or n < 1:
            raise SymmetryError(f"{name} needs a positive integer n, got {n!r}")
        n = int(n)
    else:
        n = None
    elements = _catalog_elements(name, n).copy()
    elements.setflags(write=False)
    return SymmetryGroup(elements, name, n)


def expected_order(name: str, n: int | None) -> int:
    table = {
        "cyclic": lambda n: n,
        "dihedral": lambda n: 2 * n,
        "pyramidal": lambda n: 2 * n,
        "prismatic": lambda n: 4 * n,
        "antiprismatic": lambda n: 4 * n,
        "pro-prismatic": lambda n: 2 * n,
        "pro-antiprismatic": lambda n: 2 * n,
        "chiro-tetrahedral": lambda n: 12,
        "chiro-octahedral": lambda n: 24,
        "chiro-icosahedral": lambda n: 60,
        "pyritohedral": lambda n: 24,
        "tetrahedral": lambda n: 24,
        "octahedral": lambda n: 48,
        "icosahedral": lambda n: 120,
    }
    return table[name](n)


def axiom_defect(group: SymmetryGroup) -> float:
    """Largest violation of orthogonality, identity-first, closure and inverses."""
    els = group.elements
    eye = np.eye(3)
    worst = float(np.abs(els[0] - eye).max())
    worst = max(worst, float(np.abs(np.einsum("kji,kjl->kil", els, els) - eye).max()))
    dets = np.linalg.det(els)
    worst = max(worst, float(np.abs(np.abs(dets) - 1.0).max()))
    flat = els.reshape(len(els), 9)
    tree = cKDTree(flat)
    products = np.einsum("aij,bjk->abik", els, els).reshape(-1, 9)
    dist, _ = tree.query(products)
    worst = max(worst, float(dist.max()))
    inverses = np.transpose(els, (0, 2, 1)).reshape(-1, 9)
    dist, _ = tree.query(inverses)
    return max(worst, float(dist.max()))


# ----------------------------------------------------------------------------
# singular locus


def _fixed_space(m: np.ndarray) -> np.ndarray:
    """Orthonormal basis (as rows) of ker(m - I)."""
    _, s, vt = np.linalg.svd(m - np.eye(3))
    return vt[s < 1e-8]


def _canonical_direction(v: np.ndarray) -> np.ndarray:
    v = v / np.linalg.norm(v)
    for c in v:
        if abs(c) > 1e-9:
            return v if c > 0 else -v
    return v


def isotropy(group: SymmetryGroup, point: np.ndarray, tol: float = FIXED_POINT_TOL) -> np.ndarray:
    """Indices of the elements fixing ``point``."""
    moved = np.linalg.norm(group.elements @ np.asarray(point, dtype=float) - point, axis=1)
    return np.flatnonzero(moved < tol)


def isotropy_label(group: SymmetryGroup, point: np.ndarray) -> str:
    idx = isotropy(group, point)
    els = group.elements[idx]
    dets = np.linalg.det(els)
    rotations = int(np.count_nonzero(dets > 0))
    mirrors = int(np.count_nonzero(dets < 0))
    if rotations == 1 and mirrors == 1:
        return "*11"
    if mirrors:
        return f"*{rotations}{rotations}"
    return f"{rotations}{rotations}"


def singular_locus(group: SymmetryGroup) -> list[SingularStratum]:
    """Lines and planes of points (away from the origin) with nontrivial isotropy."""
    lines: dict[tuple, np.ndarray] = {}
    planes: dict[tuple, np.ndarray] = {}
    for m in group.elements[1:]:
        basis = _fixed_space(m)
        if len(basis) == 1:
            d = _canonical_direction(basis[0])
            lines.setdefault(tuple(np.round(d, 8) + 0.0), d)
        elif len(basis) == 2:
            nrm = _canonical_direction(np.cross(basis[0], basis[1]))
            planes.setdefault(tuple(np.round(nrm, 8) + 0.0), nrm)
    strata = []
    for key in sorted(lines):
        d = lines[key]
        strata.append(SingularStratum(1, "line", tuple(float(x) for x in d), isotropy_label(group, 0.5 * d)))
    for key in sorted(planes):
        nrm = planes[key]
        # a generic point of the plane away from every line
        basis = _fixed_space(reflection(nrm))
        probe = 0.5 * (0.8537 * basis[0] + 0.5207 * basis[1])
        strata.append(SingularStratum(2, "plane", tuple(float(x) for x in nrm), isotropy_label(group, probe)))
    return strata


def locus_signature(strata: list[SingularStratum]) -> dict[str, int]:
    """Counts keyed by ``"<geometry> <label>"``, e.g. ``{"line *22": 3}``."""
    out: dict[str, int] = {}
    for s in strata:
        key = f"{s.geometry} {s.isotropy_label}"
        out[key] = out.get(key, 0) + 1
    return dict(sorted(out.items()))


def table_signature(name: str, n: int | None) -> dict[str, int]:
    """Singular-locus row of the reference catalog table, with n substituted."""
    rows = {
        "cyclic": [(1, "line", "{n}{n}")],
        "dihedral": [("n", "line", "22"), (1, "line", "{n}{n}")],
        "pyramidal": [(1, "line", "*{n}{n}"), ("n", "plane", "*11")],
        "prismatic": [("n", "line", "*22"), (1, "line", "*{n}{n}"), ("n+1", "plane", "*11")],
        "antiprismatic": [("n", "line", "22"), (1, "line", "*{n}{n}"), ("n", "plane", "*11")],
        "pro-prismatic": [(1, "line", "{n}{n}"), (1, "plane", "*11")],
        "pro-antiprismatic": [(1, "line", "{n}{n}")],
        "chiro-tetrahedral": [(3, "line", "22"), (4, "line", "33")],
        "chiro-octahedral": [(6, "line", "22"), (4, "line", "33"), (3, "line", "44")],
        "chiro-icosahedral": [(15, "line", "22"), (10, "line", "33"), (12, "line", "55")],
        "pyritohedral": [(3, "line", "*22"), (4, "line", "33"), (3, "plane", "*11")],
        "tetrahedral": [(3, "line", "*22"), (4, "line", "*33"), (6, "plane", "*11")],
        "octahedral": [(6, "line", "*22"), (4, "line", "*33"), (3, "line", "*44"), (9, "plane", "*11")],
        "icosahedral": [(15, "line", "*22"), (10, "line", "*33"), (12, "line", "*55"), (15, "plane", "*11")],
    }
    out: dict[str, int] = {}
    for count, geometry, label in rows[name]:
        if count == "n":
            count = n
        elif count == "n+1":
            count = n + 1
        key = f"{geometry} {label.format(n=n)}"
        out[key] = out.get(key, 0) + int(count)
    return dict(sorted(out.items()))


# ----------------------------------------------------------------------------
# action on meshes


def vertex_permutations(mesh: TriMesh, group: SymmetryGroup, tol: float = 1e-7) -> np.ndarray:
    """perm[k, v] is the vertex at g_k(x_v); raises if the vertex set is not invariant."""
    tree = cKDTree(mesh.vertices)
    perm = np.empty((group.order, mesh.n_vertices), dtype=np.int64)
    for k, g in enumerate(group.elements):
        dist, idx = tree.query(mesh.vertices @ g.T)
        if dist.max() > tol or len(np.unique(idx)) != mesh.n_vertices:
            raise SymmetryError(f"vertex set is not invariant under element {k} (max mismatch {dist.max():.2e})")
        perm[k] = idx
    return perm


def attach_symmetry(mesh: TriMesh, group: SymmetryGroup, tol: float = 1e-7) -> TriMesh:
    """Attach the group and its vertex permutations (orbit labels) to a mesh."""
    perm = vertex_permutations(mesh, group, tol)
    return TriMesh(mesh.vertices, mesh.triangles, mesh.boundary_flags, group, perm, dict(mesh.meta))


def orbit_representatives(perm: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Smallest vertex index of every orbit and the orbit id of every vertex."""
    rep = perm.min(axis=0)
    reps, orbit_id = np.unique(rep, return_inverse=True)
    return reps, orbit_id.ravel()


def project_equivariant(mesh: TriMesh, group: SymmetryGroup | None = None) -> TriMesh:
    """Replace positions by their group average g^-1 x_{g v} over all elements."""
    if mesh.perm is None:
        raise SymmetryError("mesh has no orbit labels; build it with an equivariant constructor or attach_symmetry")
    group = group or mesh.group
    if group is None or group.order != mesh.perm.shape[0]:
        raise SymmetryError("group does not match the mesh's orbit labels")
    v = mesh.vertices
    acc = np.zeros_like(v)
    for k, g in enumerate(group.elements):
        acc += v[mesh.perm[k]] @ g  # g^T applied to each row = g^-1 x
    new = acc / group.order
    flags = mesh.boundary_flags
    if flags.any():
        new[flags] /= np.linalg.norm(new[flags], axis=1)[:, None]
    return mesh.with_vertices(new)


def equivariance_deviation(mesh: TriMesh, group: SymmetryGroup) -> float:
    """Max over elements of the symmetric Hausdorff distance between vertex sets."""
    if mesh.n_vertices == 0 or group.order == 1:
        return 0.0
    tree = cKDTree(mesh.vertices)
    worst = 0.0
    for g in group.elements[1:]:
        moved = mesh.vertices @ g.T
        d1, _ = tree.query(moved)
        d2, _ = cKDTree(moved).query(mesh.vertices)
        worst = max(worst, float(d1.max()), float(d2.max()))
    return worst


def sign_character(element: np.ndarray | int, mesh: TriMesh, group: SymmetryGroup | None = None, tol: float = 0.5) -> int:
    """+1 if the element pushes the unit normal forward to itself, -1 if to its negative."""
    group = group or mesh.group
    if isinstance(element, (int, np.integer)):
        if group is None:
            raise SymmetryError("an element index needs a group")
        matrix = group.elements[int(element)]
        perm = mesh.perm[int(element)] if mesh.perm is not None else None
    else:
        matrix = np.asarray(element, dtype=float)
        perm = None
    if perm is None:
        dist, perm = cKDTree(mesh.vertices).query(mesh.vertices @ matrix.T)
        if dist.max() > 1e-7:
            raise SymmetryError("mesh is not invariant under the element")
    normals = vertex_normals(mesh)
    dots = np.einsum("ij,ij->i", normals @ matrix.T, normals[perm])
    sign = 1 if dots.mean() >= 0 else -1
    if np.abs(dots - sign).max() > tol:
        raise SymmetryError("sign of the pushed-forward normal is not constant over the mesh")
    return sign


def sign_characters(mesh: TriMesh, group: SymmetryGroup | None = None) -> np.ndarray:
    group = group or mesh.group
    return np.array([sign_character(k, mesh, group) for k in range(group.order)], dtype=np.int64)


def octant_sign_patterns() -> list[tuple[int, int, int]]:
    return list(itertools.product((1, -1), repeat=3))


def octant_group() -> SymmetryGroup:
    """The prismatic group of order 8: all diagonal sign matrices."""
    return group_from_catalog("prismatic", 2)


def unfold_octant(vertices: np.ndarray, triangles: np.ndarray, on_sphere: np.ndarray, tol: float = 0.0, meta: dict | None = None) -> TriMesh:
    """Reflect a piece living in the closed octant {x >= 0} to all eight octants.

    Vertices lying on a coordinate plane (a coordinate within ``tol`` of zero,
    exactly zero by default) are shared between the neighbouring copies. Images under orientation-reversing elements have their winding
    flipped, so every element pushes the normal forward to the normal.
    """
    vertices = np.asarray(vertices, dtype=float)
    triangles = np.asarray(triangles, dtype=np.int64)
    on_sphere = np.asarray(on_sphere, dtype=bool)
    if (vertices < -max(tol, 1e-15)).any():
        raise SymmetryError("octant piece has vertices outside the closed positive octant")
    group = octant_group()
    signs = np.array([np.diag(m) for m in group.elements]).astype(np.int64)  # (8, 3)
    on_plane = np.abs(vertices) <= tol
    vertices = np.where(on_plane, 0.0, vertices)

    def canonical(sig: np.ndarray) -> np.ndarray:
        # sign pattern per vertex with +1 wherever the vertex sits on the plane
        return np.where(on_plane, 1, sig)

    def code(sig: np.ndarray) -> np.ndarray:
        return ((1 - sig) // 2) @ np.array([4, 2, 1])

    n = len(vertices)
    global_id = -np.ones((n, 8), dtype=np.int64)
    order = []
    for k in range(8):
        c = code(canonical(np.broadcast_to(signs[k], (n, 3))))
        for v in range(n):
            if global_id[v, c[v]] < 0:
                global_id[v, c[v]] = len(order)
                order.append((v, c[v]))
    src = np.array([v for v, _ in order])
    pattern_of_code = np.array([[1 - 2 * ((c >> b) & 1) for b in (2, 1, 0)] for c in range(8)])
    sig_all = pattern_of_code[[c for _, c in order]]
    new_vertices = vertices[src] * sig_all
    tris = []
    for k in range(8):
        c = code(canonical(np.broadcast_to(signs[k], (n, 3))))
        mapped = global_id[np.arange(n), c][triangles]
        if np.prod(signs[k]) < 0:
            mapped = mapped[:, ::-1]
        tris.append(mapped)
    perm = np.empty((8, len(order)), dtype=np.int64)
    for k in range(8):
        image_sig = np.where(on_plane[src], 1, sig_all * signs[k])
        perm[k] = global_id[src, code(image_sig)]
    return TriMesh(new_vertices, np.concatenate(tris), on_sphere[src], group, perm, dict(meta or {}))
