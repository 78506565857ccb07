"""Steklov and Jacobi eigenvalue problems on triangle meshes.

Discretisation: cotangent stiffness, lumped vertex mass (a third of the
incident triangle areas), lumped boundary mass (half the incident boundary
edge lengths) and the potential |A|^2 taken from local quadric fits.

The second variation used throughout is

    Q(u, u) = int |grad u|^2 - |A|^2 u^2  -  int_boundary u^2,

the last term being the Robin contribution of the unit sphere, whose second
fundamental form is the identity.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.sparse.linalg import ArpackNoConvergence, eigsh, splu

from . import _kernels
from .mesh import MeshError, TriMesh, boundary_directed_edges, boundary_loops, quadric_fit, topology, triangle_normals
from .symmetry import SymmetryError, SymmetryGroup, attach_symmetry, orbit_representatives, sign_characters

log = logging.getLogger(__name__)

INDEX_TOLERANCE = 1e-6
DENSE_LIMIT = 1500


class SpectrumError(RuntimeError):
    """Eigensolver failure; carries the residuals reached."""

    def __init__(self, message: str, residuals=None):
        super().__init__(message)
        self.residuals = residuals


@dataclass
class SpectrumReport:
    kind: str  # steklov | jacobi-robin | jacobi-dirichlet
    subspace: str  # full | equivariant:<group>
    eigenvalues: np.ndarray
    index: int
    max_residual: float
    eigenvectors: np.ndarray = field(repr=False, default=None)
    sign_character: list | None = None
    symmetry_zero_modes: int = 0  # negative eigenvalues attributed to rotations, not counted

    def as_dict(self, samples: int = 0) -> dict:
        out = {
            "kind": self.kind,
            "subspace": self.subspace,
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "index": int(self.index),
            "max_residual": float(self.max_residual),
            "symmetry_zero_modes": int(self.symmetry_zero_modes),
        }
        if self.sign_character is not None:
            out["sign_character"] = [int(s) for s in self.sign_character]
        if samples and self.eigenvectors is not None:
            out["eigenfunction_samples"] = [[float(x) for x in col[:samples]] for col in self.eigenvectors.T]
        return out

    def csv_rows(self) -> list[list]:
        return [[k, float(lam)] for k, lam in enumerate(self.eigenvalues)]


# ----------------------------------------------------------------------------
# assembly


@dataclass(frozen=True)
class JacobiAssembly:
    stiffness: sparse.csr_matrix
    potential: np.ndarray  # |A|^2 per vertex
    mass: np.ndarray  # lumped vertex mass
    boundary_mass: np.ndarray  # lumped boundary mass, zero in the interior
    boundary_coefficient: float = 1.0

    def operator(self, robin: bool = True) -> sparse.csr_matrix:
        op = self.stiffness - sparse.diags(self.potential * self.mass)
        if robin:
            op = op - self.boundary_coefficient * sparse.diags(self.boundary_mass)
        return op.tocsr()


def stiffness_matrix(mesh: TriMesh) -> sparse.csr_matrix:
    rows, cols, vals = _kernels.cotan_entries(mesh.vertices, mesh.triangles)
    n = mesh.n_vertices
    off = sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    return (sparse.diags(np.asarray(off.sum(axis=1)).ravel()) - off).tocsr()


def lumped_mass(mesh: TriMesh) -> np.ndarray:
    _, areas = triangle_normals(mesh)
    mass = np.zeros(mesh.n_vertices)
    for k in range(3):
        np.add.at(mass, mesh.triangles[:, k], areas / 3.0)
    return mass


def boundary_mass(mesh: TriMesh) -> np.ndarray:
    edges = boundary_directed_edges(mesh)
    out = np.zeros(mesh.n_vertices)
    if len(edges):
        lengths = np.linalg.norm(mesh.vertices[edges[:, 0]] - mesh.vertices[edges[:, 1]], axis=1)
        np.add.at(out, edges[:, 0], 0.5 * lengths)
        np.add.at(out, edges[:, 1], 0.5 * lengths)
    return out


def assemble_jacobi(mesh: TriMesh) -> JacobiAssembly:
    return JacobiAssembly(stiffness_matrix(mesh), quadric_fit(mesh).shape_norm_sq, lumped_mass(mesh), boundary_mass(mesh))


# ----------------------------------------------------------------------------
# subspaces


def _require_orientable(mesh: TriMesh) -> None:
    if not topology(mesh).orientable:
        raise MeshError("the Jacobi problem needs an orientable mesh")


def _with_orbits(mesh: TriMesh, group: SymmetryGroup) -> TriMesh:
    if mesh.perm is not None and mesh.group is not None and mesh.group.order == group.order:
        return mesh
    return attach_symmetry(mesh, group)


def equivariant_basis(mesh: TriMesh, group: SymmetryGroup) -> tuple[sparse.csr_matrix, np.ndarray]:
    """Columns spanning {u : u(g x) = sgn(g) u(x)}, one per admissible orbit.

    Orbits whose stabiliser contains an element of sign -1 carry no such
    function and are dropped. Columns have disjoint supports.
    """
    mesh = _with_orbits(mesh, group)
    signs = sign_characters(mesh, group)
    perm = mesh.perm
    reps, orbit_id = orbit_representatives(perm)
    rows, cols, vals = [], [], []
    col = 0
    for r in reps:
        members = {}
        consistent = True
        for k in range(len(perm)):
            w = int(perm[k, r])
            s = int(signs[k])
            if w in members and members[w] != s:
                consistent = False
                break
            members[w] = s
        if not consistent:
            continue
        for w, s in members.items():
            rows.append(w)
            cols.append(col)
            vals.append(float(s))
        col += 1
    basis = sparse.csr_matrix((vals, (rows, cols)), shape=(mesh.n_vertices, col))
    return basis, signs


def sign_projector(mesh: TriMesh, group: SymmetryGroup) -> sparse.csr_matrix:
    """u -> |G|^-1 sum_g sgn(g) u o g, as a sparse vertex-space matrix."""
    mesh = _with_orbits(mesh, group)
    signs = sign_characters(mesh, group)
    n = mesh.n_vertices
    out = sparse.csr_matrix((n, n))
    for k, p in enumerate(mesh.perm):
        out = out + sparse.csr_matrix((np.full(n, float(signs[k])), (np.arange(n), p)), shape=(n, n))
    return (out / len(mesh.perm)).tocsr()


# ----------------------------------------------------------------------------
# eigen machinery


def inertia_negative(matrix: sparse.spmatrix) -> int:
    """Number of negative eigenvalues of a sparse symmetric matrix.

    Uses an LDL^T-style factorisation: symmetric fill-reducing ordering and
    diagonal pivots only, so the signs of U's diagonal give the inertia.
    """
    a = sparse.csr_matrix(matrix)
    order = csgraph.reverse_cuthill_mckee(a, symmetric_mode=True)
    permuted = a[order][:, order].tocsc()
    lu = splu(permuted, permc_spec="NATURAL", diag_pivot_thresh=0.0, options={"SymmetricMode": True})
    return int(np.count_nonzero(lu.U.diagonal() < 0))


def _dense_pencil(a: sparse.spmatrix, m: np.ndarray, k: int):
    from scipy.linalg import eigh

    full = a.toarray() if sparse.issparse(a) else np.asarray(a)
    vals, vecs = eigh(full, np.diag(m))
    return vals[:k], vecs[:, :k]


def _lowest(a: sparse.spmatrix, m: np.ndarray, k: int, negatives: int):
    """Lowest ``max(k, negatives)`` generalized eigenpairs of (a, diag(m)), m > 0."""
    n = a.shape[0]
    want = min(max(k, negatives + 1), n)
    if n <= DENSE_LIMIT:
        return _dense_pencil(a, m, want)
    count = min(max(want + 4, 2 * negatives + 6), n - 2)
    while True:
        try:
            vals, vecs = eigsh(a.tocsc(), k=count, M=sparse.diags(m).tocsc(), sigma=-1e-3, which="LM", tol=1e-12)
        except ArpackNoConvergence as exc:
            raise SpectrumError("shift-invert Lanczos did not converge", exc.eigenvalues) from exc
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
        if np.count_nonzero(vals < 0) >= negatives and count - negatives >= want - negatives or count >= n - 2:
            return vals[:want], vecs[:, :want]
        count = min(2 * count, n - 2)


def _residuals(a, m, vals, vecs) -> float:
    if len(vals) == 0:
        return 0.0
    av = a @ vecs
    mv = m[:, None] * vecs
    scale = max(1.0, float(np.abs(vals).max()))
    return float(np.max(np.linalg.norm(av - mv * vals[None, :], axis=0) / np.linalg.norm(mv, axis=0)) / scale)


def rotation_jacobi_fields(mesh: TriMesh, normals: np.ndarray | None = None) -> np.ndarray:
    """Normal components <w x p, nu> of the three infinitesimal rotations, one column each."""
    normals = quadric_fit(mesh).normals if normals is None else normals
    cols = [np.einsum("ij,ij->i", np.cross(axis, mesh.vertices), normals) for axis in np.eye(3)]
    return np.column_stack(cols)


def _symmetry_modes(vecs: np.ndarray, fields: np.ndarray, mass: np.ndarray, overlap: float = 0.9) -> np.ndarray:
    """Flags eigenvectors lying (in the mass norm) almost inside the span of ``fields``."""
    weighted = np.sqrt(mass)[:, None]
    q, sv, _ = np.linalg.svd(weighted * fields, full_matrices=False)
    q = q[:, sv > 1e-8 * max(sv.max(), 1e-300)] if len(sv) else q
    v = weighted * vecs
    v = v / np.maximum(np.linalg.norm(v, axis=0), 1e-300)
    return np.linalg.norm(q.T @ v, axis=0) > overlap


def _count_index(vals: np.ndarray, negatives: int, tolerance: float, zero_modes: np.ndarray) -> int:
    cut = tolerance * max(1.0, float(np.abs(vals).max())) if len(vals) else 0.0
    shown = int(np.count_nonzero((vals < -cut) & ~zero_modes))
    # eigenvalues beyond the ones we computed are counted by inertia
    hidden = max(0, negatives - int(np.count_nonzero(vals < 0)))
    return shown + hidden


# ----------------------------------------------------------------------------
# public problems


def steklov_spectrum(mesh: TriMesh, k: int = 6) -> SpectrumReport:
    """Lowest ``k`` eigenvalues of stiffness u = sigma * boundary_mass u."""
    bmass = boundary_mass(mesh)
    if not bmass.any():
        raise MeshError("Steklov problem needs a boundary")
    stiff = stiffness_matrix(mesh)
    interior = np.flatnonzero(bmass == 0)
    bdry = np.flatnonzero(bmass > 0)
    if len(bdry) <= DENSE_LIMIT:
        # harmonic extension: the Dirichlet-to-Neumann map is a Schur complement
        kbb = stiff[bdry][:, bdry].toarray()
        if len(interior):
            kib = stiff[interior][:, bdry]
            solve = splu(stiff[interior][:, interior].tocsc())
            kbb = kbb - (kib.T @ solve.solve(kib.toarray()))
        kbb = 0.5 * (kbb + kbb.T)
        vals, vb = _dense_pencil(kbb, bmass[bdry], min(k, len(bdry)))
        vecs = np.zeros((mesh.n_vertices, len(vals)))
        vecs[bdry] = vb
        if len(interior):
            vecs[interior] = -solve.solve(np.asarray(stiff[interior][:, bdry] @ vb))
    else:
        try:
            vals, vecs = eigsh(stiff.tocsc(), k=k, M=sparse.diags(bmass).tocsc(), sigma=-0.05, which="LM", tol=1e-12)
        except ArpackNoConvergence as exc:
            raise SpectrumError("Steklov eigensolve did not converge", exc.eigenvalues) from exc
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    res = stiff @ vecs - bmass[:, None] * vecs * vals[None, :]
    resid = float(np.max(np.abs(res))) if len(vals) else 0.0
    return SpectrumReport("steklov", "full", np.asarray(vals), 0, resid, vecs)


def jacobi_spectrum(
    mesh: TriMesh,
    boundary_condition: str = "robin",
    group: SymmetryGroup | None = None,
    k: int = 8,
    index_tolerance: float = INDEX_TOLERANCE,
) -> SpectrumReport:
    """Eigenvalues of -L u = lambda u, on all functions or on the sign-twisted invariant ones."""
    if boundary_condition not in ("robin", "dirichlet"):
        raise ValueError(f"unknown boundary condition {boundary_condition!r}")
    _require_orientable(mesh)
    asm = assemble_jacobi(mesh)
    op = asm.operator(robin=boundary_condition == "robin")
    mass = asm.mass
    keep = np.arange(mesh.n_vertices)
    if boundary_condition == "dirichlet":
        keep = np.flatnonzero(asm.boundary_mass == 0)
    signs = None
    if group is None:
        basis = sparse.identity(mesh.n_vertices, format="csr")[:, keep]
        subspace = "full"
    else:
        basis, signs = equivariant_basis(mesh, group)
        if boundary_condition == "dirichlet":
            inside = np.asarray(abs(basis).T @ (asm.boundary_mass > 0)).ravel() == 0
            basis = basis[:, np.flatnonzero(inside)]
        subspace = f"equivariant:{group.catalog_name or 'group'}"
    kind = "jacobi-" + boundary_condition
    if basis.shape[1] == 0:
        # e.g. a flat disc under a mirror in its own plane: no admissible functions
        return SpectrumReport(kind, subspace, np.zeros(0), 0, 0.0, np.zeros((mesh.n_vertices, 0)), None if signs is None else list(signs))
    reduced = (basis.T @ op @ basis).tocsr()
    rmass = (basis.T @ sparse.diags(mass) @ basis).diagonal()
    negatives = inertia_negative(reduced)
    vals, vecs = _lowest(reduced, rmass, k, negatives)
    resid = _residuals(reduced, rmass, vals, vecs)
    full_vecs = np.asarray(basis @ vecs)
    # rotations of the ball give exact Jacobi fields; on a mesh their
    # eigenvalues are only O(h^2) from zero and may fall on either side
    zero_modes = _symmetry_modes(full_vecs, rotation_jacobi_fields(mesh), asm.mass)
    if boundary_condition == "dirichlet":
        zero_modes[:] = False
    index = _count_index(vals, negatives, index_tolerance, zero_modes)
    report = SpectrumReport(kind, subspace, np.asarray(vals[:k]), index, resid, full_vecs[:, :k], None if signs is None else list(signs))
    report.symmetry_zero_modes = int(np.count_nonzero(zero_modes & (vals < 0)))
    return report


def quadratic_form(mesh: TriMesh, u: np.ndarray, asm: JacobiAssembly | None = None) -> float:
    asm = asm or assemble_jacobi(mesh)
    u = np.asarray(u, dtype=float)
    return float(u @ (asm.operator(robin=True) @ u))


def variational_rayleigh(mesh: TriMesh, u: np.ndarray) -> float:
    """Q(u, u) / int u^2 with the Robin term of the unit sphere."""
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.n_vertices,):
        raise ValueError("need one value per vertex")
    asm = assemble_jacobi(mesh)
    denom = float(np.sum(asm.mass * u * u))
    if denom == 0.0:
        raise ValueError("the zero function has no Rayleigh quotient")
    return quadratic_form(mesh, u, asm) / denom


@dataclass(frozen=True)
class NormalFieldCheck:
    interior_residual: float  # mass-weighted L2 norm of L(x.nu) over interior vertices
    boundary_max: float  # max |x.nu| over boundary vertices

    def as_dict(self) -> dict:
        return {"interior_residual": self.interior_residual, "boundary_max": self.boundary_max}


def jacobi_residual_xperp(mesh: TriMesh) -> NormalFieldCheck:
    """How far u = <x, nu> is from solving L u = 0 inside and vanishing on the boundary."""
    fit = quadric_fit(mesh)
    u = np.einsum("ij,ij->i", mesh.vertices, fit.normals)
    mass = lumped_mass(mesh)
    stiff = stiffness_matrix(mesh)
    lu = -(stiff @ u) / np.where(mass > 0, mass, 1.0) + fit.shape_norm_sq * u
    inner = ~mesh.boundary_flags
    interior = float(math.sqrt(np.sum(mass[inner] * lu[inner] ** 2)))
    bmax = float(np.max(np.abs(u[mesh.boundary_flags]))) if mesh.boundary_flags.any() else 0.0
    return NormalFieldCheck(interior, bmax)


# ----------------------------------------------------------------------------
# topology checks


def is_flat_coordinate_disc(mesh: TriMesh, tol: float = 1e-9) -> bool:
    """True for a mesh lying in one coordinate plane through the origin."""
    return bool(np.any(np.abs(mesh.vertices).max(axis=0) <= tol))


@dataclass(frozen=True)
class Census:
    applicable: bool
    euler_characteristic: int | None = None
    smooth_edges: int | None = None
    spherical_arcs: int | None = None
    identity_holds: bool | None = None
    notice: str = ""

    def as_dict(self) -> dict:
        return {
            "applicable": self.applicable,
            "euler_characteristic": self.euler_characteristic,
            "smooth_edges": self.smooth_edges,
            "spherical_arcs": self.spherical_arcs,
            "identity_holds": self.identity_holds,
            "notice": self.notice,
        }


def _octant_piece(mesh: TriMesh, tol: float) -> TriMesh:
    v = mesh.vertices
    centroids = v[mesh.triangles].mean(axis=1)
    inside = np.all(centroids > tol, axis=1)
    tris = mesh.triangles[inside]
    used = np.unique(tris)
    remap = -np.ones(len(v), dtype=np.int64)
    remap[used] = np.arange(len(used))
    return TriMesh(v[used], remap[tris], mesh.boundary_flags[used])


def fundamental_domain_census(mesh: TriMesh, tol: float = 1e-9) -> Census:
    """Clip to the positive octant and count Euler characteristic, smooth edges and spherical arcs.

    A smooth edge is a maximal run of boundary edges lying on a single wall of
    the octant (one of the three coordinate planes, or the sphere).
    """
    if is_flat_coordinate_disc(mesh):
        return Census(False, notice="flat disc in a mirror plane: the octant piece is degenerate")
    full_boundary = {tuple(sorted(map(int, e))) for e in boundary_directed_edges(mesh)}
    piece = _octant_piece(mesh, tol)
    if piece.n_triangles == 0:
        raise MeshError("no triangles inside the open octant")
    try:
        topo = topology(piece)
    except MeshError as exc:
        raise MeshError(f"clipped piece is not a manifold; refine the mesh ({exc})") from exc
    loops = boundary_loops(piece)
    # map piece-local indices back to the parent mesh to recognise sphere edges
    used = np.unique(mesh.triangles[np.all(mesh.vertices[mesh.triangles].mean(axis=1) > tol, axis=1)])
    pv = piece.vertices

    def wall(a: int, b: int) -> str:
        if tuple(sorted((int(used[a]), int(used[b])))) in full_boundary:
            return "sphere"
        for axis in range(3):
            if abs(pv[a, axis]) <= tol and abs(pv[b, axis]) <= tol:
                return f"plane{axis}"
        return "interior"

    corners = 0
    arcs = 0
    for loop in loops:
        labels = [wall(loop[i], loop[(i + 1) % len(loop)]) for i in range(len(loop))]
        changes = sum(1 for i in range(len(labels)) if labels[i] != labels[i - 1])
        corners += changes if changes else 1
        arcs += sum(1 for i in range(len(labels)) if labels[i] == "sphere" and labels[i - 1] != "sphere")
        if changes == 0 and labels[0] == "sphere":
            arcs += 1
    chi = topo.euler_characteristic
    genus_one = topology(mesh).genus == 1 and topology(mesh).boundary_components == 2
    identity = (4 * chi == corners - 1) if genus_one else None
    notice = "" if genus_one else "the corner identity is specific to genus one with two boundary curves; raw counts only"
    return Census(True, chi, corners, arcs, identity, notice)


@dataclass(frozen=True)
class ParityVerdict:
    passed: bool
    boundary_components: int
    flat_disc: bool

    def as_dict(self) -> dict:
        return {"passed": self.passed, "boundary_components": self.boundary_components, "flat_disc": self.flat_disc}


def boundary_parity_check(mesh: TriMesh, group: SymmetryGroup | None = None) -> ParityVerdict:
    """Even number of boundary curves, unless the surface is a flat coordinate disc."""
    topo = topology(mesh)
    if topo.connected_components != 1:
        raise MeshError("parity law is stated for connected surfaces")
    flat = is_flat_coordinate_disc(mesh) and topo.genus == 0 and topo.boundary_components == 1
    return ParityVerdict(flat or topo.boundary_components % 2 == 0, topo.boundary_components, flat)
