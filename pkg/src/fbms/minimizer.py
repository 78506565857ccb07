"""Equivariant area minimisation with free boundary on the unit sphere.

Two drivers share the same constraint handling:

* ``descent``: projected gradient descent with an Armijo backtracking line search.
* ``newton``: Levenberg-Marquardt on the stationarity equation grad A = 0 in
  reduced coordinates. It converges to unstable critical points too, which
  descent cannot reach.

Boundary vertices move tangentially to the sphere and are pushed back radially
after every step; positions are re-averaged over the group at a fixed cadence.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import sparse

from . import _kernels
from .mesh import MeshError, TopologySummary, TriMesh, area, boundary_directed_edges, quadric_fit, topology, triangle_normals
from .symmetry import SymmetryGroup, equivariance_deviation, orbit_representatives, project_equivariant

log = logging.getLogger(__name__)


class FlowError(RuntimeError):
    pass


@dataclass(frozen=True)
class FlowOptions:
    method: str = "descent"  # "descent" or "newton"
    step_rule: str = "backtracking"  # or "fixed" (descent only)
    max_iterations: int = 400
    gradient_tolerance: float = 1e-6  # stop when |grad| < tolerance * area
    projection_cadence: int = 1
    fixed_step: float = 1e-2
    armijo: float = 1e-4
    min_quality: float = 1e-3
    group: SymmetryGroup | None = None
    snapshot_every: int = 0

    def __post_init__(self):
        if self.gradient_tolerance <= 0:
            raise ValueError("stop threshold must be positive")
        if self.max_iterations < 1:
            raise ValueError("need at least one iteration")
        if self.method not in {"descent", "newton"}:
            raise ValueError(f"unknown method {self.method!r}")
        if self.step_rule not in {"backtracking", "fixed"}:
            raise ValueError(f"unknown step rule {self.step_rule!r}")
        if self.projection_cadence < 1:
            raise ValueError("projection cadence must be at least 1")


@dataclass
class FlowReport:
    iterations: int
    final_area: float
    area_history: list
    gradient_history: list
    final_gradient_norm: float
    boundary_orthogonality_residual: float
    topology: TopologySummary
    converged: bool
    stop_reason: str
    equivariance_deviation: float = 0.0
    seconds: float = 0.0
    snapshots: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "final_area": self.final_area,
            "final_area_over_pi": self.final_area / math.pi,
            "area_history": [float(a) for a in self.area_history],
            "gradient_history": [float(g) for g in self.gradient_history],
            "final_gradient_norm": self.final_gradient_norm,
            "boundary_orthogonality_residual": self.boundary_orthogonality_residual,
            "topology": self.topology.as_dict(),
            "converged": self.converged,
            "stop_reason": self.stop_reason,
            "equivariance_deviation": self.equivariance_deviation,
        }


# ----------------------------------------------------------------------------
# gradient and constraint


def raw_area_gradient(mesh: TriMesh) -> np.ndarray:
    return _kernels.area_gradient(mesh.vertices, mesh.triangles)


def _tangential(vectors: np.ndarray, points: np.ndarray) -> np.ndarray:
    unit = points / np.linalg.norm(points, axis=1)[:, None]
    return vectors - np.einsum("ij,ij->i", vectors, unit)[:, None] * unit


def area_gradient(mesh: TriMesh) -> np.ndarray:
    """Gradient of total area; boundary rows projected to the sphere's tangent planes."""
    _, areas = triangle_normals(mesh)
    degenerate = areas <= 0.0
    if degenerate.any():
        log.warning("%d degenerate triangle(s) contribute no gradient", int(degenerate.sum()))
    grad = raw_area_gradient(mesh)
    flags = mesh.boundary_flags
    if flags.any():
        grad[flags] = _tangential(grad[flags], mesh.vertices[flags])
    return grad


def _retract(vertices: np.ndarray, flags: np.ndarray) -> np.ndarray:
    out = vertices.copy()
    if flags.any():
        out[flags] /= np.linalg.norm(out[flags], axis=1)[:, None]
    return out


def triangle_quality(mesh: TriMesh) -> np.ndarray:
    """4*sqrt(3)*area / sum of squared edge lengths: 1 for equilateral, 0 for degenerate."""
    v, t = mesh.vertices, mesh.triangles
    a, b, c = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
    twice = np.linalg.norm(np.cross(b - a, c - a), axis=1)
    edges = np.sum((b - a) ** 2 + (c - b) ** 2 + (a - c) ** 2, axis=1)
    return 2.0 * math.sqrt(3.0) * twice / np.where(edges > 0, edges, 1.0)


def boundary_orthogonality_residual(mesh: TriMesh) -> float:
    """Max over boundary vertices of |angle(surface normal, sphere normal) - pi/2|, in radians.

    Normals come from a local quadric fit; plain face normals carry an O(h)
    error at the boundary that would swamp the quantity being measured.
    """
    flags = mesh.boundary_flags
    if not flags.any() or len(boundary_directed_edges(mesh)) == 0:
        raise MeshError("mesh has no boundary")
    normals = quadric_fit(mesh).normals[flags]
    radial = mesh.vertices[flags] / np.linalg.norm(mesh.vertices[flags], axis=1)[:, None]
    cosine = np.clip(np.abs(np.einsum("ij,ij->i", normals, radial)), 0.0, 1.0)
    return float(np.max(np.arcsin(cosine)))


# ----------------------------------------------------------------------------
# reduced equivariant coordinates


class ReducedCoordinates:
    """Displacements determined by one representative per orbit.

    Each representative moves inside the fixed space of its isotropy group,
    intersected with the sphere's tangent plane for boundary vertices; the
    other orbit members follow by the group action.
    """

    def __init__(self, mesh: TriMesh):
        if mesh.group is None or mesh.perm is None:
            self.group_elements = np.eye(3)[None]
            perm = np.arange(mesh.n_vertices)[None]
        else:
            self.group_elements = mesh.group.elements
            perm = mesh.perm
        reps, orbit_id = orbit_representatives(perm)
        n = mesh.n_vertices
        element_of = np.empty(n, dtype=np.int64)
        for k in range(len(perm) - 1, -1, -1):
            element_of[perm[k, reps]] = k
        self.reps, self.orbit_id, self.element_of = reps, orbit_id, element_of
        self.orbit_size = np.bincount(orbit_id, minlength=len(reps))
        bases = []
        for v in reps:
            stab = np.flatnonzero(perm[:, v] == v)
            proj = self.group_elements[stab].mean(axis=0)
            u, sv, _ = np.linalg.svd(proj)
            basis = u[:, sv > 0.5]
            if mesh.boundary_flags[v]:
                x = mesh.vertices[v] / np.linalg.norm(mesh.vertices[v])
                basis = basis - np.outer(x, x @ basis)
                u, sv, _ = np.linalg.svd(basis, full_matrices=False)
                basis = u[:, sv > 1e-8]
            bases.append(basis)
        self.bases = bases
        self.offsets = np.concatenate([[0], np.cumsum([b.shape[1] for b in bases])])
        self.size = int(self.offsets[-1])
        rows, cols, vals = [], [], []
        for w in range(n):
            r = orbit_id[w]
            block = self.group_elements[element_of[w]] @ bases[r]
            for i in range(3):
                for j in range(block.shape[1]):
                    rows.append(3 * w + i)
                    cols.append(self.offsets[r] + j)
                    vals.append(block[i, j])
        self.jacobian = sparse.csr_matrix((vals, (rows, cols)), shape=(3 * n, self.size))

    def expand(self, coords: np.ndarray) -> np.ndarray:
        return (self.jacobian @ coords).reshape(-1, 3)

    def reduce(self, full: np.ndarray) -> np.ndarray:
        return self.jacobian.T @ full.reshape(-1)


def area_hessian(mesh: TriMesh) -> sparse.csr_matrix:
    blocks = _kernels.area_hessian_blocks(mesh.vertices, mesh.triangles)
    dof = (3 * mesh.triangles[:, :, None] + np.arange(3)[None, None, :]).reshape(-1, 9)
    rows = np.repeat(dof, 9, axis=1).ravel()
    cols = np.tile(dof, (1, 9)).ravel()
    n = 3 * mesh.n_vertices
    return sparse.csr_matrix((blocks.ravel(), (rows, cols)), shape=(n, n))


def reduced_system(mesh: TriMesh, red: ReducedCoordinates) -> tuple[np.ndarray, np.ndarray]:
    """Reduced gradient and Hessian of area on the constraint manifold."""
    grad = raw_area_gradient(mesh)
    g = red.reduce(grad)
    jac = red.jacobian
    hess = (jac.T @ (area_hessian(mesh) @ jac)).toarray()
    flags = mesh.boundary_flags
    for r, v in enumerate(red.reps):
        if flags[v]:
            # curvature of the sphere constraint: second-order radial pull-back
            lo, hi = red.offsets[r], red.offsets[r + 1]
            x = mesh.vertices[v]
            hess[lo:hi, lo:hi] -= red.orbit_size[r] * float(x @ grad[v]) / float(x @ x) * np.eye(hi - lo)
    return g, 0.5 * (hess + hess.T)


# ----------------------------------------------------------------------------
# drivers


def _gradient_norm(mesh: TriMesh) -> float:
    return float(np.linalg.norm(area_gradient(mesh)))


def _symmetrize(mesh: TriMesh, group: SymmetryGroup | None) -> TriMesh:
    if mesh.perm is None or group is None:
        return mesh
    return project_equivariant(mesh, group)


def minimize(mesh: TriMesh, opts: FlowOptions = FlowOptions()) -> tuple[TriMesh, FlowReport]:
    """Drive the mesh towards a free boundary critical point of area."""
    group = opts.group or mesh.group
    if group is not None and mesh.perm is None:
        raise FlowError("equivariant flow needs a mesh with orbit labels")
    start = time.perf_counter()
    topo = topology(mesh)
    # never demand better triangles than the input already has
    floor = min(opts.min_quality, 0.25 * float(triangle_quality(mesh).min()))
    opts = replace(opts, min_quality=floor)
    if opts.method == "newton":
        final, areas, grads, reason, its, snaps = _newton(mesh, group, opts)
    else:
        final, areas, grads, reason, its, snaps = _descent(mesh, group, opts)
    if topology(final) != topo:
        raise FlowError("topology changed during the flow")
    gnorm = grads[-1]
    converged = gnorm < opts.gradient_tolerance * areas[-1]
    try:
        ortho = boundary_orthogonality_residual(final)
    except MeshError:
        ortho = float("nan")
    report = FlowReport(
        iterations=its,
        final_area=areas[-1],
        area_history=areas,
        gradient_history=grads,
        final_gradient_norm=gnorm,
        boundary_orthogonality_residual=ortho,
        topology=topo,
        converged=bool(converged),
        stop_reason=reason,
        equivariance_deviation=equivariance_deviation(final, group) if group is not None else 0.0,
        seconds=time.perf_counter() - start,
        snapshots=snaps,
    )
    return final, report


def _check_quality(mesh: TriMesh, floor: float) -> bool:
    return bool(triangle_quality(mesh).min() >= floor)


def _descent(mesh, group, opts):
    current = _symmetrize(mesh, group)
    flags = current.boundary_flags
    a = area(current)
    g = area_gradient(current)
    areas, grads = [a], [float(np.linalg.norm(g))]
    step = opts.fixed_step
    snaps = []
    reason = "iteration cap"
    it = 0
    for it in range(1, opts.max_iterations + 1):
        if grads[-1] < opts.gradient_tolerance * a:
            reason = "gradient below threshold"
            it -= 1
            break
        g2 = grads[-1] ** 2
        trial_step = step if opts.step_rule == "fixed" else min(step * 2.0, 1.0)
        while True:
            trial = current.with_vertices(_retract(current.vertices - trial_step * g, flags))
            if it % opts.projection_cadence == 0:
                trial = _symmetrize(trial, group)
            a_new = area(trial)
            if opts.step_rule == "fixed" or a_new <= a - opts.armijo * trial_step * g2:
                break
            trial_step *= 0.5
            if trial_step < 1e-16:
                return current, areas, grads, "line search failed to decrease area", it - 1, snaps
        if not _check_quality(trial, opts.min_quality):
            return current, areas, grads, "mesh quality collapsed", it - 1, snaps
        step = trial_step
        current, a = trial, a_new
        g = area_gradient(current)
        areas.append(a)
        grads.append(float(np.linalg.norm(g)))
        if opts.snapshot_every and it % opts.snapshot_every == 0:
            snaps.append((it, current))
    else:
        it = opts.max_iterations
    if grads[-1] < opts.gradient_tolerance * a:
        reason = "gradient below threshold"
    return current, areas, grads, reason, it, snaps


def _newton(mesh, group, opts):
    current = _symmetrize(mesh, group)
    flags = current.boundary_flags
    a = area(current)
    areas, grads = [a], [_gradient_norm(current)]
    snaps = []
    damping = None
    reason = "iteration cap"
    it = 0
    for it in range(1, opts.max_iterations + 1):
        if grads[-1] < opts.gradient_tolerance * a:
            reason = "gradient below threshold"
            it -= 1
            break
        red = ReducedCoordinates(current)
        g, hess = reduced_system(current, red)
        gnorm = float(np.linalg.norm(g))
        evals, evecs = np.linalg.eigh(hess)
        if damping is None:
            damping = 1e-3 * float(np.abs(evals).max())
        hg = evecs.T @ g
        accepted = False
        for _ in range(40):
            # Levenberg-Marquardt on grad = 0 with Jacobian = Hessian
            step = -evecs @ (evals * hg / (evals ** 2 + damping ** 2))
            trial = current.with_vertices(_retract(current.vertices + red.expand(step), flags))
            if it % opts.projection_cadence == 0:
                trial = _symmetrize(trial, group)
            if _check_quality(trial, opts.min_quality):
                g_trial = red.reduce(raw_area_gradient(trial))
                if np.linalg.norm(g_trial) < gnorm:
                    accepted = True
                    break
            damping *= 4.0
        if not accepted:
            return current, areas, grads, "no step reduced the gradient", it - 1, snaps
        damping = max(damping / 3.0, 1e-14 * float(np.abs(evals).max()))
        current = trial
        a = area(current)
        areas.append(a)
        grads.append(_gradient_norm(current))
        if opts.snapshot_every and it % opts.snapshot_every == 0:
            snaps.append((it, current))
    else:
        it = opts.max_iterations
    if grads[-1] < opts.gradient_tolerance * a:
        reason = "gradient below threshold"
    return current, areas, grads, reason, it, snaps
