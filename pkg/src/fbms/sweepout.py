"""Two-parameter family of genus-one surfaces in the ball: catenoidal annulus plus two ribbons.

For 0 < s < 1 and t0 <= t < 1 the slice is the annulus K_{beta(s,t),t} about the
x3-axis with two thin ribbons hugging the meridian through (+-1, 0, 0). All
meshes are built on one octant and reflected, so they are exactly invariant
under the eight coordinate sign changes.

Octant coordinates: at height z everything is divided by rho(z) = sqrt(1 - z^2),
so the sphere becomes the unit circle, the annulus a circle of radius q(z) and
the ribbon wall an arc of the circle of radius eps about (1, 0).
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from . import catenoid
from .catenoid import OptimalSweepoutSpec, optimal_alpha, profile
from .config import RunConfig, tier
from .mesh import BALL_VOLUME, MeshError, TopologySummary, TriMesh, area, empty_mesh, enclosed_volume, topology
from .symmetry import unfold_octant

log = logging.getLogger(__name__)

NORTH_POLE = (0.0, 0.0, 1.0)
MIN_RIBBON_WIDTH = 1e-7


class SweepoutError(ValueError):
    pass


class RefinementError(SweepoutError):
    pass


@dataclass(frozen=True)
class SweepoutParams:
    t0: float = 0.15
    eps0: float = 0.03
    beta_max: float = 80.0
    h0: float = 0.1
    smoothing_width: float = 0.02
    columns: int = 16  # annulus columns per octant away from the ribbon
    rows: int = 16
    ribbon_columns: int = 6
    radial: int = 64
    axial: int = 32
    widening_share: float = 0.5  # fraction of [0, t0] spent reopening the neck at s = 1

    def __post_init__(self):
        if not (0.0 < self.eps0 <= self.t0 < 1.0):
            raise SweepoutError(f"need 0 < eps0 <= t0 < 1, got eps0={self.eps0}, t0={self.t0}")
        if self.columns < 2 or self.rows < 2 or self.ribbon_columns < 1:
            raise SweepoutError("resolution too coarse")

    @classmethod
    def from_config(cls, config: RunConfig) -> "SweepoutParams":
        tr = tier(config.tier)
        return cls(
            t0=config.t0,
            eps0=config.eps0,
            beta_max=config.beta_max,
            h0=config.h0,
            smoothing_width=config.smoothing_width,
            columns=tr.slice_columns,
            rows=tr.slice_rows,
            ribbon_columns=tr.slice_ribbon,
            radial=tr.radial,
            axial=tr.axial,
        )

    @property
    def alpha_spec(self) -> OptimalSweepoutSpec:
        return OptimalSweepoutSpec(self.h0, self.smoothing_width)

    def alpha(self, t: float) -> float:
        return optimal_alpha(t, self.alpha_spec)

    def beta(self, s: float, t: float) -> float:
        """alpha(t)/(1-s)^2, smoothly saturated below beta_max."""
        a = self.alpha(t)
        if s <= 0.0:
            return a
        if s >= 1.0:
            return self.beta_max
        raw = a / (1.0 - s) ** 2
        span = self.beta_max - a
        return a + span * math.tanh((raw - a) / span)

    def eps(self, s: float, t: float) -> float:
        return self.eps0 * s * (1.0 - t) / ((1.0 - t) + self.t0)


# ----------------------------------------------------------------------------
# octant geometry


def _rho(z):
    return np.sqrt(np.maximum(1.0 - np.square(z), 0.0))


def _grid_tris(left: np.ndarray, right: np.ndarray) -> list[tuple[int, int, int]]:
    """Triangles of the strip between two columns of vertex ids (bottom to top)."""
    out = []
    for k in range(len(left) - 1):
        a, b, c, d = left[k], right[k], right[k + 1], left[k + 1]
        for tri in ((a, b, c), (a, c, d)):
            if len(set(tri)) == 3:
                out.append(tri)
    return out


@dataclass
class _Piece:
    points: list = field(default_factory=list)
    sphere: list = field(default_factory=list)

    def add(self, p, on_sphere: bool = False) -> int:
        p = np.asarray(p, dtype=float)
        if on_sphere:
            p = p / np.linalg.norm(p)
        self.points.append(p)
        self.sphere.append(on_sphere)
        return len(self.points) - 1


def _ribbon_angles(eps: float, m: int) -> tuple[np.ndarray, float]:
    psi_top = math.acos(eps / 2.0)
    return np.linspace(0.0, psi_top, m + 1), psi_top


def _normalized_ribbon_point(eps: float, psi: float) -> np.ndarray:
    return np.array([1.0 - eps * math.cos(psi), eps * math.sin(psi)])


def _orient_consistently(k_tris: list, r_tris: list) -> list:
    """Flip the ribbon triangles if they traverse the shared seam like the annulus does."""
    k_dir = {(a, b) for t in k_tris for a, b in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0]))}
    for t in r_tris:
        for a, b in ((t[0], t[1]), (t[1], t[2]), (t[2], t[0])):
            if (a, b) in k_dir:
                return [tuple(reversed(tr)) for tr in r_tris]
            if (b, a) in k_dir:
                return r_tris
    return r_tris


class _Meridian:
    """Arclength parametrisation of the profile curve z -> (r(z), z) on [0, t]."""

    def __init__(self, beta: float, t: float, samples: int = 4000):
        layer = min(1.0, 8.0 / (beta * t))
        uniform = np.linspace(0.0, t, samples // 2)
        near_top = t - t * layer * np.geomspace(1e-6, 1.0, samples // 2)
        z = np.unique(np.clip(np.concatenate([uniform, near_top, [t]]), 0.0, t))
        r = np.asarray(profile(beta, t, z))
        ds = np.hypot(np.diff(r), np.diff(z))
        self.z = z
        self.s = np.concatenate([[0.0], np.cumsum(ds)])
        self.beta, self.t = beta, t

    def heights(self, top: float, rows: int) -> np.ndarray:
        s_top = np.interp(top, self.z, self.s)
        z = np.interp(np.linspace(0.0, s_top, rows + 1), self.s, self.z)
        z[-1] = top
        return z


def _annulus_ribbon_piece(beta: float, t: float, eps: float, params: SweepoutParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Octant piece of the annulus K_{beta,t} with the ribbon through (1, 0, 0)."""
    rho_t = math.sqrt(1.0 - t * t)

    def q(z: float) -> float:
        return float(profile(beta, t, z)) / math.sqrt(1.0 - z * z)

    if eps < MIN_RIBBON_WIDTH:
        need = int(math.ceil(params.ribbon_columns * MIN_RIBBON_WIDTH / max(eps, 1e-300)))
        raise RefinementError(f"ribbon width {eps:.2e} is below the resolvable width {MIN_RIBBON_WIDTH:.0e}; "
                              f"use at least {need} ribbon columns or a larger eps")
    if q(0.0) >= 1.0 - eps:
        raise SweepoutError(f"ribbon of width {eps:.4f} meets the neck (neck ratio {q(0.0):.4f}); reduce eps")
    m, rows = params.ribbon_columns, params.rows
    psis, psi_top = _ribbon_angles(eps, m)
    # junction curve: where the ribbon circle meets the annulus circle
    junction_z = np.empty(m + 1)
    junction_phi = np.empty(m + 1)
    for j, psi in enumerate(psis):
        p = _normalized_ribbon_point(eps, psi)
        radius = float(np.hypot(*p))
        if j == m:
            junction_z[j] = t
        else:
            junction_z[j] = brentq(lambda z: q(z) - radius, 0.0, t, xtol=1e-15, rtol=1e-15)
        junction_phi[j] = math.atan2(p[1], p[0])
    junction_angle = 2.0 * math.asin(eps / 2.0)
    junction_phi[m] = junction_angle
    piece = _Piece()
    junction_ids = []
    for j, psi in enumerate(psis):
        z = junction_z[j]
        p = _normalized_ribbon_point(eps, psi) * math.sqrt(1.0 - z * z)
        junction_ids.append(piece.add((p[0], p[1], z), on_sphere=(j == m)))

    meridian = _Meridian(beta, t)
    phis = np.concatenate([junction_phi, np.linspace(junction_angle, math.pi / 2, params.columns + 1)[1:]])
    k_columns = []
    for c, phi in enumerate(phis):
        top = junction_z[c] if c <= m else t
        zs = meridian.heights(top, rows)
        r = np.asarray(profile(beta, t, zs[:-1]))
        cos_phi = 0.0 if c == len(phis) - 1 else math.cos(phi)
        sin_phi = 0.0 if c == 0 else math.sin(phi)
        ids = [piece.add((rk * cos_phi, rk * sin_phi, zk)) for rk, zk in zip(r, zs[:-1])]
        if c <= m:
            ids.append(junction_ids[c])
        else:
            ids.append(piece.add((rho_t * cos_phi, rho_t * sin_phi, t), on_sphere=True))
        k_columns.append(ids)

    r_columns = []
    for j, psi in enumerate(psis):
        zs = np.linspace(0.0, junction_z[j], rows + 1)
        p = _normalized_ribbon_point(eps, psi)
        if j == 0:
            p[1] = 0.0
        scale = _rho(zs[:-1])
        ids = [piece.add((sk * p[0], sk * p[1], zk), on_sphere=(j == m)) for sk, zk in zip(scale, zs[:-1])]
        ids.append(junction_ids[j])
        r_columns.append(ids)

    k_tris = [tri for a, b in zip(k_columns, k_columns[1:]) for tri in _grid_tris(a, b)]
    r_tris = [tri for a, b in zip(r_columns, r_columns[1:]) for tri in _grid_tris(a, b)]
    k_tris = [tuple(reversed(tr)) for tr in k_tris]  # outward normal on the annulus
    r_tris = _orient_consistently(k_tris, r_tris)
    return np.array(piece.points), np.array(k_tris + r_tris, dtype=np.int64), np.array(piece.sphere)


def _double_disc_piece(t: float, eps: float, params: SweepoutParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Octant piece of the two notched discs at heights +-t joined by the ribbon walls."""
    if eps < MIN_RIBBON_WIDTH:
        raise RefinementError(f"ribbon width {eps:.2e} is below the resolvable width {MIN_RIBBON_WIDTH:.0e}")
    m, rows = params.ribbon_columns, params.rows
    rho_t = math.sqrt(1.0 - t * t)
    psis, _ = _ribbon_angles(eps, m)
    junction_angle = 2.0 * math.asin(eps / 2.0)
    piece = _Piece()
    centre = piece.add((0.0, 0.0, t))
    junction_ids = []
    rims = []
    for j, psi in enumerate(psis):
        p = _normalized_ribbon_point(eps, psi)
        if j == 0:
            p[1] = 0.0
        rims.append(p)
        junction_ids.append(piece.add((rho_t * p[0], rho_t * p[1], t), on_sphere=(j == m)))
    for phi in np.linspace(junction_angle, math.pi / 2, params.columns + 1)[1:]:
        rims.append(np.array([math.cos(phi), math.sin(phi)]))
    rims[-1] = np.array([0.0, 1.0])
    d_columns = []
    for c, rim in enumerate(rims):
        ids = [centre]
        for k in range(1, rows):
            ids.append(piece.add((rho_t * rim[0] * k / rows, rho_t * rim[1] * k / rows, t)))
        ids.append(junction_ids[c] if c <= m else piece.add((rho_t * rim[0], rho_t * rim[1], t), on_sphere=True))
        d_columns.append(ids)
    r_columns = []
    for j, psi in enumerate(psis):
        zs = np.linspace(0.0, t, rows + 1)
        p = rims[j]
        ids = [piece.add((sk * p[0], sk * p[1], zk), on_sphere=(j == m)) for sk, zk in zip(_rho(zs[:-1]), zs[:-1])]
        ids.append(junction_ids[j])
        r_columns.append(ids)
    d_tris = [tri for a, b in zip(d_columns, d_columns[1:]) for tri in _grid_tris(a, b)]
    r_tris = [tri for a, b in zip(r_columns, r_columns[1:]) for tri in _grid_tris(a, b)]
    r_tris = _orient_consistently(d_tris, r_tris)
    return np.array(piece.points), np.array(d_tris + r_tris, dtype=np.int64), np.array(piece.sphere)


def _ribboned_annulus(beta: float, t: float, eps: float, params: SweepoutParams, meta: dict) -> TriMesh:
    pts, tris, sphere = _annulus_ribbon_piece(beta, t, eps, params)
    return unfold_octant(pts, tris, sphere, meta=dict(meta, beta=beta, height=t, eps=eps))


# ----------------------------------------------------------------------------
# slices


def build_slice(s: float, t: float, params: SweepoutParams = SweepoutParams()) -> TriMesh:
    """Interior slice for 0 < s < 1 and t0 <= t < 1: genus one with two boundary curves."""
    if not (0.0 < s < 1.0) or not (params.t0 <= t < 1.0):
        raise SweepoutError(f"build_slice needs 0 < s < 1 and t0 <= t < 1, got (s, t) = ({s}, {t})")
    return _ribboned_annulus(params.beta(s, t), t, params.eps(s, t), params, {"kind": "slice", "s": s, "t": t})


def build_edge_slice(side: str, t: float, params: SweepoutParams = SweepoutParams()) -> TriMesh:
    """Slices on the edges s = 0 (annulus about x3) and s = 1 (annulus about x2)."""
    if not (0.0 < t < 1.0):
        raise SweepoutError(f"edge slices need 0 < t < 1, got {t}")
    if side == "s0":
        mesh = catenoid.revolve_to_mesh(params.alpha(t), t, params.radial, params.axial)
        return TriMesh(mesh.vertices, mesh.triangles, mesh.boundary_flags, mesh.group, mesh.perm,
                       {"kind": "edge", "side": "s0", "t": t})
    if side == "s1":
        height = t if t >= params.t0 else _retraced_height(t, params)
        pts, tris, sphere = _double_disc_piece(height, params.eps(1.0, height), params)
        return unfold_octant(pts, tris, sphere, meta={"kind": "edge", "side": "s1", "t": t, "height": height})
    raise SweepoutError(f"side must be 's0' or 's1', got {side!r}")


def _retraced_height(t: float, params: SweepoutParams) -> float:
    """Below t0 the s = 1 edge climbs back through heights in (t0, 1) towards the poles."""
    return params.t0 + (1.0 - params.t0) * (1.0 - t / params.t0)


def extend_low_t(s: float, t: float, params: SweepoutParams = SweepoutParams()) -> TriMesh:
    """Continue the family below t0 down to the empty surface at t = 0.

    First the neck is reopened at fixed height t0 (beta decreases to alpha(t0)),
    then the optimal annulus shrinks with its height while the ribbons narrow.
    The reopening phase occupies a share of [0, t0] that vanishes as s -> 0.
    """
    if not (0.0 < s < 1.0) or not (0.0 < t < params.t0):
        raise SweepoutError(f"extend_low_t needs 0 < s < 1 and 0 < t < t0, got (s, t) = ({s}, {t})")
    tau = t / params.t0
    split = 1.0 - params.widening_share * s
    eps_start = params.eps(s, params.t0)
    meta = {"kind": "low_t", "s": s, "t": t}
    if tau >= split:
        lam = (tau - split) / (1.0 - split)
        a_open, a_start = params.alpha(params.t0), params.beta(s, params.t0)
        beta = math.exp((1.0 - lam) * math.log(a_open) + lam * math.log(a_start))
        return _ribboned_annulus(beta, params.t0, eps_start, params, dict(meta, phase="reopen"))
    height = params.t0 * tau / split
    eps = eps_start * (height / params.t0) ** 2
    return _ribboned_annulus(params.alpha(height), height, eps, params, dict(meta, phase="collapse"))


def sweepout_slice(s: float, t: float, params: SweepoutParams = SweepoutParams()) -> TriMesh:
    """Any slice of the closed square [0, 1]^2."""
    if not (0.0 <= s <= 1.0 and 0.0 <= t <= 1.0):
        raise SweepoutError(f"(s, t) = ({s}, {t}) outside [0, 1]^2")
    if t == 0.0 or t == 1.0:
        return empty_mesh()
    if s == 0.0:
        return build_edge_slice("s0", t, params)
    if s == 1.0:
        return build_edge_slice("s1", t, params)
    if t < params.t0:
        return extend_low_t(s, t, params)
    return build_slice(s, t, params)


# ----------------------------------------------------------------------------
# scans


@dataclass
class SweepoutGrid:
    s_values: np.ndarray
    t_values: np.ndarray
    areas: np.ndarray
    topologies: list  # [i_s][i_t] TopologySummary
    meshes: dict = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def argmax(self) -> tuple[int, int]:
        flat = int(np.argmax(self.areas))  # first maximum in row-major order
        return divmod(flat, self.areas.shape[1])

    @property
    def max_area(self) -> float:
        return float(self.areas.max())

    def rows(self) -> list[dict]:
        out = []
        for i, s in enumerate(self.s_values):
            for j, t in enumerate(self.t_values):
                topo = self.topologies[i][j]
                out.append({
                    "s": float(s),
                    "t": float(t),
                    "area": float(self.areas[i, j]),
                    "genus": topo.genus,
                    "boundary_count": topo.boundary_components,
                })
        return out

    def summary(self) -> dict:
        i, j = self.argmax
        return {
            "ns": len(self.s_values),
            "nt": len(self.t_values),
            "max_area": self.max_area,
            "max_area_over_pi": self.max_area / math.pi,
            "argmax": {"s": float(self.s_values[i]), "t": float(self.t_values[j])},
            "below_two_pi": bool(self.max_area < 2.0 * math.pi),
            "above_critical_catenoid": bool(self.max_area > catenoid.solve_critical_catenoid().area),
        }


def scan_grid(params: SweepoutParams = SweepoutParams(), ns: int = 16, nt: int = 16, keep_meshes: bool = False) -> SweepoutGrid:
    """Area and topology on the uniform (ns x nt) grid of [0, 1]^2, endpoints included."""
    if ns < 8 or nt < 8:
        raise SweepoutError("grid needs at least 8 points per direction")
    start = time.perf_counter()
    s_values = np.linspace(0.0, 1.0, ns)
    t_values = np.linspace(0.0, 1.0, nt)
    areas = np.zeros((ns, nt))
    topologies = []
    meshes = {}
    for i, s in enumerate(s_values):
        column = []
        for j, t in enumerate(t_values):
            try:
                mesh = sweepout_slice(float(s), float(t), params)
                areas[i, j] = area(mesh)
                column.append(topology(mesh))
            except (SweepoutError, MeshError) as exc:
                raise type(exc)(f"slice (s, t) = ({s:.6g}, {t:.6g}): {exc}") from exc
            if keep_meshes:
                meshes[(i, j)] = mesh
        topologies.append(column)
    return SweepoutGrid(s_values, t_values, areas, topologies, meshes, time.perf_counter() - start)


def volume_fraction(mesh: TriMesh, t: float) -> float:
    """Share of the ball on the side of the north pole; the empty ends take their limits."""
    if mesh.n_triangles == 0:
        return 1.0 if t < 0.5 else 0.0
    return enclosed_volume(mesh, NORTH_POLE) / BALL_VOLUME


@dataclass
class PathScan:
    samples: list  # (u, s, t, area, volume_fraction)
    half_volume_u: float
    half_volume_point: tuple[float, float]
    half_volume_area: float
    half_volume_fraction: float
    max_area: float

    def as_dict(self) -> dict:
        return {
            "samples": [list(map(float, row)) for row in self.samples],
            "half_volume_u": self.half_volume_u,
            "half_volume_point": list(self.half_volume_point),
            "half_volume_area": self.half_volume_area,
            "half_volume_fraction": self.half_volume_fraction,
            "max_area": self.max_area,
        }


def _polyline_point(gamma: np.ndarray, u: float) -> tuple[float, float]:
    seg = np.linalg.norm(np.diff(gamma, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)]) / seg.sum()
    return float(np.interp(u, cum, gamma[:, 0])), float(np.interp(u, cum, gamma[:, 1]))


def path_scan(gamma, params: SweepoutParams = SweepoutParams(), samples: int = 24, volume_tol: float = 1e-4) -> PathScan:
    """Areas and north-side volume fractions along a path from t = 0 to t = 1.

    The half-volume parameter is located by bisection to volume_tol * |B^3|.
    """
    gamma = np.asarray(gamma, dtype=float)
    if gamma.ndim != 2 or gamma.shape[1] != 2 or len(gamma) < 2:
        raise SweepoutError("path must be a polyline of (s, t) points")
    if gamma[0, 1] != 0.0 or gamma[-1, 1] != 1.0:
        raise SweepoutError("path must start on t = 0 and end on t = 1")
    if np.any(np.diff(gamma[:, 1]) < 0):
        raise SweepoutError("path must be monotone in t")

    def evaluate(u: float) -> tuple[float, float, float, float]:
        s, t = _polyline_point(gamma, u)
        mesh = sweepout_slice(s, t, params)
        return s, t, area(mesh), volume_fraction(mesh, t)

    us = np.linspace(0.0, 1.0, samples + 1)
    rows = [(u, *evaluate(u)) for u in us]
    crossing = next((k for k in range(len(rows) - 1) if rows[k][4] >= 0.5 > rows[k + 1][4]), None)
    if crossing is None:
        raise SweepoutError(f"volume fraction never crosses 1/2 along the path; sample more than {samples} points")
    lo, hi = rows[crossing][0], rows[crossing + 1][0]
    best = None
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        s, t, a, f = evaluate(mid)
        best = (mid, s, t, a, f)
        if abs(f - 0.5) <= volume_tol:
            break
        if f >= 0.5:
            lo = mid
        else:
            hi = mid
    else:
        raise SweepoutError(f"half volume not located to {volume_tol:.0e}; the volume jumps across 1/2 near u = {mid:.6f}")
    rows.append(best)
    rows.sort(key=lambda r: r[0])
    return PathScan(
        samples=rows,
        half_volume_u=best[0],
        half_volume_point=(best[1], best[2]),
        half_volume_area=best[3],
        half_volume_fraction=best[4],
        max_area=max(r[3] for r in rows),
    )


def monotone_paths(count: int, seed: int = 0, knots: int = 3) -> list[np.ndarray]:
    """The vertical path s = 0 followed by random monotone polylines through the interior."""
    rng = np.random.default_rng(seed)
    paths = [np.array([[0.0, 0.0], [0.0, 1.0]])]
    for _ in range(count - 1):
        ts = np.concatenate([[0.0], np.sort(rng.uniform(0.05, 0.95, knots)), [1.0]])
        ss = rng.uniform(0.05, 0.95, knots + 2)
        paths.append(np.stack([ss, ts], axis=1))
    return paths
