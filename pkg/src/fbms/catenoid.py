"""The rotational family K_{a,h}: catenoidal annuli with boundary on the unit sphere.

K_{a,h} is swept out by rotating the graph r(z) = cosh(az)/cosh(ah)·sqrt(1-h^2),
|z| <= h, about the x3-axis. It is minimal exactly when a^-2 cosh^2(ah) + h^2 = 1
and it meets the sphere orthogonally exactly when ah·tanh(ah) = 1; the unique
pair satisfying both is the critical catenoid.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .config import DEFAULT_TOLERANCES
from .mesh import TriMesh
from .symmetry import attach_symmetry, group_from_catalog, unfold_octant

log = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
SMALL_A = 1e-8


class ParameterError(ValueError):
    pass


class QuadratureError(ArithmeticError):
    pass


def _check(a: float, h: float) -> None:
    if not (a > 0.0) or not math.isfinite(a):
        raise ParameterError(f"scaling a must be positive and finite, got {a!r}")
    if not (0.0 < h < 1.0):
        raise ParameterError(f"height h must lie in (0, 1), got {h!r}")


def _cosh_ratio(a: float, z: np.ndarray, h: float) -> np.ndarray:
    """cosh(az)/cosh(ah) without overflow."""
    az = a * np.abs(z)
    return np.exp(az - a * h) * (1.0 + np.exp(-2.0 * az)) / (1.0 + math.exp(-2.0 * a * h))


def _sinh_ratio(a: float, z: np.ndarray, h: float) -> np.ndarray:
    """sinh(az)/cosh(ah) without overflow."""
    az = a * np.abs(z)
    return np.sign(z) * np.exp(az - a * h) * (1.0 - np.exp(-2.0 * az)) / (1.0 + math.exp(-2.0 * a * h))


def _check_z(z, h: float) -> np.ndarray:
    zz = np.asarray(z, dtype=float)
    if np.any(np.abs(zz) > h * (1.0 + 1e-12)):
        raise ParameterError(f"z must satisfy |z| <= h = {h}")
    return zz


def profile(a: float, h: float, z):
    """Radius of K_{a,h} at height z."""
    _check(a, h)
    zz = _check_z(z, h)
    r = _cosh_ratio(a, zz, h) * math.sqrt(1.0 - h * h)
    return float(r) if np.ndim(r) == 0 else r


def profile_slope(a: float, h: float, z):
    _check(a, h)
    zz = _check_z(z, h)
    d = a * _sinh_ratio(a, zz, h) * math.sqrt(1.0 - h * h)
    return float(d) if np.ndim(d) == 0 else d


def balance_F(a: float, h: float) -> float:
    """a^-2 cosh^2(ah) + h^2; equals 1 exactly on the minimal branch."""
    if not (a > 0.0):
        raise ParameterError(f"scaling a must be positive, got {a!r}")
    return math.cosh(a * h) ** 2 / (a * a) + h * h


def mean_curvature(a: float, h: float, z):
    """Mean curvature of K_{a,h}; its sign is the sign of 1 - F(a, h) everywhere."""
    r = profile(a, h, z)
    dr = profile_slope(a, h, z)
    sech2 = 1.0 / math.cosh(a * h) ** 2 if a * h < 700 else 0.0
    numerator = a * a * (1.0 - h * h) * sech2 - 1.0
    return numerator / ((np.square(dr) + 1.0) ** 1.5 * r)


def area_quadrature(a: float, h: float, rel_tol: float = DEFAULT_TOLERANCES.quadrature) -> float:
    """Area of K_{a,h} by adaptive Gauss-Kronrod quadrature over [0, h] (doubled)."""
    _check(a, h)
    rho = math.sqrt(1.0 - h * h)

    def integrand(z: float) -> float:
        c = float(_cosh_ratio(a, z, h))
        s = float(_sinh_ratio(a, z, h))
        return c * rho * math.sqrt(1.0 + (a * s * rho) ** 2)

    # the integrand lives in a layer of width ~1/a below z = h
    breaks = sorted({max(0.0, h - k / a) for k in (1.0, 4.0, 16.0)} - {0.0, h})
    value, err = integrate.quad(integrand, 0.0, h, epsabs=0.0, epsrel=rel_tol, limit=400, points=breaks or None)
    total = 2.0 * TWO_PI * value
    if err > max(rel_tol * abs(value), 1e-300) * 10:
        raise QuadratureError(f"quadrature reached relative error {err / value:.2e}, wanted {rel_tol:.0e}")
    return total


def closed_form_area(s: float) -> float:
    """Area f(s) of the minimal member with ah = s."""
    if s < 0:
        raise ParameterError("s must be nonnegative")
    if s > 350.0:
        # divide through by cosh^2 s to avoid overflow; s/cosh^2 s underflows to 0
        return TWO_PI * math.tanh(s)
    c, sh = math.cosh(s), math.sinh(s)
    return TWO_PI * (s + sh * c) / (c * c + s * s)


def closed_form_area_derivative(s: float) -> float:
    c, sh = math.cosh(s), math.sinh(s)
    return 4.0 * math.pi * ((c - s * sh) / (c * c + s * s)) ** 2


@dataclass(frozen=True)
class CriticalCatenoid:
    a: float
    h: float
    s: float
    area: float

    def as_dict(self) -> dict:
        return {"a_star": self.a, "h_star": self.h, "s_star": self.s, "area": self.area, "area_over_pi": self.area / math.pi}


def _solve_s_tanh(tol: float = DEFAULT_TOLERANCES.root) -> float:
    """Root of s·tanh(s) = 1 by Newton safeguarded with bisection on [1, 1.5]."""
    lo, hi = 1.0, 1.5
    g = lambda s: s * math.tanh(s) - 1.0
    dg = lambda s: math.tanh(s) + s / math.cosh(s) ** 2
    s = 0.5 * (lo + hi)
    for _ in range(200):
        val = g(s)
        if val > 0:
            hi = s
        else:
            lo = s
        step = val / dg(s)
        candidate = s - step
        if not (lo < candidate < hi):
            candidate = 0.5 * (lo + hi)
        if abs(candidate - s) < tol:
            return candidate
        s = candidate
    raise ArithmeticError("s·tanh(s) = 1 did not converge")


@lru_cache(maxsize=1)
def solve_critical_catenoid() -> CriticalCatenoid:
    s = _solve_s_tanh()
    a = math.sqrt(math.cosh(s) ** 2 + s * s)
    h = s / a
    return CriticalCatenoid(a, h, s, closed_form_area(s))


def critical_residuals(cc: CriticalCatenoid) -> tuple[float, float]:
    """|F(a*,h*) - 1| and |a*h* tanh(a*h*) - 1|."""
    return abs(balance_F(cc.a, cc.h) - 1.0), abs(cc.a * cc.h * math.tanh(cc.a * cc.h) - 1.0)


# ----------------------------------------------------------------------------
# optimal one-parameter sweepout


def _smooth_step(x: float) -> float:
    """C-infinity step, 0 for x <= 0 and 1 for x >= 1."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    f = lambda u: math.exp(-1.0 / u) if u > 0 else 0.0
    return f(x) / (f(x) + f(1.0 - x))


@dataclass(frozen=True)
class OptimalSweepoutSpec:
    h0: float = 0.1
    smoothing_width: float = 0.02

    def __post_init__(self):
        hstar = solve_critical_catenoid().h
        if not (0.0 < self.h0 and self.h0 + self.smoothing_width < hstar):
            raise ParameterError(f"need 0 < h0 and h0 + width < h* = {hstar:.5f}, got h0={self.h0}, width={self.smoothing_width}")
        if self.smoothing_width <= 0:
            raise ParameterError("smoothing width must be positive")


def optimal_alpha(h: float, spec: OptimalSweepoutSpec = OptimalSweepoutSpec()) -> float:
    """Scaling of the sweepout member at height h: a*h*/h above the cutoff, constant below."""
    if not (0.0 <= h <= 1.0):
        raise ParameterError(f"h must lie in [0, 1], got {h!r}")
    s = solve_critical_catenoid().s
    low = s / spec.h0
    if h >= spec.h0 + spec.smoothing_width:
        return s / h
    if h <= spec.h0:
        return low
    w = _smooth_step((h - spec.h0) / spec.smoothing_width)
    return low + w * (s / h - low)


def sweepout_area(h: float, spec: OptimalSweepoutSpec = OptimalSweepoutSpec()) -> float:
    if h <= 0.0 or h >= 1.0:
        return 0.0
    return area_quadrature(optimal_alpha(h, spec), h)


def sweepout_table(n: int = 200, spec: OptimalSweepoutSpec = OptimalSweepoutSpec()) -> list[tuple[float, float, float]]:
    """(h, alpha(h), area) rows on an interior uniform grid of n heights."""
    hs = np.linspace(0.0, 1.0, n + 2)[1:-1]
    return [(float(h), optimal_alpha(h, spec), sweepout_area(h, spec)) for h in hs]


# ----------------------------------------------------------------------------
# meshes

_AXIS_FRAMES = {
    # columns map (x, y, z) in the x3-frame to the requested axis
    "x3": np.eye(3),
    "x1": np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]),
    "x2": np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]]),
}


def _grid_triangles(rows: int, cols: int, offset: int = 0) -> np.ndarray:
    """Split a (rows+1) x (cols+1) vertex grid (row-major) into triangles."""
    i, j = np.meshgrid(np.arange(rows), np.arange(cols), indexing="ij")
    v00 = offset + i * (cols + 1) + j
    v01 = v00 + 1
    v10 = v00 + cols + 1
    v11 = v10 + 1
    t1 = np.stack([v00, v01, v11], axis=-1).reshape(-1, 3)
    t2 = np.stack([v00, v11, v10], axis=-1).reshape(-1, 3)
    return np.concatenate([t1, t2])


def revolve_to_mesh(a: float, h: float, radial_segments: int = 128, axial_segments: int = 64, axis: str = "x3") -> TriMesh:
    """Triangulated K_{a,h} about a coordinate axis, with octant-group orbit labels.

    Segment counts are rounded up to multiples of 4 (radial) and 2 (axial) so that
    the vertex set is invariant under all coordinate reflections.
    """
    _check(a, h)
    if radial_segments < 8 or axial_segments < 8:
        raise ParameterError("need at least 8 radial and 8 axial segments")
    if axis not in _AXIS_FRAMES:
        raise ParameterError(f"axis must be one of x1, x2, x3; got {axis!r}")
    quarter = -(-radial_segments // 4)
    half = -(-axial_segments // 2)
    phi = np.linspace(0.0, math.pi / 2, quarter + 1)
    z = np.linspace(0.0, h, half + 1)
    r = np.asarray(profile(a, h, z))
    pts = np.stack([
        np.outer(r, np.cos(phi)),
        np.outer(r, np.sin(phi)),
        np.repeat(z[:, None], quarter + 1, axis=1),
    ], axis=-1).reshape(-1, 3)
    pts[:, 0][np.abs(pts[:, 0]) < 1e-15] = 0.0
    flags = np.zeros(len(pts), dtype=bool)
    flags[-(quarter + 1):] = True
    top = pts[flags]
    pts[flags] = top / np.linalg.norm(top, axis=1)[:, None]
    tris = _grid_triangles(half, quarter)  # outward normal for increasing phi, then z
    tris = tris[:, ::-1]
    frame = _AXIS_FRAMES[axis]
    pts = pts @ frame.T
    return unfold_octant(pts, tris, flags, meta={"kind": "catenoid", "a": a, "h": h, "axis": axis})


def disc_mesh(height: float = 0.0, rings: int = 24) -> TriMesh:
    """Horizontal disc {x3 = height} inside the ball, normal +e3."""
    if not (-1.0 < height < 1.0):
        raise ParameterError("disc height must lie in (-1, 1)")
    if rings < 1:
        raise ParameterError("need at least one ring")
    rho = math.sqrt(1.0 - height * height)
    verts = [np.array([0.0, 0.0, height])]
    ring_start = [0]
    for i in range(1, rings + 1):
        ang = 2.0 * math.pi * np.arange(4 * i) / (4 * i)
        rad = rho * i / rings
        ring = np.stack([rad * np.cos(ang), rad * np.sin(ang), np.full(4 * i, height)], axis=1)
        ring[np.abs(ring) < 1e-15] = 0.0
        ring_start.append(len(verts))
        verts.extend(ring)
    verts = np.array(verts)
    tris = []
    for i in range(1, rings + 1):
        inner = [0] if i == 1 else list(range(ring_start[i - 1], ring_start[i - 1] + 4 * (i - 1)))
        outer = list(range(ring_start[i], ring_start[i] + 4 * i))
        ni, no = len(inner), len(outer)
        a = b = 0
        # walk both rings counterclockwise so the normal is +e3
        while b < no or (ni > 1 and a < ni):
            if b < no and (ni == 1 or a >= ni or (b + 1) / no <= (a + 1) / ni):
                tris.append((inner[a % ni], outer[b], outer[(b + 1) % no]))
                b += 1
            else:
                tris.append((inner[a], outer[b % no], inner[(a + 1) % ni]))
                a += 1
    flags = np.zeros(len(verts), dtype=bool)
    flags[ring_start[rings]:] = True
    mesh = TriMesh(verts, np.array(tris, dtype=np.int64), flags, meta={"kind": "disc", "height": height})
    group = group_from_catalog("prismatic", 2) if height == 0.0 else group_from_catalog("pyramidal", 2)
    return attach_symmetry(mesh, group)


def cylinder_mesh(radius: float, half_height: float, radial_segments: int = 64, axial_segments: int = 32) -> TriMesh:
    """Round cylinder of given radius between heights -half_height and half_height (boundary flags only where on the sphere)."""
    quarter = -(-radial_segments // 4)
    half = -(-axial_segments // 2)
    phi = np.linspace(0.0, math.pi / 2, quarter + 1)
    z = np.linspace(0.0, half_height, half + 1)
    pts = np.stack([
        np.outer(np.full_like(z, radius), np.cos(phi)),
        np.outer(np.full_like(z, radius), np.sin(phi)),
        np.repeat(z[:, None], quarter + 1, axis=1),
    ], axis=-1).reshape(-1, 3)
    pts[np.abs(pts) < 1e-15] = 0.0
    flags = np.zeros(len(pts), dtype=bool)
    if abs(radius * radius + half_height * half_height - 1.0) < 1e-12:
        flags[-(quarter + 1):] = True
    tris = _grid_triangles(half, quarter)[:, ::-1]
    return unfold_octant(pts, tris, flags, meta={"kind": "cylinder"})
