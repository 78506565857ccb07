"""Per-triangle hot loops with two interchangeable implementations.

The numba versions are compiled loops; the numpy versions are vectorised and
serve as the fallback when ``FBMS_BACKEND=numpy`` or numba is unavailable.
Both return identical results up to floating-point summation order.
"""

from __future__ import annotations

import numpy as np

from .config import backend_name

try:  # pragma: no cover - exercised implicitly by the backend switch
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    HAVE_NUMBA = False


# --------------------------------------------------------------------------
# numpy implementations


def _cross_matrices(vecs: np.ndarray) -> np.ndarray:
    out = np.zeros(vecs.shape[:-1] + (3, 3))
    x, y, z = vecs[..., 0], vecs[..., 1], vecs[..., 2]
    out[..., 0, 1], out[..., 0, 2] = -z, y
    out[..., 1, 0], out[..., 1, 2] = z, -x
    out[..., 2, 0], out[..., 2, 1] = -y, x
    return out


def area_gradient_numpy(verts: np.ndarray, tris: np.ndarray) -> np.ndarray:
    a, b, c = verts[tris[:, 0]], verts[tris[:, 1]], verts[tris[:, 2]]
    normal = np.cross(b - a, c - a)
    norm = np.linalg.norm(normal, axis=1)
    unit = normal / np.where(norm > 0.0, norm, 1.0)[:, None]
    grads = (
        0.5 * np.cross(unit, c - b),
        0.5 * np.cross(unit, a - c),
        0.5 * np.cross(unit, b - a),
    )
    out = np.zeros_like(verts)
    for corner, g in enumerate(grads):
        for axis in range(3):
            out[:, axis] += np.bincount(tris[:, corner], weights=g[:, axis], minlength=len(verts))
    return out


def cotan_entries_numpy(verts: np.ndarray, tris: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Off-diagonal cotangent half-weights as COO triplets (both orientations)."""
    rows, cols, vals = [], [], []
    for k in range(3):
        i, j, o = tris[:, (k + 1) % 3], tris[:, (k + 2) % 3], tris[:, k]
        u = verts[i] - verts[o]
        v = verts[j] - verts[o]
        cross = np.linalg.norm(np.cross(u, v), axis=1)
        cot = np.einsum("ij,ij->i", u, v) / np.where(cross > 0.0, cross, np.finfo(float).tiny)
        w = 0.5 * cot
        rows += [i, j]
        cols += [j, i]
        vals += [w, w]
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


def area_hessian_blocks_numpy(verts: np.ndarray, tris: np.ndarray) -> np.ndarray:
    """Exact 9x9 Hessian of each triangle's area, ordered (a, b, c) x xyz."""
    a, b, c = verts[tris[:, 0]], verts[tris[:, 1]], verts[tris[:, 2]]
    normal = np.cross(b - a, c - a)
    norm = np.linalg.norm(normal, axis=1)
    safe = np.where(norm > 0.0, norm, 1.0)
    unit = normal / safe[:, None]
    jac = np.stack([_cross_matrices(c - b), -_cross_matrices(c - a), _cross_matrices(b - a)], axis=1)
    proj = np.eye(3)[None] - unit[:, :, None] * unit[:, None, :]
    skew = -_cross_matrices(unit)
    out = np.zeros((len(tris), 9, 9))
    for v in range(3):
        for w in range(3):
            block = np.einsum("tji,tjk,tkl->til", jac[:, v], proj, jac[:, w]) / safe[:, None, None]
            if w == (v + 1) % 3:
                block = block + skew
            elif v == (w + 1) % 3:
                block = block + np.transpose(skew, (0, 2, 1))
            out[:, 3 * v : 3 * v + 3, 3 * w : 3 * w + 3] = 0.5 * block
    return out


# --------------------------------------------------------------------------
# numba implementations

if HAVE_NUMBA:

    @njit(cache=True)
    def _area_gradient_jit(verts, tris):
        out = np.zeros_like(verts)
        for t in range(tris.shape[0]):
            ia, ib, ic = tris[t, 0], tris[t, 1], tris[t, 2]
            e1x, e1y, e1z = verts[ib, 0] - verts[ia, 0], verts[ib, 1] - verts[ia, 1], verts[ib, 2] - verts[ia, 2]
            e2x, e2y, e2z = verts[ic, 0] - verts[ia, 0], verts[ic, 1] - verts[ia, 1], verts[ic, 2] - verts[ia, 2]
            nx = e1y * e2z - e1z * e2y
            ny = e1z * e2x - e1x * e2z
            nz = e1x * e2y - e1y * e2x
            norm = np.sqrt(nx * nx + ny * ny + nz * nz)
            if norm == 0.0:
                continue
            nx, ny, nz = 0.5 * nx / norm, 0.5 * ny / norm, 0.5 * nz / norm
            for corner in range(3):
                p = tris[t, (corner + 1) % 3]
                q = tris[t, (corner + 2) % 3]
                dx, dy, dz = verts[q, 0] - verts[p, 0], verts[q, 1] - verts[p, 1], verts[q, 2] - verts[p, 2]
                v = tris[t, corner]
                out[v, 0] += ny * dz - nz * dy
                out[v, 1] += nz * dx - nx * dz
                out[v, 2] += nx * dy - ny * dx
        return out

    @njit(cache=True)
    def _cotan_entries_jit(verts, tris):
        m = tris.shape[0]
        rows = np.empty(6 * m, dtype=np.int64)
        cols = np.empty(6 * m, dtype=np.int64)
        vals = np.empty(6 * m)
        tiny = 2.2250738585072014e-308
        pos = 0
        for k in range(3):
            for t in range(m):
                o = tris[t, k]
                i = tris[t, (k + 1) % 3]
                j = tris[t, (k + 2) % 3]
                ux, uy, uz = verts[i, 0] - verts[o, 0], verts[i, 1] - verts[o, 1], verts[i, 2] - verts[o, 2]
                vx, vy, vz = verts[j, 0] - verts[o, 0], verts[j, 1] - verts[o, 1], verts[j, 2] - verts[o, 2]
                cx = uy * vz - uz * vy
                cy = uz * vx - ux * vz
                cz = ux * vy - uy * vx
                cross = np.sqrt(cx * cx + cy * cy + cz * cz)
                if cross <= 0.0:
                    cross = tiny
                w = 0.5 * (ux * vx + uy * vy + uz * vz) / cross
                rows[pos], cols[pos], vals[pos] = i, j, w
                rows[pos + m], cols[pos + m], vals[pos + m] = j, i, w
                pos += 1
            pos += m
        return rows, cols, vals

    @njit(cache=True)
    def _fill_cross(m, x, y, z, sign):
        m[0, 0], m[0, 1], m[0, 2] = 0.0, -sign * z, sign * y
        m[1, 0], m[1, 1], m[1, 2] = sign * z, 0.0, -sign * x
        m[2, 0], m[2, 1], m[2, 2] = -sign * y, sign * x, 0.0

    @njit(cache=True)
    def _area_hessian_blocks_jit(verts, tris):
        out = np.zeros((tris.shape[0], 9, 9))
        jac = np.empty((3, 3, 3))
        proj = np.empty((3, 3))
        skew = np.empty((3, 3))
        pj = np.empty((3, 3))
        for t in range(tris.shape[0]):
            a, b, c = tris[t, 0], tris[t, 1], tris[t, 2]
            abx, aby, abz = verts[b, 0] - verts[a, 0], verts[b, 1] - verts[a, 1], verts[b, 2] - verts[a, 2]
            acx, acy, acz = verts[c, 0] - verts[a, 0], verts[c, 1] - verts[a, 1], verts[c, 2] - verts[a, 2]
            nx = aby * acz - abz * acy
            ny = abz * acx - abx * acz
            nz = abx * acy - aby * acx
            norm = np.sqrt(nx * nx + ny * ny + nz * nz)
            if norm == 0.0:
                norm = 1.0
            ux, uy, uz = nx / norm, ny / norm, nz / norm
            _fill_cross(jac[0], acx - abx, acy - aby, acz - abz, 1.0)
            _fill_cross(jac[1], acx, acy, acz, -1.0)
            _fill_cross(jac[2], abx, aby, abz, 1.0)
            _fill_cross(skew, ux, uy, uz, -1.0)
            unit = (ux, uy, uz)
            for i in range(3):
                for j in range(3):
                    proj[i, j] = (1.0 if i == j else 0.0) - unit[i] * unit[j]
            for w in range(3):
                # pj = proj @ jac[w]
                for i in range(3):
                    for j in range(3):
                        pj[i, j] = proj[i, 0] * jac[w, 0, j] + proj[i, 1] * jac[w, 1, j] + proj[i, 2] * jac[w, 2, j]
                for v in range(3):
                    for i in range(3):
                        for j in range(3):
                            val = (jac[v, 0, i] * pj[0, j] + jac[v, 1, i] * pj[1, j] + jac[v, 2, i] * pj[2, j]) / norm
                            if w == (v + 1) % 3:
                                val += skew[i, j]
                            elif v == (w + 1) % 3:
                                val += skew[j, i]
                            out[t, 3 * v + i, 3 * w + j] = 0.5 * val
        return out


def _as_arrays(verts: np.ndarray, tris: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return np.ascontiguousarray(verts, dtype=np.float64), np.ascontiguousarray(tris, dtype=np.int64)


def use_numba() -> bool:
    return HAVE_NUMBA and backend_name() == "numba"


def area_gradient(verts: np.ndarray, tris: np.ndarray) -> np.ndarray:
    verts, tris = _as_arrays(verts, tris)
    if len(tris) == 0:
        return np.zeros_like(verts)
    if use_numba():
        return _area_gradient_jit(verts, tris)
    return area_gradient_numpy(verts, tris)


def cotan_entries(verts: np.ndarray, tris: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    verts, tris = _as_arrays(verts, tris)
    if use_numba() and len(tris):
        return _cotan_entries_jit(verts, tris)
    return cotan_entries_numpy(verts, tris)


def area_hessian_blocks(verts: np.ndarray, tris: np.ndarray) -> np.ndarray:
    verts, tris = _as_arrays(verts, tris)
    if use_numba() and len(tris):
        return _area_hessian_blocks_jit(verts, tris)
    return area_hessian_blocks_numpy(verts, tris)
