"""Time the numba kernels against their numpy counterparts.

    python3 benchmarks/bench_kernels.py [--radial 192] [--repeat 5]

Both backends are called on the same revolved catenoid mesh; results are
checked for agreement before timings are printed.
"""

import argparse
import time

import numpy as np
from scipy import sparse

from fbms import _kernels
from fbms.catenoid import revolve_to_mesh, solve_critical_catenoid

KERNELS = ("area_gradient", "cotan_entries", "area_hessian_blocks")


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def as_array(result, n: int) -> np.ndarray:
    if isinstance(result, tuple):
        # (rows, cols, values) triplets may come in any order; compare the assembled matrix
        rows, cols, vals = result
        return sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    return np.asarray(result)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--radial", type=int, default=96)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    cc = solve_critical_catenoid()
    mesh = revolve_to_mesh(cc.a, cc.h, args.radial, args.radial // 2)
    verts, tris = mesh.vertices, mesh.triangles
    print(f"mesh: {mesh.n_vertices} vertices, {mesh.n_triangles} triangles")
    if not _kernels.HAVE_NUMBA:
        print("numba is not installed; only the numpy backend is available")
        return

    print(f"{'kernel':<22}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}")
    for name in KERNELS:
        slow = getattr(_kernels, f"{name}_numpy")
        fast = getattr(_kernels, f"_{name}_jit")
        v, t = _kernels._as_arrays(verts, tris)
        fast(v, t)  # compile outside the timed region
        diff = as_array(slow(v, t), len(v)) - as_array(fast(v, t), len(v))
        gap = abs(diff).max()
        if gap > 1e-9:
            raise SystemExit(f"{name}: backends disagree by {gap:.2e}")
        t_np = best_of(lambda: slow(v, t), args.repeat)
        t_nb = best_of(lambda: fast(v, t), args.repeat)
        print(f"{name:<22}{1e3 * t_np:>12.2f}{1e3 * t_nb:>12.2f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
