import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import sparse

from fbms import _kernels, catenoid

pytestmark = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba not installed")


def random_mesh(seed):
    rng = np.random.default_rng(seed)
    cc = catenoid.solve_critical_catenoid()
    mesh = catenoid.revolve_to_mesh(cc.a, cc.h, 12, 8)
    return mesh.vertices + 0.01 * rng.standard_normal(mesh.vertices.shape), mesh.triangles


@given(st.integers(0, 2**16))
def test_backends_agree(seed):
    v, t = _kernels._as_arrays(*random_mesh(seed))
    assert np.allclose(_kernels._area_gradient_jit(v, t), _kernels.area_gradient_numpy(v, t), atol=1e-13)
    assert np.allclose(_kernels._area_hessian_blocks_jit(v, t), _kernels.area_hessian_blocks_numpy(v, t), atol=1e-10)
    n = len(v)
    jr, jc, jv = _kernels._cotan_entries_jit(v, t)
    nr, nc, nv = _kernels.cotan_entries_numpy(v, t)
    jm = sparse.coo_matrix((jv, (jr, jc)), shape=(n, n)).tocsr()
    nm = sparse.coo_matrix((nv, (nr, nc)), shape=(n, n)).tocsr()
    assert abs(jm - nm).max() < 1e-12


@pytest.mark.parametrize("backend, expected", [("numpy", False), ("numba", True), ("off", False)])
def test_environment_switch(monkeypatch, backend, expected):
    monkeypatch.setenv("FBMS_BACKEND", backend)
    assert _kernels.use_numba() is expected


def test_dispatch_uses_numpy_when_requested(monkeypatch):
    v, t = _kernels._as_arrays(*random_mesh(0))
    monkeypatch.setenv("FBMS_BACKEND", "numpy")
    slow = _kernels.area_gradient(v, t)
    monkeypatch.setenv("FBMS_BACKEND", "numba")
    fast = _kernels.area_gradient(v, t)
    assert np.allclose(slow, fast, atol=1e-13)
