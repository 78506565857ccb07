import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import sparse

from fbms import catenoid, spectra, symmetry
from fbms.mesh import TriMesh


@pytest.fixture(scope="module")
def disc16():
    return catenoid.disc_mesh(0.0, 16)


@pytest.fixture(scope="module")
def catenoid48(critical):
    return catenoid.revolve_to_mesh(critical.a, critical.h, 48, 24)


def test_stiffness_annihilates_constants(coarse_catenoid):
    stiff = spectra.stiffness_matrix(coarse_catenoid)
    assert np.abs(stiff @ np.ones(coarse_catenoid.n_vertices)).max() < 1e-12
    assert abs(stiff - stiff.T).max() < 1e-14


def test_masses_add_up(disc16, critical):
    assert spectra.lumped_mass(disc16).sum() == pytest.approx(math.pi, rel=5e-3)
    assert spectra.boundary_mass(disc16).sum() == pytest.approx(2 * math.pi, rel=5e-3)
    ann = catenoid.revolve_to_mesh(critical.a, critical.h, 64, 32)
    circle = 2 * math.pi * math.sqrt(1 - critical.h ** 2)
    assert spectra.boundary_mass(ann).sum() == pytest.approx(2 * circle, rel=1e-3)


def test_disc_steklov_spectrum(disc16):
    vals = spectra.steklov_spectrum(disc16, 6).eigenvalues
    assert vals[0] == pytest.approx(0.0, abs=1e-10)
    assert np.allclose(vals[1:5], [1, 1, 2, 2], rtol=1e-2)


def test_steklov_constant_is_ground_state(coarse_catenoid):
    rep = spectra.steklov_spectrum(coarse_catenoid, 3)
    assert rep.eigenvalues[0] == pytest.approx(0.0, abs=1e-10)
    ground = rep.eigenvectors[:, 0]
    assert np.ptp(ground) < 1e-8 * np.abs(ground).max()


def test_steklov_coordinates_on_critical_catenoid(catenoid48):
    # the coordinate functions are Steklov eigenfunctions with eigenvalue one
    vals = spectra.steklov_spectrum(catenoid48, 4).eigenvalues
    assert np.allclose(vals[1:4], 1.0, rtol=1e-2)


def test_disc_robin_index_and_constant_rayleigh(disc16):
    rep = spectra.jacobi_spectrum(disc16, "robin", k=5)
    assert rep.index == 1
    assert rep.max_residual < 1e-8
    rq = spectra.variational_rayleigh(disc16, np.ones(disc16.n_vertices))
    # |grad 1|^2 = 0, |A|^2 = 0, boundary term -2 pi over area pi
    assert rq == pytest.approx(-2.0, rel=2e-3)


def test_catenoid_full_and_equivariant_index(catenoid48):
    full = spectra.jacobi_spectrum(catenoid48, "robin", k=8)
    assert full.index == 4
    eq = spectra.jacobi_spectrum(catenoid48, "robin", group=symmetry.octant_group(), k=4)
    assert eq.index == 1
    assert eq.subspace == "equivariant:prismatic"


def test_dirichlet_eigenvalues_dominate_robin(catenoid48):
    robin = spectra.jacobi_spectrum(catenoid48, "robin", k=6).eigenvalues
    dirichlet = spectra.jacobi_spectrum(catenoid48, "dirichlet", k=6).eigenvalues
    assert np.all(dirichlet[:6] >= robin[:6] - 1e-9)


def test_equivariant_eigenpairs_solve_the_full_problem(catenoid48):
    group = symmetry.octant_group()
    rep = spectra.jacobi_spectrum(catenoid48, "robin", group=group, k=4)
    asm = spectra.assemble_jacobi(catenoid48)
    op = asm.operator(robin=True)
    for lam, u in zip(rep.eigenvalues, rep.eigenvectors.T):
        res = op @ u - lam * asm.mass * u
        assert np.linalg.norm(res) / np.linalg.norm(asm.mass * u) < 1e-8 * max(1, abs(lam))


def test_sign_projector_is_an_orthogonal_projection(coarse_catenoid, rng):
    proj = spectra.sign_projector(coarse_catenoid, symmetry.octant_group())
    u = rng.standard_normal(coarse_catenoid.n_vertices)
    assert np.allclose(proj @ (proj @ u), proj @ u, atol=1e-13)
    assert abs(proj - proj.T).max() < 1e-14
    basis, _ = spectra.equivariant_basis(coarse_catenoid, symmetry.octant_group())
    assert np.allclose(proj @ basis.toarray(), basis.toarray(), atol=1e-13)


@given(st.floats(0.1, 100.0), st.integers(0, 2**16))
def test_rayleigh_quotient_is_scale_invariant(small_disc, scale, seed):
    u = np.random.default_rng(seed).standard_normal(small_disc.n_vertices)
    a = spectra.variational_rayleigh(small_disc, u)
    assert spectra.variational_rayleigh(small_disc, scale * u) == pytest.approx(a, rel=1e-10)


def test_rayleigh_lower_bound_is_first_eigenvalue(small_disc, rng):
    lam0 = spectra.jacobi_spectrum(small_disc, "robin", k=3).eigenvalues[0]
    for _ in range(20):
        u = rng.standard_normal(small_disc.n_vertices)
        assert spectra.variational_rayleigh(small_disc, u) >= lam0 - 1e-9


def test_rayleigh_rejects_zero(small_disc):
    with pytest.raises(ValueError):
        spectra.variational_rayleigh(small_disc, np.zeros(small_disc.n_vertices))


@given(st.integers(0, 2**16), st.integers(3, 40))
def test_inertia_counts_negative_eigenvalues(seed, n):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eig = rng.uniform(0.1, 2.0, n) * rng.choice([-1.0, 1.0], n)
    mat = sparse.csr_matrix(q @ np.diag(eig) @ q.T)
    assert spectra.inertia_negative(mat) == int(np.sum(eig < 0))


def test_xperp_residual_decreases_with_resolution(critical):
    coarse = spectra.jacobi_residual_xperp(catenoid.revolve_to_mesh(critical.a, critical.h, 32, 16))
    fine = spectra.jacobi_residual_xperp(catenoid.revolve_to_mesh(critical.a, critical.h, 64, 32))
    assert fine.interior_residual < coarse.interior_residual / 2
    assert fine.boundary_max < 5e-3


def test_census_on_catenoid(coarse_catenoid):
    census = spectra.fundamental_domain_census(coarse_catenoid)
    assert census.applicable
    assert census.euler_characteristic == 1 and census.spherical_arcs == 1
    assert census.identity_holds is None


def test_census_on_flat_disc(small_disc):
    assert not spectra.fundamental_domain_census(small_disc).applicable


def test_parity_law(small_disc, coarse_catenoid):
    assert spectra.boundary_parity_check(coarse_catenoid).passed
    flat = spectra.boundary_parity_check(small_disc)
    assert flat.passed and flat.flat_disc
    tilted = spectra.boundary_parity_check(catenoid.disc_mesh(0.3, 8))
    assert not tilted.passed


def test_steklov_needs_a_boundary():
    v = np.array([[0, 0, 0], [0.3, 0, 0], [0, 0.3, 0], [0, 0, 0.3]], dtype=float)
    closed = TriMesh(v, [[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]], np.zeros(4, dtype=bool))
    with pytest.raises(Exception):
        spectra.steklov_spectrum(closed)


def test_report_serialisation(small_disc):
    rep = spectra.jacobi_spectrum(small_disc, "robin", k=3)
    data = rep.as_dict(samples=2)
    assert data["kind"] == "jacobi-robin" and len(data["eigenvalues"]) == 3
    assert len(data["eigenfunction_samples"][0]) == 2
    assert rep.csv_rows()[0][0] == 0
