import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fbms import catenoid, symmetry
from fbms.mesh import area, topology
from fbms.minimizer import (
    FlowOptions, ReducedCoordinates, area_gradient, area_hessian, boundary_orthogonality_residual,
    minimize, raw_area_gradient, triangle_quality,
)


def perturbed_disc(rng, scale=0.02, rings=8):
    disc = catenoid.disc_mesh(0.0, rings)
    v = disc.vertices.copy()
    inner = ~disc.boundary_flags
    v[inner, 2] += scale * rng.standard_normal(inner.sum())
    return disc.with_vertices(v)


def test_gradient_matches_finite_differences(rng):
    mesh = perturbed_disc(rng)
    grad = raw_area_gradient(mesh)
    d = 1e-6
    for _ in range(10):
        k, axis = rng.integers(mesh.n_vertices), rng.integers(3)
        v = mesh.vertices.copy()
        v[k, axis] += d
        up = area(mesh.with_vertices(v))
        v[k, axis] -= 2 * d
        down = area(mesh.with_vertices(v))
        assert grad[k, axis] == pytest.approx((up - down) / (2 * d), abs=1e-8)


def test_hessian_matches_gradient_differences(rng):
    mesh = perturbed_disc(rng)
    hess = area_hessian(mesh)
    direction = rng.standard_normal(mesh.vertices.shape)
    d = 1e-6
    plus = raw_area_gradient(mesh.with_vertices(mesh.vertices + d * direction))
    minus = raw_area_gradient(mesh.with_vertices(mesh.vertices - d * direction))
    fd = ((plus - minus) / (2 * d)).ravel()
    assert np.allclose(hess @ direction.ravel(), fd, atol=1e-6)
    assert abs(hess - hess.T).max() < 1e-12


def test_boundary_gradient_is_tangent_to_sphere(rng):
    mesh = perturbed_disc(rng)
    grad = area_gradient(mesh)
    flags = mesh.boundary_flags
    radial = np.einsum("ij,ij->i", grad[flags], mesh.vertices[flags])
    assert np.abs(radial).max() < 1e-14


@given(st.integers(0, 2**16))
def test_reduced_coordinates_respect_the_group(seed):
    rng = np.random.default_rng(seed)
    cc = catenoid.solve_critical_catenoid()
    mesh = symmetry.attach_symmetry(catenoid.revolve_to_mesh(cc.a, cc.h, 16, 8), symmetry.octant_group())
    red = ReducedCoordinates(mesh)
    move = red.expand(rng.standard_normal(red.size))
    for k, g in enumerate(mesh.group.elements):
        assert np.allclose(move[mesh.perm[k]], move @ g.T, atol=1e-12)
    flags = mesh.boundary_flags
    assert np.abs(np.einsum("ij,ij->i", move[flags], mesh.vertices[flags])).max() < 1e-12


def test_options_validation():
    with pytest.raises(ValueError):
        FlowOptions(gradient_tolerance=0.0)
    with pytest.raises(ValueError):
        FlowOptions(method="sgd")
    with pytest.raises(ValueError):
        FlowOptions(max_iterations=0)


@pytest.mark.parametrize("method", ["descent", "newton"])
def test_perturbed_disc_flows_back_to_flat(method, rng):
    mesh = perturbed_disc(rng, rings=8)
    final, report = minimize(mesh, FlowOptions(method=method, max_iterations=400, gradient_tolerance=1e-6))
    assert report.converged, report.stop_reason
    assert np.all(np.diff(report.area_history) <= 1e-12)
    assert np.abs(final.vertices[:, 2]).max() < 1e-4
    assert topology(final) == topology(mesh)
    assert np.allclose(np.linalg.norm(final.vertices[final.boundary_flags], axis=1), 1.0, atol=1e-12)
    assert report.final_area == pytest.approx(area(catenoid.disc_mesh(0.0, 8)), rel=1e-6)


def test_exact_catenoid_is_nearly_critical(critical):
    mesh = catenoid.revolve_to_mesh(critical.a, critical.h, 96, 48)
    assert boundary_orthogonality_residual(mesh) < 5e-3
    final, report = minimize(mesh, FlowOptions(method="newton", max_iterations=30))
    assert report.converged
    assert report.final_area / math.pi == pytest.approx(critical.area / math.pi, rel=5e-3)
    assert report.boundary_orthogonality_residual < 0.01


def test_tilted_plane_has_large_orthogonality_residual():
    disc = catenoid.disc_mesh(0.5, 12)
    assert boundary_orthogonality_residual(disc) == pytest.approx(math.asin(0.5), abs=1e-6)


def test_quality_of_equilateral_triangle():
    from fbms.mesh import TriMesh

    tri = TriMesh([[0, 0, 0], [0.1, 0, 0], [0.05, 0.05 * math.sqrt(3), 0]], [[0, 1, 2]], [False] * 3)
    assert triangle_quality(tri)[0] == pytest.approx(1.0)
