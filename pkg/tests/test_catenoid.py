import math
import time

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fbms import catenoid
from fbms.catenoid import ParameterError, OptimalSweepoutSpec
from fbms.mesh import area, topology


def test_critical_parameters_satisfy_both_equations(critical):
    assert critical.s * math.tanh(critical.s) == pytest.approx(1.0, abs=1e-14)
    assert catenoid.balance_F(critical.a, critical.h) == pytest.approx(1.0, abs=1e-13)
    assert critical.a * critical.h == pytest.approx(critical.s, rel=1e-15)


def test_critical_values_against_reference(critical):
    # independent bisection of s tanh s = 1
    lo, hi = 1.0, 1.5
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if mid * math.tanh(mid) < 1 else (lo, mid)
    assert critical.s == pytest.approx(lo, abs=1e-13)
    assert critical.a == pytest.approx(2.17162, abs=1e-4)
    assert critical.h == pytest.approx(0.55243, abs=1e-4)
    assert critical.area / math.pi == pytest.approx(1.6671, abs=5e-4)


def test_solver_is_fast():
    solver = catenoid.solve_critical_catenoid.__wrapped__
    solver()
    t0 = time.perf_counter()
    for _ in range(100):
        solver()
    assert (time.perf_counter() - t0) / 100 < 1e-3


def test_closed_form_matches_quadrature_at_critical(critical):
    quad = catenoid.area_quadrature(critical.a, critical.h)
    assert quad == pytest.approx(catenoid.closed_form_area(critical.s), rel=1e-8)


@given(st.floats(0.05, 6.0))
def test_closed_form_matches_quadrature_on_minimal_branch(s):
    # a member with ah = s meets the sphere orthogonally when h = s / sqrt(cosh^2 s + s^2)
    a = math.sqrt(math.cosh(s) ** 2 + s * s)
    h = s / a
    assert catenoid.area_quadrature(a, h) == pytest.approx(catenoid.closed_form_area(s), rel=1e-8)


@given(st.floats(0.0, 5.0))
def test_closed_form_derivative_matches_finite_difference(s):
    d = 1e-6
    lo = max(s - d, 0.0)
    fd = (catenoid.closed_form_area(s + d) - catenoid.closed_form_area(lo)) / (s + d - lo)
    assert catenoid.closed_form_area_derivative(s) == pytest.approx(fd, rel=1e-4, abs=1e-8)


def test_closed_form_limits():
    assert catenoid.closed_form_area(0.0) == 0.0
    assert catenoid.closed_form_area(400.0) == pytest.approx(2 * math.pi)
    assert all(catenoid.closed_form_area(s) < 2 * math.pi for s in np.linspace(1, 20, 200))


@given(st.floats(0.3, 8.0), st.floats(0.05, 0.95))
def test_mean_curvature_sign_follows_balance(a, h):
    gap = 1.0 - catenoid.balance_F(a, h)
    if abs(gap) < 1e-6:
        return
    z = np.linspace(-h, h, 7)
    assert np.all(np.sign(catenoid.mean_curvature(a, h, z)) == np.sign(gap))


def test_profile_meets_sphere_at_ends():
    a, h = 3.0, 0.4
    assert catenoid.profile(a, h, h) == pytest.approx(math.sqrt(1 - h * h))
    assert catenoid.profile(a, h, -h) == pytest.approx(math.sqrt(1 - h * h))
    with pytest.raises(ParameterError):
        catenoid.profile(a, h, 0.5)


@pytest.mark.parametrize("a, h", [(0.0, 0.5), (1.0, 0.0), (1.0, 1.0), (-2.0, 0.3)])
def test_invalid_parameters_raise(a, h):
    with pytest.raises(ParameterError):
        catenoid.area_quadrature(a, h)


def test_large_scaling_does_not_overflow():
    value = catenoid.area_quadrature(5000.0, 0.6)
    assert np.isfinite(value) and value < 2 * math.pi


def test_optimal_alpha_rules(critical):
    spec = OptimalSweepoutSpec(0.1, 0.02)
    assert catenoid.optimal_alpha(critical.h, spec) == pytest.approx(critical.a, rel=1e-14)
    for h in np.linspace(0.12, 0.99, 20):
        alpha = catenoid.optimal_alpha(h, spec)
        assert alpha * h * math.tanh(alpha * h) == pytest.approx(1.0, abs=1e-12)
    assert catenoid.optimal_alpha(0.05, spec) == pytest.approx(critical.s / 0.1)
    blend = [catenoid.optimal_alpha(h, spec) for h in np.linspace(0.0, 0.2, 201)]
    assert np.all(np.diff(blend) <= 1e-12)


def test_spec_rejects_bad_cutoff(critical):
    with pytest.raises(ParameterError):
        OptimalSweepoutSpec(critical.h, 0.02)
    with pytest.raises(ParameterError):
        OptimalSweepoutSpec(0.1, 0.0)


@pytest.mark.parametrize("h0", [0.05, 0.1, 0.2, 0.3])
def test_sweepout_never_exceeds_critical_area(h0, critical):
    rows = catenoid.sweepout_table(200, OptimalSweepoutSpec(h0, 0.02))
    areas = np.array([r[2] for r in rows])
    assert areas.max() <= critical.area + 1e-6
    hs = np.array([r[0] for r in rows])
    above = hs > h0 + 0.02
    # increasing before h*, decreasing after
    inc = np.diff(areas[above & (hs < critical.h)])
    dec = np.diff(areas[hs > critical.h])
    assert np.all(inc > 0) and np.all(dec < 0)


def test_revolved_mesh_is_an_annulus_with_boundary_on_sphere(critical):
    mesh = catenoid.revolve_to_mesh(critical.a, critical.h, 48, 24)
    topo = topology(mesh)
    assert (topo.genus, topo.boundary_components) == (0, 2)
    radii = np.linalg.norm(mesh.vertices[mesh.boundary_flags], axis=1)
    assert np.allclose(radii, 1.0, atol=1e-12)
    assert area(mesh) == pytest.approx(critical.area, rel=5e-3)


@pytest.mark.parametrize("axis", ["x1", "x2", "x3"])
def test_revolve_axis_choice(axis, critical):
    mesh = catenoid.revolve_to_mesh(critical.a, critical.h, 16, 8, axis=axis)
    k = int(axis[1]) - 1
    assert np.abs(mesh.vertices[:, k]).max() == pytest.approx(critical.h)


def test_disc_mesh_area_converges():
    errors = [abs(area(catenoid.disc_mesh(0.0, r)) - math.pi) for r in (8, 16, 32)]
    assert errors[0] > errors[1] > errors[2]
    assert topology(catenoid.disc_mesh(0.0, 8)).boundary_components == 1
