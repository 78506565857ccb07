import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fbms import catenoid, sweepout
from fbms.acceptance import axis_distance
from fbms.config import RunConfig
from fbms.mesh import area, topology, validate
from fbms.sweepout import SweepoutError, SweepoutParams

PARAMS = SweepoutParams(columns=8, rows=8, ribbon_columns=4, radial=32, axial=16)


@given(st.floats(0.0, 1.0))
def test_beta_starts_at_alpha(t):
    assert PARAMS.beta(0.0, t) == pytest.approx(PARAMS.alpha(t), rel=1e-12)


@given(st.floats(0.0, 0.98), st.floats(0.0, 1.0))
def test_beta_is_monotone_and_capped(s, t):
    assert PARAMS.beta(s, t) <= PARAMS.beta(min(s + 0.01, 1.0), t) + 1e-12
    assert PARAMS.beta(s, t) <= PARAMS.beta_max


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_ribbon_width_vanishes_at_edges(s, t):
    assert PARAMS.eps(0.0, t) == 0.0
    assert PARAMS.eps(s, 1.0) == 0.0
    assert 0.0 <= PARAMS.eps(s, t) <= PARAMS.eps0


def test_params_reject_bad_values():
    with pytest.raises(SweepoutError):
        SweepoutParams(t0=0.05, eps0=0.1)
    with pytest.raises(SweepoutError):
        SweepoutParams(columns=1)


@pytest.mark.parametrize("s, t", [(0.3, 0.5), (0.7, 0.2), (0.5, 0.9), (0.9, 0.05)])
def test_interior_slices_have_genus_one(s, t):
    mesh = sweepout.sweepout_slice(s, t, PARAMS)
    topo = topology(mesh)
    assert (topo.genus, topo.boundary_components) == (1, 2)
    validate(mesh)
    assert area(mesh) < 2 * math.pi - 0.05


@pytest.mark.parametrize("s", [0.0, 0.4, 1.0])
def test_t_edges_are_empty(s):
    for t in (0.0, 1.0):
        assert sweepout.sweepout_slice(s, t, PARAMS).n_triangles == 0


def test_s0_edge_is_the_optimal_catenoid():
    t = 0.4
    mesh = sweepout.build_edge_slice("s0", t, PARAMS)
    assert (topology(mesh).genus, topology(mesh).boundary_components) == (0, 2)
    assert area(mesh) == pytest.approx(catenoid.sweepout_area(t, PARAMS.alpha_spec), rel=2e-2)
    assert axis_distance(mesh, 0) < 1e-3 and axis_distance(mesh, 1) < 1e-3
    assert axis_distance(mesh, 2) > 0.1


def test_s1_edge_axis_incidence():
    mesh = sweepout.build_edge_slice("s1", 0.5, PARAMS)
    assert (topology(mesh).genus, topology(mesh).boundary_components) == (0, 2)
    assert axis_distance(mesh, 0) < 1e-3 and axis_distance(mesh, 2) < 1e-3
    assert axis_distance(mesh, 1) > 1e-3


def test_axis_distance_oracle():
    # a single triangle hovering over the x3-axis at distance 0.3 in x1
    from fbms.mesh import TriMesh

    tri = TriMesh([[0.3, -0.1, 0.0], [0.3, 0.1, 0.0], [0.3, 0.0, 0.2]], [[0, 1, 2]], [False] * 3)
    assert axis_distance(tri, 2) == pytest.approx(0.3)
    assert axis_distance(tri, 0) == 0.0


def test_volume_fraction_limits():
    assert sweepout.volume_fraction(sweepout.sweepout_slice(0.3, 0.0, PARAMS), 0.0) == 1.0
    assert sweepout.volume_fraction(sweepout.sweepout_slice(0.3, 1.0, PARAMS), 1.0) == 0.0
    mid = sweepout.volume_fraction(sweepout.sweepout_slice(0.0, 0.5, PARAMS), 0.5)
    assert 0.0 < mid < 1.0


def test_monotone_paths_are_deterministic():
    a = sweepout.monotone_paths(5, seed=3)
    b = sweepout.monotone_paths(5, seed=3)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    for gamma in a:
        assert gamma[0, 1] == 0.0 and gamma[-1, 1] == 1.0
        assert np.all(np.diff(gamma[:, 1]) >= 0)


def test_path_scan_rejects_bad_paths():
    with pytest.raises(SweepoutError):
        sweepout.path_scan(np.array([[0.0, 0.1], [0.0, 1.0]]), PARAMS)
    with pytest.raises(SweepoutError):
        sweepout.path_scan(np.array([[0.0, 0.0], [0.2, 0.6], [0.3, 0.4], [0.0, 1.0]]), PARAMS)


def test_vertical_path_half_volume():
    scan = sweepout.path_scan(np.array([[0.0, 0.0], [0.0, 1.0]]), PARAMS, samples=12)
    assert abs(scan.half_volume_fraction - 0.5) <= 1e-4
    assert scan.half_volume_area >= 0.98 * math.pi


def test_fast_grid_scan_bounds():
    grid = sweepout.scan_grid(SweepoutParams.from_config(RunConfig(tier="fast")), 8, 8)
    assert grid.max_area < 2 * math.pi - 0.05
    assert grid.max_area > catenoid.solve_critical_catenoid().area
    assert np.all(grid.areas[:, [0, -1]] == 0.0)
    assert grid.summary()["below_two_pi"]
    with pytest.raises(SweepoutError):
        sweepout.scan_grid(PARAMS, 4, 8)
