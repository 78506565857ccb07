import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fbms import catenoid, symmetry
from fbms.symmetry import SymmetryError


def all_cases():
    for name in symmetry.CATALOG:
        if name in symmetry.AXIAL:
            for n in (2, 3, 4, 5):
                yield name, n
        else:
            yield name, None


CASES = list(all_cases())


@pytest.mark.parametrize("name, n", CASES)
def test_group_axioms_and_order(name, n):
    group = symmetry.group_from_catalog(name, n)
    assert group.order == symmetry.expected_order(name, n)
    assert symmetry.axiom_defect(group) <= 1e-12
    assert np.allclose(group.elements[0], np.eye(3))


@pytest.mark.parametrize("name, n", [c for c in CASES if c[0] not in ("chiro-icosahedral", "icosahedral")])
def test_singular_locus_matches_table(name, n):
    group = symmetry.group_from_catalog(name, n)
    assert symmetry.locus_signature(symmetry.singular_locus(group)) == symmetry.table_signature(name, n)


@pytest.mark.parametrize("name", ["chiro-icosahedral", "icosahedral"])
def test_fivefold_axes_match_icosahedron_vertices(name):
    # independent oracle: the 12 icosahedron vertices pair into 6 axes
    phi = (1 + 5 ** 0.5) / 2
    verts = []
    for a, b in itertools.product((1, -1), repeat=2):
        verts += [(0, a, b * phi), (a, b * phi, 0), (b * phi, 0, a)]
    verts = np.array(verts, dtype=float)
    verts /= np.linalg.norm(verts, axis=1)[:, None]
    axes = {tuple(np.round(v if v[np.flatnonzero(np.abs(v) > 1e-9)[0]] > 0 else -v, 8)) for v in verts}
    group = symmetry.group_from_catalog(name, None)
    sig = symmetry.locus_signature(symmetry.singular_locus(group))
    fivefold = sum(c for k, c in sig.items() if k.endswith("55"))
    assert fivefold == len(axes) == 6


@pytest.mark.parametrize("name", symmetry.AXIAL)
def test_axial_families_need_n(name):
    with pytest.raises(SymmetryError):
        symmetry.group_from_catalog(name, None)
    with pytest.raises(SymmetryError):
        symmetry.group_from_catalog(name, 0)


def test_unknown_family():
    with pytest.raises(SymmetryError):
        symmetry.group_from_catalog("hexagonal", 6)


def test_octant_group_is_diagonal_signs():
    group = symmetry.octant_group()
    diagonals = {tuple(np.diag(m).astype(int)) for m in group.elements}
    assert diagonals == set(symmetry.octant_sign_patterns())
    assert all(np.count_nonzero(m - np.diag(np.diag(m))) == 0 for m in group.elements)


@given(st.lists(st.floats(-1, 1), min_size=3, max_size=3))
def test_isotropy_of_generic_point_is_trivial(p):
    group = symmetry.octant_group()
    point = np.array(p)
    stab = symmetry.isotropy(group, point)
    expected = 2 ** int(np.sum(np.abs(point) <= symmetry.FIXED_POINT_TOL))
    assert len(stab) == expected


def test_catenoid_sign_characters(critical):
    mesh = symmetry.attach_symmetry(catenoid.revolve_to_mesh(critical.a, critical.h, 16, 8), symmetry.octant_group())
    signs = symmetry.sign_characters(mesh)
    # every element maps the outward normal of a surface of revolution to itself
    assert np.all(signs == 1)


def test_disc_mirror_flips_normal(small_disc):
    mirror = np.diag([1.0, 1.0, -1.0])
    assert symmetry.sign_character(mirror, small_disc) == -1
    assert symmetry.sign_character(np.diag([-1.0, 1.0, 1.0]), small_disc) == 1


def test_projection_restores_symmetry(critical, rng):
    group = symmetry.octant_group()
    mesh = symmetry.attach_symmetry(catenoid.revolve_to_mesh(critical.a, critical.h, 16, 8), group)
    noisy = mesh.with_vertices(mesh.vertices + 1e-3 * rng.standard_normal(mesh.vertices.shape))
    assert symmetry.equivariance_deviation(noisy, group) > 1e-4
    fixed = symmetry.project_equivariant(noisy)
    assert symmetry.equivariance_deviation(fixed, group) < 1e-12
    again = symmetry.project_equivariant(fixed)
    assert np.allclose(again.vertices, fixed.vertices, atol=1e-14)


def test_attach_rejects_asymmetric_mesh(critical):
    mesh = catenoid.revolve_to_mesh(critical.a, critical.h, 16, 8)
    shifted = mesh.with_vertices(mesh.vertices + np.array([0.01, 0, 0]))
    with pytest.raises(SymmetryError):
        symmetry.attach_symmetry(shifted, symmetry.octant_group())


def test_group_json_roundtrip():
    group = symmetry.group_from_catalog("prismatic", 3)
    data = group.to_dict()
    assert data["catalog_name"] == "prismatic" and data["n"] == 3
    assert len(data["elements"]) == 12
