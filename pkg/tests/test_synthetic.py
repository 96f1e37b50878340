from dataclasses import replace

import numpy as np
import pytest

from meshsizer.mesh import MeshError, inverted_elements
from meshsizer.nurbs import build_aerofoil
from meshsizer.synthetic import (SyntheticCase, aerofoil_background, analytic_pressure,
                                 background_for, first_layer_height, flow_family_case,
                                 layer_offsets, loop_normals, synthesize_case)


def test_first_layer_height():
    h1 = first_layer_height(6.5e6)
    assert h1 == pytest.approx(np.exp(-0.75 * np.log(6.5e6)), rel=1e-14)
    # the quoted 7.775e-6 is a rounded figure; the power law gives 7.768e-6
    assert h1 == pytest.approx(7.775e-6, rel=1e-3)
    assert first_layer_height(6.5e6, 2.0) == 2.0 * 6.5e6 ** -0.75


def test_geometric_layers():
    off = layer_offsets(1e-5, 1.2, 4)
    assert np.diff(off)[2] == pytest.approx(1.44e-5, rel=1e-14)
    with pytest.raises(MeshError):
        layer_offsets(1e-5, 1.0, 3)
    with pytest.raises(MeshError):
        layer_offsets(0.0, 1.2, 3)


def test_columns_follow_growth(small_case):
    mesh, _ = synthesize_case(small_case)
    h1 = first_layer_height(small_case.reynolds, small_case.c_height)
    for col in mesh.wall_columns:
        d = np.linalg.norm(np.diff(mesh.nodes[col], axis=0), axis=1)
        assert d[0] == pytest.approx(h1, rel=1e-9)
        np.testing.assert_allclose(d[1:] / d[:-1], small_case.growth, rtol=1e-9)


def test_zero_shock_amplitude_gives_base_pressure(small_case):
    case = replace(small_case, shock_amp=0.0)
    mesh, fields = synthesize_case(case)
    col_top = np.array([c[-1] for c in mesh.wall_columns])
    base = analytic_pressure(case, mesh.nodes, with_shock=False)
    outer = np.ones(mesh.n_nodes, bool)
    for c in mesh.wall_columns:
        outer[c[:-1]] = False
    assert np.array_equal(fields["pressure"].values[outer], base[outer])
    assert np.array_equal(fields["pressure"].values[col_top], base[col_top])


def test_pressure_constant_across_layer(hybrid):
    mesh, fields = hybrid
    p = fields["pressure"].values
    for col in mesh.wall_columns:
        assert np.all(p[col] == p[col[-1]])


def test_descriptor_errors():
    with pytest.raises(MeshError):
        synthesize_case(SyntheticCase(n_wall=20, n_layers=3, n_rings=5, growth=0.9))
    with pytest.raises(ValueError):
        synthesize_case(SyntheticCase(body="cylinder"))
    with pytest.raises(ValueError):
        background_for(SyntheticCase(n_wall=30), 20)


def test_case_json():
    c = SyntheticCase(body="none", box=(0.0, -1.0, 2.0, 1.0))
    assert SyntheticCase.from_dict(c.to_dict()) == c


def test_flow_family_trends():
    a = flow_family_case(0.5, 1.0)
    b = flow_family_case(0.8, 1.0)
    assert b.shock_x > a.shock_x and b.shock_amp > a.shock_amp
    assert flow_family_case(0.6, 2.5).alpha_deg == 2.5


def test_background_coincides_with_computational_nodes():
    case = SyntheticCase(n_wall=100, n_layers=5, n_rings=10)
    mesh, _ = synthesize_case(case)
    bg = background_for(case, 50, 10)
    wall = bg.nodes[np.unique(bg.boundary["wall"])]
    d = np.min(np.linalg.norm(wall[:, None] - mesh.nodes[None], axis=2), axis=1)
    assert d.max() < 1e-12


def test_aerofoil_background_counts():
    bg = aerofoil_background(build_aerofoil(), 25, 20)
    assert bg.n_nodes == 1100 and bg.n_quads == 0
    assert len(np.unique(bg.boundary["wall"])) == 50
    assert len(inverted_elements(bg)) == 0


def test_loop_normals_square():
    sq = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    n = loop_normals(sq)
    np.testing.assert_allclose(n[0], [-1 / np.sqrt(2), -1 / np.sqrt(2)], atol=1e-15)
    np.testing.assert_allclose(n[2], [1 / np.sqrt(2), 1 / np.sqrt(2)], atol=1e-15)
