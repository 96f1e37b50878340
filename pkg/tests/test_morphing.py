import time

import numpy as np
import pytest

from meshsizer.mesh import make_mesh
from meshsizer.morphing import (ElasticityConfig, MorphError, WallParametrization, morph_background,
                                recover_wall_params, solve_displacement, stiffness_matrix,
                                wall_positions)
from meshsizer.nurbs import NurbsCurve, build_aerofoil, eval_curve
from meshsizer.synthetic import aerofoil_background, box_mesh


@pytest.fixture(scope="module")
def ref():
    geom = build_aerofoil()
    bg = aerofoil_background(geom, 25, 20)
    return geom, bg, recover_wall_params(bg, geom)


def _same_topology(a, b):
    assert np.array_equal(a.triangles, b.triangles)
    assert np.array_equal(a.quads, b.quads)
    assert a.boundary.keys() == b.boundary.keys()
    for k in a.boundary:
        assert np.array_equal(a.boundary[k], b.boundary[k])
    assert len(a.wall_columns) == len(b.wall_columns)
    for c, d in zip(a.wall_columns, b.wall_columns):
        assert np.array_equal(c, d)


def test_identity_morph(ref):
    geom, bg, wall = ref
    out = morph_background(bg, wall, geom)
    assert np.abs(out.nodes - bg.nodes).max() < 1e-10
    _same_topology(bg, out)


def test_affine_patch_box():
    mesh = box_mesh((0, 0, 1, 1), 12, 9)
    A = np.array([[0.02, -0.01], [0.015, 0.03]])
    b = np.array([0.1, -0.05])
    bnd = np.unique(mesh.boundary["farfield"])
    u = solve_displacement(mesh, bnd, mesh.nodes[bnd] @ A.T + b)
    np.testing.assert_allclose(u, mesh.nodes @ A.T + b, atol=1e-8, rtol=0)


def test_affine_patch_hybrid(hybrid):
    mesh, _ = hybrid
    A = np.array([[0.01, 0.02], [-0.03, 0.005]])
    b = np.array([-0.2, 0.3])
    bnd = np.unique(np.concatenate([mesh.boundary["wall"].ravel(), mesh.boundary["farfield"].ravel()]))
    u = solve_displacement(mesh, bnd, mesh.nodes[bnd] @ A.T + b, ElasticityConfig(2.0, 0.45))
    np.testing.assert_allclose(u, mesh.nodes @ A.T + b, atol=1e-8, rtol=0)


def test_stiffness_symmetric_with_rigid_modes():
    mesh = box_mesh((0, 0, 1, 1), 5, 4)
    K = stiffness_matrix(mesh).toarray()
    np.testing.assert_allclose(K, K.T, atol=1e-12)
    x, y = mesh.nodes.T
    for mode in (np.stack([np.ones_like(x), 0 * x], 1), np.stack([0 * x, np.ones_like(x)], 1),
                 np.stack([-y, x], 1)):
        assert np.abs(K @ mode.ravel()).max() < 1e-12


def test_wall_params_round_trip_point():
    geom = build_aerofoil()
    bg = aerofoil_background(geom, 8, 4)
    p = eval_curve(geom.upper, 0.3)
    nodes = bg.nodes.copy()
    nodes[3] = p
    bg = bg.with_nodes(nodes)
    wall = recover_wall_params(bg, geom)
    k = int(np.flatnonzero(wall.nodes == 3)[0])
    assert wall.curve[k] == 0
    assert wall.lam[k] == pytest.approx(0.3, abs=1e-10)
    assert wall.residual[k] < 1e-10


def test_wall_params_edges_and_monotone(ref):
    geom, bg, wall = ref
    assert len(wall.nodes) == 50
    lam = dict(zip(wall.nodes.tolist(), wall.lam))
    cur = dict(zip(wall.nodes.tolist(), wall.curve))
    # node 0 trailing edge, node 25 leading edge; ties go to the upper curve
    assert cur[0] == 0 and lam[0] == pytest.approx(1.0, abs=1e-12)
    assert cur[25] == 0 and lam[25] == pytest.approx(0.0, abs=1e-12)
    up = np.array([lam[i] for i in range(26)])
    lo = np.array([lam[i] for i in range(26, 50)])
    assert np.all(np.diff(up) < 0)
    assert np.all(np.diff(lo) > 0)
    assert all(cur[i] == 1 for i in range(26, 50))
    assert np.all(wall.residual < 1e-8)


def test_wall_mismatch_raises(ref):
    geom, bg, _ = ref
    nodes = bg.nodes.copy()
    nodes[10] += [0.0, 1e-3]
    with pytest.raises(MorphError, match="wall node 10"):
        recover_wall_params(bg.with_nodes(nodes), geom)


def test_theta_perturbation(ref):
    geom, bg, wall = ref
    new = build_aerofoil(theta=1.05)
    out = morph_background(bg, wall, new)
    _same_topology(bg, out)
    u = np.linalg.norm(out.nodes - bg.nodes, axis=1)
    is_wall = np.zeros(bg.n_nodes, bool)
    is_wall[wall.nodes] = True
    assert u[is_wall].max() > 0
    assert u[~is_wall].max() <= u[is_wall].max()
    far = np.unique(bg.boundary["farfield"])
    assert np.array_equal(out.nodes[far], bg.nodes[far])
    err = np.linalg.norm(out.nodes[wall.nodes] - wall_positions(wall, new), axis=1)
    assert err.max() < 1e-8


def test_runtime_thousand_nodes(ref):
    geom, bg, wall = ref
    assert 900 <= bg.n_nodes <= 1200
    new = build_aerofoil(theta=1.3)
    t = time.perf_counter()
    morph_background(bg, wall, new)
    assert time.perf_counter() - t < 10.0


def test_inverted_output_is_logged(caplog):
    mesh = make_mesh([[0, 0], [1, 0], [0, 1], [1, 1], [0.4, 0.4]],
                     [[0, 1, 4], [1, 3, 4], [3, 2, 4], [2, 0, 4]],
                     boundary={"wall": [[4, 4]], "farfield": [[0, 1], [1, 3], [3, 2], [2, 0]]})
    # wall node pushed outside the square: the displacement is imposed, not rejected
    wall = WallParametrization(np.array([4]), np.array([0]), np.array([0.0]), np.array([0.0]))

    class G:
        @staticmethod
        def curve(name):
            return NurbsCurve(1, [0, 0, 1, 1], [[1.5, 0.5], [1.6, 0.5]])

    with caplog.at_level("WARNING"):
        out = morph_background(mesh, wall, G())
    np.testing.assert_array_equal(out.nodes[4], [1.5, 0.5])
    assert "inverted" in caplog.text


def test_config_validation_and_json(ref):
    with pytest.raises(ValueError):
        ElasticityConfig(poisson=0.5)
    with pytest.raises(ValueError):
        ElasticityConfig(young=0.0)
    _, _, wall = ref
    back = WallParametrization.from_dict(wall.to_dict())
    assert np.array_equal(back.lam, wall.lam) and np.array_equal(back.curve, wall.curve)
