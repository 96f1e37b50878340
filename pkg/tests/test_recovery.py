import numpy as np
import pytest
from hypothesis import given, strategies as st

from meshsizer.mesh import NodalField, make_mesh, node_patches
from meshsizer.recovery import RecoveryError, RecoveryStrategy, recover_gradient, recover_hessian
from meshsizer.synthetic import box_mesh

STRATEGIES = list(RecoveryStrategy)


def test_default_strategy():
    from meshsizer.recovery import DEFAULT_STRATEGY
    assert DEFAULT_STRATEGY is RecoveryStrategy.FE_SPLIT


@pytest.mark.parametrize("strategy", STRATEGIES)
def test_linear_field_exact_on_hybrid(strategy, hybrid, jittered_hybrid):
    rng = np.random.default_rng(2)
    # the O-grid's first layer is ~1e-5 thick, so rounding of the nodal
    # values alone costs ~1e-16 / 1e-5 in the gradient there
    for mesh, tol in ((jittered_hybrid, 1e-12), (hybrid[0], 1e-8)):
        g = rng.normal(size=2)
        s = mesh.nodes @ g + 0.7
        grad = recover_gradient(mesh, NodalField(s), strategy)
        np.testing.assert_allclose(grad, np.broadcast_to(g, grad.shape), rtol=tol,
                                   atol=tol * np.abs(g).max())


@pytest.mark.parametrize("strategy", STRATEGIES)
def test_constant_and_linear_hessian(strategy, jittered_hybrid):
    m = jittered_hybrid
    assert np.abs(recover_gradient(m, np.full(m.n_nodes, 3.0), strategy)).max() < 1e-13
    h = recover_hessian(m, 2 * m.nodes[:, 0] + 3 * m.nodes[:, 1], strategy)
    assert np.abs(h).max() < 1e-12


def _p1_oracle(mesh, s, node):
    """Area-weighted mean of per-triangle linear-interpolant gradients over the patch."""
    num, den = np.zeros(2), 0.0
    for e in node_patches(mesh)[node]:
        t = mesh.element(e)
        a = np.c_[np.ones(3), mesh.nodes[t]]
        coef = np.linalg.solve(a, s[t])
        area = 0.5 * abs(np.linalg.det(a))
        num += area * coef[1:]
        den += area
    return num / den


def test_x_squared_gradient_on_six_triangle_patch():
    g = box_mesh((0, 0, 1, 1), 8, 8)
    s = g.nodes[:, 0] ** 2
    grad = recover_gradient(g, s, "fe_split")
    for node in (3 * 9 + 4, 5 * 9 + 2, 4 * 9 + 6):
        assert len(node_patches(g)[node]) == 6
        oracle = _p1_oracle(g, s, node)
        np.testing.assert_allclose(grad[node], oracle, atol=1e-12)
        assert grad[node][0] == pytest.approx(2 * g.nodes[node, 0], abs=1e-10)
        assert grad[node][1] == pytest.approx(0.0, abs=1e-10)


def _interior(mesh, n, layers=2):
    i = np.rint(mesh.nodes[:, 0] * n).astype(int)
    j = np.rint(mesh.nodes[:, 1] * n).astype(int)
    return (i >= layers) & (i <= n - layers) & (j >= layers) & (j <= n - layers)


@pytest.mark.parametrize("field,expected", [
    (lambda x, y: x ** 2, [[2, 0], [0, 0]]),
    (lambda x, y: x * y, [[0, 1], [1, 0]]),
    (lambda x, y: y ** 2, [[0, 0], [0, 2]]),
])
def test_fe_split_hessian_of_quadratics(grid20, field, expected):
    x, y = grid20.nodes.T
    h = recover_hessian(grid20, field(x, y), "fe_split")
    inner = _interior(grid20, 20)
    assert inner.sum() == 17 * 17
    np.testing.assert_allclose(h[inner], np.broadcast_to(expected, (inner.sum(), 2, 2)), atol=1e-8)


def test_hessian_symmetric(hybrid):
    mesh, fields = hybrid
    for st_ in STRATEGIES:
        h = recover_hessian(mesh, fields["mach"], st_)
        assert np.array_equal(h, np.swapaxes(h, 1, 2))
        assert np.all(np.isfinite(h))


def test_stacked_fields(jittered_hybrid):
    m = jittered_hybrid
    a, b = m.nodes[:, 0] ** 2, np.sin(m.nodes[:, 1])
    both = recover_gradient(m, np.stack([a, b], 1), "fv_dual")
    np.testing.assert_allclose(both[:, :, 0], recover_gradient(m, a, "fv_dual"), atol=1e-15)
    np.testing.assert_allclose(both[:, :, 1], recover_gradient(m, b, "fv_dual"), atol=1e-15)


def test_fv_dual_ignores_free_nodes():
    m = make_mesh([[0, 0], [1, 0], [0, 1], [5, 5]], [[0, 1, 2]])
    g = recover_gradient(m, np.array([0.0, 1.0, 2.0, 9.0]), "fv_dual")
    np.testing.assert_allclose(g[:3], [[1, 2]] * 3, atol=1e-14)
    assert np.array_equal(g[3], [0.0, 0.0])


def test_wrong_length_and_unknown_strategy(grid20):
    with pytest.raises((RecoveryError, ValueError)):
        recover_gradient(grid20, np.zeros(3))
    with pytest.raises(ValueError):
        recover_gradient(grid20, np.zeros(grid20.n_nodes), "lsq")


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-5, 5), st.sampled_from(STRATEGIES))
def test_linear_exactness_property(a, b, c, strategy):
    m = box_mesh((0, 0, 2, 1), 6, 4)
    grad = recover_gradient(m, a * m.nodes[:, 0] + b * m.nodes[:, 1] + c, strategy)
    np.testing.assert_allclose(grad, np.broadcast_to([a, b], grad.shape), atol=1e-11)
