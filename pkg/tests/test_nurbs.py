import numpy as np
import pytest
from hypothesis import given, strategies as st

from meshsizer.nurbs import (BASE_LOWER, BASE_UPPER, NurbsCurve, aerofoil_parameter_bounds,
                             build_aerofoil, clamped_uniform_knots, eval_basis, eval_curve,
                             invert_point, load_geometry, save_geometry)


def _cubic(cps, weights=None):
    return NurbsCurve(3, clamped_uniform_knots(len(cps), 3), cps, weights)


def test_degree_zero_indicator():
    c = NurbsCurve(0, [0.0, 0.5, 1.0], [[0, 0], [1, 0]])
    np.testing.assert_array_equal(eval_basis(c, 0.25), [1.0, 0.0])
    np.testing.assert_array_equal(eval_basis(c, 0.75), [0.0, 1.0])
    np.testing.assert_array_equal(eval_basis(c, 1.0), [0.0, 1.0])


def test_quadratic_hand_values():
    c = NurbsCurve(2, [0, 0, 0, 0.5, 1, 1, 1], [[0, 0], [1, 0], [2, 0], [3, 0]])
    np.testing.assert_allclose(eval_basis(c, 0.25), [0.25, 0.625, 0.125, 0.0], atol=1e-15)


def test_partition_of_unity_1000_parameters():
    rng = np.random.default_rng(0)
    lam = rng.uniform(0, 1, 1000)
    for curve in (build_aerofoil().upper, build_aerofoil().lower,
                  _cubic(rng.normal(size=(11, 2)), rng.uniform(0.2, 3, 11))):
        assert np.abs(eval_basis(curve, lam).sum(axis=1) - 1).max() < 1e-12
        assert np.all(eval_basis(curve, lam) >= 0)


def test_endpoints_and_tangents():
    rng = np.random.default_rng(1)
    for _ in range(20):
        cps = rng.normal(size=(rng.integers(4, 10), 2))
        c = _cubic(cps, rng.uniform(0.5, 2.0, len(cps)))
        # rational weights divide out to within rounding
        np.testing.assert_allclose(eval_curve(c, 0.0), cps[0], rtol=0, atol=1e-14)
        np.testing.assert_allclose(eval_curve(c, 1.0), cps[-1], rtol=0, atol=1e-14)
        for t, a, b in ((eval_curve(c, 0.0, 1), cps[0], cps[1]), (eval_curve(c, 1.0, 1), cps[-2], cps[-1])):
            u = b - a
            assert abs(t[0] * u[1] - t[1] * u[0]) <= 1e-12 * np.linalg.norm(t) * np.linalg.norm(u)
            assert t @ u > 0


def test_collinear_control_points_stay_on_line():
    c = _cubic([[0, 0], [0.2, 0], [0.7, 0], [1, 0], [0.4, 0]])
    assert np.all(eval_curve(c, np.linspace(0, 1, 101))[:, 1] == 0)


def test_derivative_against_finite_differences():
    rng = np.random.default_rng(2)
    c = _cubic(rng.normal(size=(7, 2)), rng.uniform(0.5, 2, 7))
    h = 1e-6
    for lam in rng.uniform(0.01, 0.99, 20):
        fd = (eval_curve(c, lam + h) - eval_curve(c, lam - h)) / (2 * h)
        np.testing.assert_allclose(eval_curve(c, lam, 1), fd, rtol=1e-6, atol=1e-8)


def test_bad_inputs():
    c = build_aerofoil().upper
    with pytest.raises(ValueError):
        eval_basis(c, 1.2)
    with pytest.raises(ValueError):
        eval_curve(c, 0.5, order=2)
    with pytest.raises(ValueError):
        NurbsCurve(3, [0, 0, 0, 0, 1, 1, 1], [[0, 0]] * 4)
    with pytest.raises(ValueError):
        NurbsCurve(1, [0, 0, 1, 1], [[0, 0], [1, 1]], [1.0, 0.0])


def test_inversion_round_trip():
    g = build_aerofoil()
    for curve in (g.upper, g.lower):
        for lam in np.linspace(0.01, 0.99, 40):
            r = invert_point(curve, eval_curve(curve, lam))
            assert r.lam == pytest.approx(lam, abs=1e-8)
            assert r.distance < 1e-10
        assert invert_point(curve, curve.control_points[0]).lam == 0.0


def test_inversion_off_curve_against_dense_sampling():
    curve = build_aerofoil().upper
    s = np.linspace(0, 1, 100001)
    p = np.array([0.5, 0.5])
    ref = s[np.argmin(np.sum((eval_curve(curve, s) - p) ** 2, axis=1))]
    assert invert_point(curve, p).lam == pytest.approx(ref, abs=1e-4)


def test_reference_aerofoil_control_points():
    g = build_aerofoil()
    np.testing.assert_array_equal(g.lower.control_points[1], [0.0, -0.024])
    np.testing.assert_array_equal(g.upper.control_points, BASE_UPPER)
    np.testing.assert_array_equal(g.lower.control_points, BASE_LOWER)
    h = build_aerofoil(theta=0.5)
    np.testing.assert_allclose(h.lower.control_points[1], [0.0, -0.012], atol=1e-17)
    assert np.array_equal(eval_curve(g.upper, 0.0), eval_curve(g.lower, 0.0))
    assert np.array_equal(eval_curve(g.upper, 1.0), eval_curve(g.lower, 1.0))


def _valid_params(u):
    _, lo, hi = aerofoil_parameter_bounds()
    return lo + np.asarray(u) * (hi - lo)


@given(st.lists(st.floats(0, 1), min_size=23, max_size=23))
def test_leading_edge_tangents_anti_parallel(u):
    prm = _valid_params(u)
    g = build_aerofoil(prm[:22], prm[22])
    a = g.lower.control_points[1] - g.lower.control_points[0]
    b = g.upper.control_points[0] - g.upper.control_points[1]
    assert abs(a[0] * b[1] - a[1] * b[0]) < 1e-12
    assert a @ b > 0
    np.testing.assert_allclose(g.lower.control_points[1],
                               g.lower.control_points[0] + prm[22] * (g.lower.control_points[0] - g.upper.control_points[1]),
                               atol=0)


def test_build_is_affine_in_offsets():
    base = build_aerofoil()
    labels, lo, hi = aerofoil_parameter_bounds()
    for k in range(22):
        off = np.zeros(22)
        off[k] = hi[k]
        g = build_aerofoil(off)
        du = g.upper.control_points - base.upper.control_points
        dl = g.lower.control_points - base.lower.control_points
        expected_u = np.zeros((8, 2))
        expected_l = np.zeros((8, 2))
        if k < 12:
            expected_u[1 + k // 2, k % 2] = hi[k]
            if k < 2:
                expected_l[1, k] = -hi[k]
        else:
            expected_l[2 + (k - 12) // 2, k % 2] = hi[k]
        np.testing.assert_allclose(du, expected_u, atol=1e-16)
        np.testing.assert_allclose(dl, expected_l, atol=1e-16)


def test_parameter_bounds_and_validation():
    labels, lo, hi = aerofoil_parameter_bounds()
    assert len(labels) == 23 and labels[-1] == "theta"
    assert (lo[-1], hi[-1]) == (0.5, 1.5)
    with pytest.raises(ValueError, match="outside"):
        build_aerofoil(hi[:22] * 1.01)
    with pytest.raises(ValueError):
        build_aerofoil(theta=1.6)


def test_geometry_json(tmp_path):
    prm = _valid_params(np.linspace(0, 1, 23))
    g = build_aerofoil(prm[:22], prm[22])
    save_geometry(g, tmp_path / "g.json")
    r = load_geometry(tmp_path / "g.json")
    assert np.array_equal(r.upper.control_points, g.upper.control_points)
    assert np.array_equal(r.lower.knots, g.lower.knots)
    assert np.array_equal(r.params, g.params)
