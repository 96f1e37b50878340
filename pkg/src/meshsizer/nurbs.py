"""
NURBS curves (Cox-de Boor evaluation, derivatives, point inversion) and the
two-curve parametrised aerofoil used for geometric design studies.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize_scalar

from ._jsonio import read_json, write_json


class InversionError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class NurbsCurve:
    degree: int
    knots: np.ndarray
    control_points: np.ndarray
    weights: np.ndarray = None

    def __post_init__(self):
        q = int(self.degree)
        knots = np.array(self.knots, float)
        cps = np.array(self.control_points, float).reshape(-1, 2)
        w = np.ones(len(cps)) if self.weights is None else np.array(self.weights, float)
        if q < 0:
            raise ValueError("degree must be non-negative")
        if len(knots) != len(cps) + q + 1:
            raise ValueError(
                f"need {len(cps) + q + 1} knots for {len(cps)} control points of degree {q}, "
                f"got {len(knots)}")
        if np.any(np.diff(knots) < 0):
            raise ValueError("knots must be non-decreasing")
        if knots[0] != 0.0 or knots[-1] != 1.0:
            raise ValueError("knots must span [0, 1]")
        if np.any(knots[:q + 1] != 0.0) or np.any(knots[-q - 1:] != 1.0):
            raise ValueError("knot vector must be clamped (q+1 repeats at each end)")
        if len(w) != len(cps) or np.any(w <= 0):
            raise ValueError("weights must be positive, one per control point")
        for name, a in (("knots", knots), ("control_points", cps), ("weights", w)):
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        object.__setattr__(self, "degree", q)

    @property
    def n_control(self):
        return len(self.control_points)

    def to_dict(self):
        return {"degree": self.degree, "knots": self.knots.tolist(),
                "cps": self.control_points.tolist(), "weights": self.weights.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["degree"], d["knots"], d["cps"], d.get("weights"))


def clamped_uniform_knots(n_control, degree):
    n_inner = n_control - degree - 1
    if n_inner < 0:
        raise ValueError("too few control points for the degree")
    inner = np.arange(1, n_inner + 1) / (n_inner + 1)
    return np.concatenate([np.zeros(degree + 1), inner, np.ones(degree + 1)])


# ---------------------------------------------------------------------------
# basis functions


def _basis_tables(knots, q, lam):
    """Cox-de Boor table: ``tables[k]`` has shape (len(lam), len(knots)-1-k)."""
    U = knots
    lam = lam[:, None]
    n0 = ((U[:-1] <= lam) & (lam < U[1:])).astype(float)
    # right end belongs to the last non-empty span
    last = np.flatnonzero(U[:-1] < U[1:])[-1]
    n0[lam[:, 0] == U[-1], last] = 1.0
    tables = [n0]
    for k in range(1, q + 1):
        prev = tables[-1]
        n = len(U) - 1 - k
        i = np.arange(n)
        dl = U[i + k] - U[i]
        dr = U[i + k + 1] - U[i + 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            a = np.where(dl > 0, (lam - U[i]) / np.where(dl > 0, dl, 1), 0.0)
            b = np.where(dr > 0, (U[i + k + 1] - lam) / np.where(dr > 0, dr, 1), 0.0)
        tables.append(a * prev[:, :n] + b * prev[:, 1:n + 1])
    return tables


def _basis_derivative(tables, knots, k, r):
    """r-th derivative of the degree-k basis functions."""
    if r == 0:
        return tables[k]
    if r > k:
        return np.zeros_like(tables[k])
    lower = _basis_derivative(tables, knots, k - 1, r - 1)
    U = knots
    n = lower.shape[1] - 1
    i = np.arange(n)
    dl = U[i + k] - U[i]
    dr = U[i + k + 1] - U[i + 1]
    cl = np.where(dl > 0, k / np.where(dl > 0, dl, 1), 0.0)
    cr = np.where(dr > 0, k / np.where(dr > 0, dr, 1), 0.0)
    return cl * lower[:, :n] - cr * lower[:, 1:n + 1]


def _check_param(lam):
    lam = np.atleast_1d(np.asarray(lam, float))
    if np.any((lam < 0.0) | (lam > 1.0)) or np.any(np.isnan(lam)):
        raise ValueError("parameter outside [0, 1]")
    return lam


def bspline_basis(curve, lam, nder=0):
    """Non-rational B-spline basis (and derivatives) at ``lam``.

    Returns an array of shape (nder+1, len(lam), n_control).
    """
    lam = _check_param(lam)
    tables = _basis_tables(curve.knots, curve.degree, lam)
    return np.stack([_basis_derivative(tables, curve.knots, curve.degree, r)
                     for r in range(nder + 1)])


def eval_basis(curve, lam):
    """Rational basis values ``nu_i C_i(lam) / sum_j nu_j C_j(lam)``, one per control point."""
    scalar = np.ndim(lam) == 0
    n = bspline_basis(curve, lam)[0] * curve.weights
    r = n / n.sum(axis=1, keepdims=True)
    return r[0] if scalar else r


def _curve_derivatives(curve, lam, nder):
    """Point and up to two parametric derivatives, each of shape (len(lam), 2)."""
    b = bspline_basis(curve, lam, nder)
    w = curve.weights
    W = [bk @ w for bk in b]
    A = [bk @ (w[:, None] * curve.control_points) for bk in b]
    c = A[0] / W[0][:, None]
    out = [c]
    if nder >= 1:
        d1 = (A[1] - W[1][:, None] * c) / W[0][:, None]
        out.append(d1)
    if nder >= 2:
        d2 = (A[2] - 2 * W[1][:, None] * d1 - W[2][:, None] * c) / W[0][:, None]
        out.append(d2)
    return out


def eval_curve(curve, lam, order=0):
    """Curve point (``order=0``) or first derivative (``order=1``) at ``lam``."""
    if order not in (0, 1):
        raise ValueError(f"unsupported derivative order {order}")
    scalar = np.ndim(lam) == 0
    r = _curve_derivatives(curve, lam, order)[order]
    return r[0] if scalar else r


# ---------------------------------------------------------------------------
# point inversion


class Inversion(NamedTuple):
    lam: float
    distance: float


def _newton(curve, p, lam, maxiter=50, tol=1e-12):
    for _ in range(maxiter):
        c, d1, d2 = (v[0] for v in _curve_derivatives(curve, lam, 2))
        r = c - p
        g = r @ d1
        h = d1 @ d1 + r @ d2
        if h <= 0:
            h = d1 @ d1
        if h == 0:
            return lam, False
        step = -g / h
        new = min(1.0, max(0.0, lam + step))
        if abs(new - lam) < tol:
            return new, True
        lam = new
    return lam, False


def invert_point(curve, point, n_seeds=64):
    """Parameter of the curve point closest to ``point``.

    Newton iterations on the squared distance, seeded from the best local
    minima of ``n_seeds`` uniform samples. Falls back to a bounded Brent
    search around the best sample when Newton does not converge.
    """
    p = np.asarray(point, float)
    s = np.linspace(0.0, 1.0, n_seeds)
    d = np.sum((eval_curve(curve, s) - p) ** 2, axis=1)
    padded = np.concatenate([[np.inf], d, [np.inf]])
    minima = np.flatnonzero((d <= padded[:-2]) & (d <= padded[2:]))
    seeds = minima[np.argsort(d[minima], kind="stable")][:3]
    best = None
    for k in seeds:
        lam, ok = _newton(curve, p, float(s[k]))
        if not ok:
            lo, hi = s[max(k - 1, 0)], s[min(k + 1, n_seeds - 1)]
            res = minimize_scalar(lambda t: np.sum((eval_curve(curve, t) - p) ** 2),
                                  bounds=(lo, hi), method="bounded",
                                  options={"xatol": 1e-13})
            if not res.success:
                continue
            lam = float(res.x)
        dist = float(np.linalg.norm(eval_curve(curve, lam) - p))
        if best is None or dist < best.distance:
            best = Inversion(float(lam), dist)
    if best is None:
        raise InversionError(f"point inversion did not converge for {p.tolist()}")
    return best


# ---------------------------------------------------------------------------
# parametrised aerofoil

AEROFOIL_DEGREE = 3

BASE_UPPER = np.array([
    [0.000, 0.000], [0.000, 0.024], [0.105, 0.059], [0.391, 0.076],
    [0.594, 0.059], [0.799, 0.034], [0.933, 0.012], [1.000, 0.000]])
BASE_LOWER = np.array([
    [0.000, 0.000], [0.000, -0.024], [0.105, -0.059], [0.391, -0.084],
    [0.594, -0.046], [0.799, -0.010], [0.933, 0.000], [1.000, 0.000]])

# allowed |offset| of the movable control points (1-based point index)
_UPPER_RANGE = {2: (4.3e-2, 2.2e-2), 3: (4.3e-2, 2.2e-2), 4: (3.1e-2, 1.5e-2),
                5: (2.5e-2, 1.2e-2), 6: (1.5e-2, 7.4e-3), 7: (5.3e-3, 2.7e-3)}
_LOWER_RANGE = {3: (4.3e-2, 2.2e-2), 4: (4.5e-2, 2.3e-2), 5: (3.9e-5, 1.9e-5),
                6: (3.2e-2, 1.6e-2), 7: (1.9e-2, 9.6e-3)}

OFFSET_LABELS = tuple(
    [f"d{ax}{i}_upper" for i in _UPPER_RANGE for ax in "xy"]
    + [f"d{ax}{i}_lower" for i in _LOWER_RANGE for ax in "xy"])
OFFSET_RANGES = np.array(
    [r for i in _UPPER_RANGE for r in _UPPER_RANGE[i]]
    + [r for i in _LOWER_RANGE for r in _LOWER_RANGE[i]])
THETA_RANGE = (0.5, 1.5)


def aerofoil_parameter_bounds():
    """(labels, lower, upper) of the 23 geometric parameters (22 offsets + theta)."""
    labels = OFFSET_LABELS + ("theta",)
    lo = np.concatenate([-OFFSET_RANGES, [THETA_RANGE[0]]])
    hi = np.concatenate([OFFSET_RANGES, [THETA_RANGE[1]]])
    return labels, lo, hi


@dataclass(frozen=True, eq=False)
class AerofoilGeometry:
    upper: NurbsCurve
    lower: NurbsCurve
    offsets: np.ndarray = field(default_factory=lambda: np.zeros(22))
    theta: float = 1.0

    def curve(self, name):
        return {"upper": self.upper, "lower": self.lower}[name]

    @property
    def params(self):
        return np.concatenate([self.offsets, [self.theta]])

    def to_dict(self):
        return {"upper": self.upper.to_dict(), "lower": self.lower.to_dict(),
                "theta": float(self.theta), "offsets": np.asarray(self.offsets).tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(NurbsCurve.from_dict(d["upper"]), NurbsCurve.from_dict(d["lower"]),
                   np.asarray(d.get("offsets", np.zeros(22)), float), float(d.get("theta", 1.0)))


def build_aerofoil(offsets=None, theta=1.0):
    """Aerofoil from 22 control-point offsets and the leading-edge parameter ``theta``.

    The leading/trailing edge points are fixed and the second lower point is
    placed on the line through the leading edge and the second upper point,
    ``B2- = B1- + theta (B1- - B2+)``, so both curves leave the leading edge
    with anti-parallel tangents.
    """
    off = np.zeros(22) if offsets is None else np.asarray(offsets, float)
    if off.shape != (22,):
        raise ValueError(f"expected 22 offsets, got {off.size}")
    over = np.flatnonzero(np.abs(off) > OFFSET_RANGES * (1 + 1e-12))
    if len(over):
        k = int(over[0])
        raise ValueError(f"offset {OFFSET_LABELS[k]}={off[k]} outside +/-{OFFSET_RANGES[k]}")
    if not THETA_RANGE[0] <= theta <= THETA_RANGE[1]:
        raise ValueError(f"theta={theta} outside {THETA_RANGE}")
    up = BASE_UPPER.copy()
    lo = BASE_LOWER.copy()
    up[1:7] += off[:12].reshape(6, 2)
    lo[2:7] += off[12:].reshape(5, 2)
    lo[1] = lo[0] + theta * (lo[0] - up[1])
    knots = clamped_uniform_knots(8, AEROFOIL_DEGREE)
    return AerofoilGeometry(NurbsCurve(AEROFOIL_DEGREE, knots, up),
                            NurbsCurve(AEROFOIL_DEGREE, knots, lo),
                            off.copy(), float(theta))


def load_geometry(path):
    return AerofoilGeometry.from_dict(read_json(path))


def save_geometry(geom, path):
    write_json(path, geom.to_dict())
