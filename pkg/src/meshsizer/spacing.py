"""
Target spacing from nodal flow fields.

The spacing at a node follows from the largest absolute Hessian eigenvalue
of a key variable,

    delta_i = clamp(sqrt(K / lambda_i), delta_min, delta_max),
    K = S**2 * delta_min**2 * lambda_max,

evaluated here as ``S * delta_min * sqrt(lambda_max / lambda_i)`` so that
``S = 1`` gives exactly ``delta_min`` at the nodes attaining ``lambda_max``.
Two key variables are used by default: the pressure, smoothed along the
inflation-layer columns, and the Mach number restricted to triangle nodes
and extended along the columns.
"""

from dataclasses import dataclass

import numpy as np

from ._jsonio import read_json, write_json
from .mesh import GasModel, NodalField, SpacingField, mesh_spacing_bounds
from .recovery import DEFAULT_STRATEGY, RecoveryStrategy, recover_hessian, triangle_submesh

KEY_VARIABLES = ("smoothed_pressure", "pressure", "mach")

# wake triangles flagged for smoothing: longest / shortest edge above this
WAKE_ASPECT = 20.0


class SpacingError(ValueError):
    pass


@dataclass(frozen=True)
class SpacingConfig:
    scaling: float = 0.2
    strategy: RecoveryStrategy = DEFAULT_STRATEGY
    key_variables: tuple = ("smoothed_pressure", "mach")
    trailing_edge_x: float = None   # wake smoothing only when given
    wake_aspect: float = WAKE_ASPECT

    def __post_init__(self):
        if not 0.0 < self.scaling <= 1.0:
            raise ValueError(f"scaling S must lie in (0, 1], got {self.scaling}")
        object.__setattr__(self, "strategy", RecoveryStrategy(self.strategy))
        kv = tuple(self.key_variables)
        if not kv:
            raise ValueError("at least one key variable is required")
        for k in kv:
            if k not in KEY_VARIABLES:
                raise ValueError(f"unknown key variable '{k}' (expected one of {KEY_VARIABLES})")
        object.__setattr__(self, "key_variables", kv)

    def to_dict(self):
        return {"scaling": self.scaling, "strategy": self.strategy.value,
                "key_variables": list(self.key_variables),
                "trailing_edge_x": self.trailing_edge_x, "wake_aspect": self.wake_aspect}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


# ---------------------------------------------------------------------------
# primitive variables


def derive_primitives(rho, momentum, energy, gas=GasModel()):
    """Pressure and Mach number from conserved variables.

    Parameters
    ----------
    rho : (n,) array
        Density.
    momentum : (n, 2) array
        rho * v.
    energy : (n,) array
        rho * E, total energy per unit volume.
    gas : GasModel

    Returns
    -------
    p, mach : NodalField
    """
    rho = np.asarray(getattr(rho, "values", rho), float)
    mom = np.asarray(momentum, float).reshape(-1, 2)
    rhoE = np.asarray(getattr(energy, "values", energy), float)
    if not (len(rho) == len(mom) == len(rhoE)):
        raise ValueError("conserved fields have different lengths")
    bad = np.flatnonzero(~(rho > 0))
    if len(bad):
        raise SpacingError(f"non-positive density at node {int(bad[0])}")
    v = mom / rho[:, None]
    v2 = np.einsum("ij,ij->i", v, v)
    p = (gas.gamma - 1.0) * (rhoE - 0.5 * rho * v2)
    bad = np.flatnonzero(~(p > 0))
    if len(bad):
        raise SpacingError(f"non-positive pressure at node {int(bad[0])}")
    c = np.sqrt(gas.gamma * p / rho)
    return NodalField(p, "pressure"), NodalField(np.sqrt(v2) / c, "mach")


# ---------------------------------------------------------------------------
# sizing


def max_abs_eigenvalue(hessian):
    """max_j |lambda_j| of each symmetric 2x2 matrix, in closed form."""
    h = np.asarray(hessian, float)
    a, b, c = h[:, 0, 0], 0.5 * (h[:, 0, 1] + h[:, 1, 0]), h[:, 1, 1]
    mean = 0.5 * (a + c)
    rad = np.hypot(0.5 * (a - c), b)
    return np.abs(mean) + rad


def spacing_from_hessian(hessian, bounds, scaling=0.2, mask=None, name="spacing"):
    """Nodal spacing from Hessian eigenvalues.

    Parameters
    ----------
    hessian : (n, 2, 2) array
    bounds : (delta_min, delta_max)
    scaling : float
        S in (0, 1].
    mask : (n,) bool array, optional
        Nodes where the spacing is evaluated; ``lambda_max`` is taken over
        these nodes only and the others receive ``delta_max``.

    Returns
    -------
    SpacingField
    """
    dmin, dmax = (float(b) for b in bounds)
    if not dmin > 0:
        raise SpacingError(f"delta_min must be positive, got {dmin}")
    if dmin > dmax:
        raise SpacingError("delta_min > delta_max")
    if not 0.0 < scaling <= 1.0:
        raise SpacingError(f"scaling S must lie in (0, 1], got {scaling}")
    lam = max_abs_eigenvalue(hessian)
    if not np.all(np.isfinite(lam)):
        raise SpacingError(f"non-finite Hessian at node {int(np.flatnonzero(~np.isfinite(lam))[0])}")
    mask = np.ones(len(lam), bool) if mask is None else np.asarray(mask, bool)
    delta = np.full(len(lam), dmax)
    lam_max = lam[mask].max() if mask.any() else 0.0
    if lam_max > 0:
        s2 = scaling * scaling
        # K / delta_min^2 and K / delta_max^2 without forming K
        upper = s2 * lam_max
        lower = s2 * lam_max * (dmin / dmax) ** 2
        lm = lam[mask]
        d = np.empty(len(lm))
        hi = lm > upper
        lo = lm < lower
        mid = ~(hi | lo)
        d[hi] = dmin
        d[lo] = dmax
        d[mid] = scaling * dmin * np.sqrt(lam_max / lm[mid])
        delta[mask] = np.clip(d, dmin, dmax)
    return SpacingField(delta, dmin, dmax, {"name": name, "scaling": scaling})


def combine_spacings(a, b):
    """Node-wise minimum of two spacing fields with the same bounds."""
    if len(a) != len(b):
        raise ValueError(f"spacing fields have different lengths ({len(a)} vs {len(b)})")
    if (a.delta_min, a.delta_max) != (b.delta_min, b.delta_max):
        raise ValueError("spacing fields have different bounds")
    return SpacingField(np.minimum(a.values, b.values), a.delta_min, a.delta_max,
                        dict(a.provenance))


# ---------------------------------------------------------------------------
# inflation layer


def column_cubic(d, p):
    """Coefficients (c0, c1, c2, c3) of the smoothing cubic of one column.

    ``d`` are wall distances and ``p`` pressures of the column nodes, wall
    first. The cubic matches the wall value with zero slope, the value at
    the second-to-last node and the one-sided slope to the last node.
    """
    n = len(d)
    if n < 3:
        raise SpacingError("a column needs at least three nodes")
    big_d = d[n - 2]
    slope = (p[n - 1] - p[n - 2]) / (d[n - 1] - d[n - 2])
    jump = p[n - 2] - p[0]
    c2 = (3.0 * jump - slope * big_d) / big_d ** 2
    c3 = (slope * big_d - 2.0 * jump) / big_d ** 3
    return np.array([p[0], 0.0, c2, c3])


def _column_distances(x, col, ci):
    d = np.linalg.norm(x[col] - x[col[0]], axis=1)
    if np.any(np.diff(d) <= 0):
        raise SpacingError(f"column {ci}: coincident or non-monotone nodes")
    return d


def smooth_pressure_columns(mesh, pressure):
    """Replace the pressure along each inflation column by its smoothing cubic.

    The outermost column node keeps its value; nodes outside the columns are
    unchanged.
    """
    p = np.array(getattr(pressure, "values", pressure), float)
    out = p.copy()
    x = mesh.nodes
    for ci, col in enumerate(mesh.wall_columns):
        if len(col) < 3:
            raise SpacingError(f"column {ci} has {len(col)} nodes, at least 3 needed")
        d = _column_distances(x, col, ci)
        c = column_cubic(d, p[col])
        out[col[:-1]] = np.polynomial.polynomial.polyval(d[:-1], c)
    return NodalField(out, getattr(pressure, "name", "pressure") or "pressure")


def extend_mach_spacing(mesh, spacing, computed=None):
    """Copy the outermost column value to every inner node of each column.

    ``computed`` flags nodes holding a genuine value (default: triangle
    nodes); a column whose outermost node is not flagged is an error.
    """
    vals = np.array(spacing.values, float)
    computed = mesh.triangle_nodes if computed is None else np.asarray(computed, bool)
    for ci, col in enumerate(mesh.wall_columns):
        if len(col) < 2:
            continue
        top = col[-1]
        if not computed[top]:
            raise SpacingError(f"column {ci}: outermost node {int(top)} has no computed spacing")
        vals[col[:-1]] = vals[top]
    return SpacingField(vals, spacing.delta_min, spacing.delta_max, dict(spacing.provenance))


# ---------------------------------------------------------------------------
# wake


def flag_wake_triangles(mesh, trailing_edge_x, aspect=WAKE_ASPECT):
    """Ids of stretched triangles downstream of the trailing edge.

    A triangle is flagged when its longest/shortest edge ratio exceeds
    ``aspect`` and its centroid lies at ``x > trailing_edge_x``.
    """
    t = mesh.triangles
    if len(t) == 0:
        return np.empty(0, int)
    x = mesh.nodes
    le = np.stack([np.linalg.norm(x[t[:, (k + 1) % 3]] - x[t[:, k]], axis=1) for k in range(3)], 1)
    ratio = le.max(axis=1) / le.min(axis=1)
    cx = x[t].mean(axis=1)[:, 0]
    return np.flatnonzero((ratio > aspect) & (cx > trailing_edge_x))


def smooth_wake_pressure(mesh, pressure, triangles, sweeps=10):
    """Jacobi neighbour averaging of the pressure inside flagged triangles.

    Only nodes that touch flagged triangles exclusively (no other element)
    are updated, so the values on the edge of the flagged region act as
    fixed data.
    """
    p = np.array(getattr(pressure, "values", pressure), float)
    triangles = np.asarray(triangles, int)
    if len(triangles) == 0:
        return NodalField(p, getattr(pressure, "name", "pressure") or "pressure")
    t = mesh.triangles[triangles]
    inside = np.zeros(mesh.n_nodes, bool)
    inside[t.ravel()] = True
    other = np.ones(mesh.n_triangles, bool)
    other[triangles] = False
    inside[mesh.triangles[other].ravel()] = False
    inside[mesh.quads.ravel()] = False
    e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    e = np.unique(np.sort(e, axis=1), axis=0)
    e = np.concatenate([e, e[:, ::-1]])
    deg = np.bincount(e[:, 0], minlength=mesh.n_nodes)
    for _ in range(sweeps):
        acc = np.bincount(e[:, 0], weights=p[e[:, 1]], minlength=mesh.n_nodes)
        upd = inside & (deg > 0)
        p[upd] = acc[upd] / deg[upd]
    return NodalField(p, getattr(pressure, "name", "pressure") or "pressure")


# ---------------------------------------------------------------------------
# pipeline


def _values(f):
    return np.asarray(getattr(f, "values", f), float)


def compute_target_spacing(mesh, fields, config=SpacingConfig(), bounds=None):
    """Target spacing on the computational mesh.

    Parameters
    ----------
    mesh : HybridMesh
    fields : mapping
        Nodal ``"pressure"`` and/or ``"mach"`` values, as required by the
        configured key variables.
    config : SpacingConfig
    bounds : (delta_min, delta_max), optional
        Defaults to the shortest and longest mesh edge.
    """
    bounds = mesh_spacing_bounds(mesh) if bounds is None else bounds
    dmin, dmax = bounds
    result = None
    for key in config.key_variables:
        if key in ("pressure", "smoothed_pressure"):
            if "pressure" not in fields:
                raise SpacingError("key variable needs a 'pressure' field")
            p = NodalField(_values(fields["pressure"]), "pressure")
            if key == "smoothed_pressure":
                if mesh.wall_columns:
                    p = smooth_pressure_columns(mesh, p)
                if config.trailing_edge_x is not None:
                    wake = flag_wake_triangles(mesh, config.trailing_edge_x, config.wake_aspect)
                    p = smooth_wake_pressure(mesh, p, wake)
            h = recover_hessian(mesh, p, config.strategy)
            s = spacing_from_hessian(h, bounds, config.scaling, name=key)
        else:
            if "mach" not in fields:
                raise SpacingError("key variable needs a 'mach' field")
            m = _values(fields["mach"])
            if mesh.n_quads:
                tri_mask = mesh.triangle_nodes
                h = recover_hessian(triangle_submesh(mesh), m, config.strategy)
                s = spacing_from_hessian(h, bounds, config.scaling, mask=tri_mask, name=key)
                s = extend_mach_spacing(mesh, s, tri_mask)
            else:
                h = recover_hessian(mesh, m, config.strategy)
                s = spacing_from_hessian(h, bounds, config.scaling, name=key)
        result = s if result is None else combine_spacings(result, s)
    prov = config.to_dict()
    prov["delta_min"], prov["delta_max"] = float(dmin), float(dmax)
    return SpacingField(result.values, dmin, dmax, prov)


# ---------------------------------------------------------------------------
# JSON


def spacing_to_dict(spacing, provenance=None):
    d = {"delta_min": float(spacing.delta_min), "delta_max": float(spacing.delta_max),
         "values": spacing.values.tolist()}
    prov = dict(spacing.provenance)
    prov.update(provenance or {})
    d["provenance"] = prov
    return d


def spacing_from_dict(d):
    return SpacingField(np.asarray(d["values"], float), float(d["delta_min"]),
                        float(d["delta_max"]), dict(d.get("provenance", {})))


def save_spacing(spacing, path, provenance=None):
    write_json(path, spacing_to_dict(spacing, provenance))


def load_spacing(path):
    return spacing_from_dict(read_json(path))
