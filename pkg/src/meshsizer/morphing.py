"""
Background-mesh morphing by linear elasticity.

Wall nodes keep their NURBS parameter from the reference geometry and are
moved onto the new geometry; far-field nodes are fixed. The interior
displacement solves plane-strain linear elasticity with linear triangles
(quads are split along the shorter diagonal for assembly only).
"""

import logging
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import MatrixRankWarning, spsolve

from .mesh import inverted_elements, triangulate
from .nurbs import eval_curve, invert_point

log = logging.getLogger(__name__)

CURVES = ("upper", "lower")
WALL_TOL = 1e-8


class MorphError(RuntimeError):
    pass


@dataclass(frozen=True)
class ElasticityConfig:
    young: float = 1.0
    poisson: float = 0.3

    def __post_init__(self):
        if not self.young > 0:
            raise ValueError("Young's modulus must be positive")
        if not 0.0 <= self.poisson < 0.5:
            raise ValueError(f"Poisson ratio must lie in [0, 0.5), got {self.poisson}")

    def matrix(self):
        """Plane-strain constitutive matrix in Voigt notation (xx, yy, xy)."""
        e, nu = self.young, self.poisson
        c = e / ((1 + nu) * (1 - 2 * nu))
        return c * np.array([[1 - nu, nu, 0.0], [nu, 1 - nu, 0.0], [0.0, 0.0, 0.5 - nu]])


@dataclass(frozen=True, eq=False)
class WallParametrization:
    nodes: np.ndarray       # wall node ids
    curve: np.ndarray       # 0 upper, 1 lower
    lam: np.ndarray
    residual: np.ndarray

    def to_dict(self):
        return {"nodes": self.nodes.tolist(), "curve": [CURVES[c] for c in self.curve],
                "lam": self.lam.tolist(), "residual": self.residual.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["nodes"], int), np.array([CURVES.index(c) for c in d["curve"]]),
                   np.asarray(d["lam"], float), np.asarray(d["residual"], float))


def _chord(geom):
    c = geom.upper
    return float(np.linalg.norm(eval_curve(c, 1.0) - eval_curve(c, 0.0)))


def recover_wall_params(bg, geom, tol=WALL_TOL):
    """NURBS parameter of every wall node of ``bg`` on ``geom``.

    Each node is inverted on both curves and assigned to the one with the
    smaller residual; exact ties (leading and trailing edge) go to the
    upper curve.
    """
    nodes = np.unique(bg.boundary["wall"].ravel())
    chord = _chord(geom)
    curve = np.zeros(len(nodes), int)
    lam = np.zeros(len(nodes))
    res = np.zeros(len(nodes))
    for k, i in enumerate(nodes):
        x = bg.nodes[i]
        hits = [invert_point(geom.curve(c), x) for c in CURVES]
        j = 0 if hits[0].distance <= hits[1].distance else 1
        curve[k], lam[k], res[k] = j, hits[j].lam, hits[j].distance
        if res[k] > tol * chord:
            raise MorphError(f"wall node {int(i)} is {res[k]:.3e} from the geometry "
                             f"(tolerance {tol * chord:.1e})")
    return WallParametrization(nodes, curve, lam, res)


def wall_positions(wall, geom):
    """Points of ``geom`` at the stored wall parameters."""
    out = np.empty((len(wall.nodes), 2))
    for j, c in enumerate(CURVES):
        sel = wall.curve == j
        if sel.any():
            out[sel] = eval_curve(geom.curve(c), wall.lam[sel])
    return out


def stiffness_matrix(mesh, cfg=ElasticityConfig()):
    """Global stiffness matrix (CSR), dofs ordered (u_x0, u_y0, u_x1, ...)."""
    tris, _ = triangulate(mesh)
    x = mesh.nodes[tris]                              # (n, 3, 2)
    y23 = x[:, [1, 2, 0], 1] - x[:, [2, 0, 1], 1]     # b_k = y_{k+1} - y_{k+2}
    x32 = x[:, [2, 0, 1], 0] - x[:, [1, 2, 0], 0]     # c_k = x_{k+2} - x_{k+1}
    area = 0.5 * (y23[:, 0] * x32[:, 1] - y23[:, 1] * x32[:, 0])
    if np.any(area <= 0):
        raise MorphError(f"degenerate or inverted element in the reference mesh "
                         f"(split triangle {int(np.flatnonzero(area <= 0)[0])})")
    n = len(tris)
    B = np.zeros((n, 3, 6))
    B[:, 0, 0::2] = y23
    B[:, 1, 1::2] = x32
    B[:, 2, 0::2] = x32
    B[:, 2, 1::2] = y23
    B /= (2.0 * area)[:, None, None]
    ke = area[:, None, None] * np.einsum("nki,kl,nlj->nij", B, cfg.matrix(), B)
    dofs = np.stack([2 * tris, 2 * tris + 1], axis=2).reshape(n, 6)
    rows = np.repeat(dofs, 6, axis=1).ravel()
    cols = np.tile(dofs, (1, 6)).ravel()
    ndof = 2 * mesh.n_nodes
    return sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(ndof, ndof)).tocsr()


def solve_displacement(mesh, fixed_nodes, fixed_disp, cfg=ElasticityConfig()):
    """Nodal displacement with Dirichlet data on ``fixed_nodes``.

    Returns
    -------
    (n_nodes, 2) array
    """
    fixed_nodes = np.asarray(fixed_nodes, int)
    fixed_disp = np.asarray(fixed_disp, float).reshape(-1, 2)
    K = stiffness_matrix(mesh, cfg)
    ndof = 2 * mesh.n_nodes
    u = np.zeros(ndof)
    is_fixed = np.zeros(ndof, bool)
    fd = np.stack([2 * fixed_nodes, 2 * fixed_nodes + 1], 1).ravel()
    is_fixed[fd] = True
    u[fd] = fixed_disp.ravel()
    free = np.flatnonzero(~is_fixed)
    if len(free):
        rhs = -K[free][:, is_fixed] @ u[is_fixed]
        with warnings.catch_warnings():
            warnings.simplefilter("error", MatrixRankWarning)
            try:
                uf = spsolve(K[free][:, free].tocsc(), rhs)
            except MatrixRankWarning as exc:
                raise MorphError("singular stiffness matrix") from exc
        if not np.all(np.isfinite(uf)):
            raise MorphError("singular stiffness matrix")
        u[free] = uf
    return u.reshape(-1, 2)


def morph_background(bg, wall, new_geom, cfg=ElasticityConfig()):
    """Background mesh deformed so its wall nodes lie on ``new_geom``.

    Far-field nodes are fixed; connectivity, boundary tags and columns are
    unchanged. Inverted output elements are logged, not raised.
    """
    target = wall_positions(wall, new_geom)
    far = np.setdiff1d(np.unique(bg.boundary["farfield"].ravel()), wall.nodes)
    nodes = np.concatenate([wall.nodes, far])
    disp = np.concatenate([target - bg.nodes[wall.nodes], np.zeros((len(far), 2))])
    u = solve_displacement(bg, nodes, disp, cfg)
    x = bg.nodes + u
    x[wall.nodes] = target
    x[far] = bg.nodes[far]
    out = bg.with_nodes(x)
    bad = inverted_elements(out)
    if len(bad):
        log.warning("morphed background mesh has %d inverted element(s), first %d",
                    len(bad), int(bad[0]))
    return out
