"""
Nodal gradient and Hessian recovery on hybrid meshes.

Three strategies are available:

``fv_dual``
    Vertex-centred Green-Gauss over the median dual (facets join edge
    midpoints to element centroids).
``fe_hybrid``
    Area-weighted average of element gradients at the barycentre; quads use
    bilinear shape functions.
``fe_split``
    As ``fe_hybrid`` after splitting every quad into two triangles along the
    shorter diagonal. This is the default.

All three reproduce the gradient of a linear field exactly at every node.
"""

import enum

import numpy as np

from .mesh import HybridMesh, triangulate


class RecoveryStrategy(str, enum.Enum):
    FV_DUAL = "fv_dual"
    FE_HYBRID = "fe_hybrid"
    FE_SPLIT = "fe_split"


DEFAULT_STRATEGY = RecoveryStrategy.FE_SPLIT


class RecoveryError(ValueError):
    pass


def _rot_cw(v):
    return np.stack([v[..., 1], -v[..., 0]], axis=-1)


def _p1_gradients(x, tris, s):
    """Constant gradient and signed area of the linear interpolant on each triangle."""
    x0, x1, x2 = x[tris[:, 0]], x[tris[:, 1]], x[tris[:, 2]]
    area2 = (x1[:, 0] - x0[:, 0]) * (x2[:, 1] - x0[:, 1]) - (x2[:, 0] - x0[:, 0]) * (x1[:, 1] - x0[:, 1])
    if np.any(area2 == 0):
        raise RecoveryError(f"degenerate triangle {int(np.flatnonzero(area2 == 0)[0])}")
    # grad phi_k = rot(x_{k+2} - x_{k+1}) / 2A, rotated counter-clockwise
    g = np.zeros((len(tris), 2) + s.shape[1:])
    for k, (a, b) in enumerate(((x1, x2), (x2, x0), (x0, x1))):
        d = b - a
        gk = np.stack([-d[:, 1], d[:, 0]], axis=1) / area2[:, None]
        g += gk.reshape(gk.shape + (1,) * (s.ndim - 1)) * s[tris[:, k]][:, None]
    return g, 0.5 * area2


def _bilinear_centroid_gradients(x, quads, s):
    """Gradient of the bilinear interpolant at the reference centre of each quad."""
    xq = x[quads]                                   # (n, 4, 2)
    dn = np.array([[-0.5, 0.5, 0.5, -0.5],          # dN/dxi at (1/2, 1/2)
                   [-0.5, -0.5, 0.5, 0.5]])         # dN/deta
    jac = np.einsum("rk,nkd->nrd", dn, xq)          # jac[n, r, d] = dx_d / dxi_r
    det = np.linalg.det(jac)
    if np.any(det == 0):
        raise RecoveryError(f"degenerate quad {int(np.flatnonzero(det == 0)[0])}")
    ds = np.einsum("rk,nk...->nr...", dn, s[quads])
    g = np.einsum("ndr,nr...->nd...", np.linalg.inv(jac), ds)
    xs, ys = xq[:, :, 0], xq[:, :, 1]
    area = 0.5 * np.sum(xs * np.roll(ys, -1, 1) - np.roll(xs, -1, 1) * ys, axis=1)
    return g, area


def _weighted_average(n_nodes, conns, grads, weights, shape):
    acc = np.zeros((n_nodes, 2) + shape)
    wsum = np.zeros(n_nodes)
    for conn, g, w in zip(conns, grads, weights):
        wb = w.reshape(-1, *([1] * (g.ndim - 1)))
        for k in range(conn.shape[1]):
            np.add.at(acc, conn[:, k], wb * g)
            np.add.at(wsum, conn[:, k], w)
    out = np.zeros_like(acc)
    has = wsum > 0
    out[has] = acc[has] / wsum[has].reshape(-1, *([1] * (acc.ndim - 1)))
    return out


def _fe_split(mesh, s):
    tris, _ = triangulate(mesh)
    g, a = _p1_gradients(mesh.nodes, tris, s)
    return _weighted_average(mesh.n_nodes, [tris], [g], [np.abs(a)], s.shape[1:])


def _fe_hybrid(mesh, s):
    conns, grads, weights = [], [], []
    if mesh.n_triangles:
        g, a = _p1_gradients(mesh.nodes, mesh.triangles, s)
        conns.append(mesh.triangles), grads.append(g), weights.append(np.abs(a))
    if mesh.n_quads:
        g, a = _bilinear_centroid_gradients(mesh.nodes, mesh.quads, s)
        conns.append(mesh.quads), grads.append(g), weights.append(np.abs(a))
    return _weighted_average(mesh.n_nodes, conns, grads, weights, s.shape[1:])


def _fv_dual(mesh, s):
    x = mesh.nodes
    n = mesh.n_nodes
    extra = s.shape[1:]
    flux = np.zeros((n, 2) + extra)
    vol = np.zeros(n)
    directed = []

    def add(idx, vec, val):
        np.add.at(flux, idx, vec.reshape(vec.shape + (1,) * len(extra)) * val[:, None])

    for conn in (mesh.triangles, mesh.quads):
        if len(conn) == 0:
            continue
        k = conn.shape[1]
        c = x[conn].mean(axis=1)
        sc = s[conn].mean(axis=1)      # interpolant value at the centroid
        for a in range(k):
            i, j, h = conn[:, a], conn[:, (a + 1) % k], conn[:, a - 1]
            m = 0.5 * (x[i] + x[j])
            # facet m -> c; normal points from i towards j
            rn = _rot_cw(c - m)
            val = 0.5 * (0.5 * (s[i] + s[j]) + sc)
            add(i, rn, val)
            add(j, -rn, val)
            mh = 0.5 * (x[h] + x[i])
            poly = np.stack([x[i], m, c, mh], axis=1)
            vol_i = 0.5 * np.sum(poly[:, :, 0] * np.roll(poly[:, :, 1], -1, 1)
                                 - np.roll(poly[:, :, 0], -1, 1) * poly[:, :, 1], axis=1)
            np.add.at(vol, i, vol_i)
            directed.append(np.stack([i, j], axis=1))
    directed = np.concatenate(directed)
    key = np.sort(directed, axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    bnd = directed[counts[inv.ravel()] == 1]
    if len(bnd):
        i, j = bnd[:, 0], bnd[:, 1]
        rn = 0.5 * _rot_cw(x[j] - x[i])  # outward: elements are counter-clockwise
        add(i, rn, 0.75 * s[i] + 0.25 * s[j])
        add(j, rn, 0.25 * s[i] + 0.75 * s[j])
    used = np.zeros(n, bool)
    used[mesh.triangles.ravel()] = True
    used[mesh.quads.ravel()] = True
    if np.any(vol[used] <= 0):
        raise RecoveryError(f"degenerate dual control volume at node {int(np.flatnonzero(used & (vol <= 0))[0])}")
    out = np.zeros_like(flux)
    out[used] = flux[used] / vol[used].reshape(-1, *([1] * (flux.ndim - 1)))
    return out


_DISPATCH = {
    RecoveryStrategy.FV_DUAL: _fv_dual,
    RecoveryStrategy.FE_HYBRID: _fe_hybrid,
    RecoveryStrategy.FE_SPLIT: _fe_split,
}


def _values(field):
    return np.asarray(getattr(field, "values", field), float)


def recover_gradient(mesh, field, strategy=DEFAULT_STRATEGY):
    """Nodal gradient, shape (n_nodes, 2) (or (n_nodes, 2, ...) for stacked fields).

    Nodes that belong to no element get a zero gradient.
    """
    s = _values(field)
    if s.shape[0] != mesh.n_nodes:
        raise ValueError(f"field has {s.shape[0]} values for {mesh.n_nodes} nodes")
    return _DISPATCH[RecoveryStrategy(strategy)](mesh, s)


def recover_hessian(mesh, field, strategy=DEFAULT_STRATEGY):
    """Nodal Hessian as the symmetrised gradient of the recovered gradient, shape (n, 2, 2)."""
    g = recover_gradient(mesh, field, strategy)          # (n, 2)
    h = recover_gradient(mesh, g, strategy)              # (n, 2 [d/dx_k], 2 [component l])
    h = np.swapaxes(h, 1, 2)                             # H[l, k] = d g_l / d x_k
    return 0.5 * (h + np.swapaxes(h, 1, 2))


def triangle_submesh(mesh):
    """The triangular part of a hybrid mesh (same node numbering, no quads)."""
    return HybridMesh(mesh.nodes, mesh.triangles, np.empty((0, 4), np.int64), {})
