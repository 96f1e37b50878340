"""
Hybrid (triangle + quadrilateral) 2D meshes and nodal fields.

Elements are numbered globally: triangles first, then quads, so element
``e >= n_triangles`` is quad ``e - n_triangles``. All connectivity is
0-based and counter-clockwise.
"""

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ._jsonio import write_json

BOUNDARY_TAGS = ("wall", "farfield")

# barycentric / bilinear containment tolerance
LOCATE_TOL = 1e-10


class MeshError(ValueError):
    """Invalid mesh data (bad index, inverted element, broken inflation layer)."""


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GasModel:
    gamma: float = 1.4

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise ValueError(f"gamma must be > 1, got {self.gamma}")


@dataclass(frozen=True, eq=False)
class NodalField:
    values: np.ndarray
    name: str = ""

    def __post_init__(self):
        v = _frozen(self.values, float)
        if v.ndim != 1:
            raise ValueError("nodal field must be one-dimensional")
        if not np.all(np.isfinite(v)):
            bad = int(np.flatnonzero(~np.isfinite(v))[0])
            raise ValueError(f"field '{self.name}' has a non-finite value at node {bad}")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True, eq=False)
class SpacingField:
    """Nodal spacing together with the clamp bounds used to produce it."""

    values: np.ndarray
    delta_min: float
    delta_max: float
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        v = _frozen(self.values, float)
        if not self.delta_min > 0:
            raise ValueError(f"delta_min must be positive, got {self.delta_min}")
        if self.delta_min > self.delta_max:
            raise ValueError("delta_min > delta_max")
        if v.size and (v.min() < self.delta_min or v.max() > self.delta_max):
            raise ValueError("spacing values outside [delta_min, delta_max]")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True, eq=False)
class HybridMesh:
    """Immutable 2D hybrid mesh.

    Use :func:`make_mesh` (or :func:`load_mesh`) to get a validated instance
    with inflation columns filled in.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    quads: np.ndarray
    boundary: dict
    wall_columns: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "nodes", _frozen(np.reshape(self.nodes, (-1, 2)), float))
        object.__setattr__(self, "triangles", _frozen(np.reshape(self.triangles, (-1, 3)), np.int64))
        object.__setattr__(self, "quads", _frozen(np.reshape(self.quads, (-1, 4)), np.int64))
        bnd = {}
        for tag in BOUNDARY_TAGS:
            bnd[tag] = _frozen(np.reshape(self.boundary.get(tag, []), (-1, 2)), np.int64)
        extra = set(self.boundary) - set(BOUNDARY_TAGS)
        if extra:
            raise MeshError(f"unknown boundary tag(s): {sorted(extra)}")
        object.__setattr__(self, "boundary", bnd)
        object.__setattr__(self, "wall_columns", tuple(_frozen(c, np.int64) for c in self.wall_columns))

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def n_quads(self):
        return len(self.quads)

    @property
    def n_elements(self):
        return self.n_triangles + self.n_quads

    def element(self, e):
        """Node indices of global element ``e``."""
        if e < self.n_triangles:
            return self.triangles[e]
        return self.quads[e - self.n_triangles]

    def elements(self):
        """List of node-index arrays for every element, in global order."""
        return list(self.triangles) + list(self.quads)

    @cached_property
    def areas(self):
        """Signed areas of all elements (positive for counter-clockwise)."""
        return np.concatenate([_polygon_areas(self.nodes, self.triangles),
                               _polygon_areas(self.nodes, self.quads)])

    @cached_property
    def edges(self):
        """Unique undirected element edges, shape (n_edges, 2), sorted pairs."""
        parts = []
        for conn in (self.triangles, self.quads):
            k = conn.shape[1]
            for a in range(k):
                parts.append(conn[:, [a, (a + 1) % k]])
        if not parts:
            return np.empty((0, 2), np.int64)
        e = np.sort(np.concatenate(parts), axis=1)
        return np.unique(e, axis=0)

    @cached_property
    def triangle_nodes(self):
        """Boolean mask of nodes that belong to at least one triangle."""
        mask = np.zeros(self.n_nodes, bool)
        mask[self.triangles.ravel()] = True
        return mask

    @cached_property
    def locator(self):
        return PointLocator(self)

    def with_nodes(self, nodes):
        """Same connectivity, new coordinates (no validation)."""
        return HybridMesh(nodes, self.triangles, self.quads,
                          {k: v for k, v in self.boundary.items()}, self.wall_columns)


def _polygon_areas(nodes, conn):
    if len(conn) == 0:
        return np.empty(0)
    x = nodes[conn, 0]
    y = nodes[conn, 1]
    return 0.5 * np.sum(x * np.roll(y, -1, axis=1) - np.roll(x, -1, axis=1) * y, axis=1)


def triangulate(mesh):
    """All triangles of the mesh with quads split along their shorter diagonal.

    Returns
    -------
    tris : (n, 3) int array
        Original triangles first, then two triangles per quad.
    parent : (n,) int array
        Global element id each triangle comes from.
    """
    q = mesh.quads
    if len(q) == 0:
        return mesh.triangles.copy(), np.arange(mesh.n_triangles)
    x = mesh.nodes
    d02 = np.sum((x[q[:, 0]] - x[q[:, 2]]) ** 2, axis=1)
    d13 = np.sum((x[q[:, 1]] - x[q[:, 3]]) ** 2, axis=1)
    use02 = d02 <= d13
    t1 = np.where(use02[:, None], q[:, [0, 1, 2]], q[:, [0, 1, 3]])
    t2 = np.where(use02[:, None], q[:, [0, 2, 3]], q[:, [1, 2, 3]])
    qid = mesh.n_triangles + np.arange(len(q))
    tris = np.concatenate([mesh.triangles, np.stack([t1, t2], axis=1).reshape(-1, 3)])
    parent = np.concatenate([np.arange(mesh.n_triangles), np.repeat(qid, 2)])
    return tris, parent


def node_patches(mesh):
    """For every node, the sorted ids of the elements that contain it."""
    ids = []
    nodes = []
    for off, conn in ((0, mesh.triangles), (mesh.n_triangles, mesh.quads)):
        k = conn.shape[1]
        ids.append(np.repeat(off + np.arange(len(conn)), k))
        nodes.append(conn.ravel())
    ids = np.concatenate(ids)
    nodes = np.concatenate(nodes)
    order = np.lexsort((ids, nodes))
    ids, nodes = ids[order], nodes[order]
    bounds = np.searchsorted(nodes, np.arange(mesh.n_nodes + 1))
    return [ids[bounds[i]:bounds[i + 1]] for i in range(mesh.n_nodes)]


def mesh_spacing_bounds(mesh):
    """(shortest, longest) element edge length."""
    e = mesh.edges
    if len(e) == 0:
        raise MeshError("mesh has no edges")
    lengths = np.linalg.norm(mesh.nodes[e[:, 0]] - mesh.nodes[e[:, 1]], axis=1)
    return float(lengths.min()), float(lengths.max())


def inverted_elements(mesh):
    """Global ids of elements with non-positive signed area."""
    return np.flatnonzero(mesh.areas <= 0.0)


# ---------------------------------------------------------------------------
# construction and validation


def make_mesh(nodes, triangles=(), quads=(), boundary=None, wall_columns=None,
              allow_inverted=False):
    """Build and validate a mesh, reconstructing inflation columns if absent.

    ``allow_inverted`` accepts elements with non-positive area (morphed
    background meshes may contain a few).
    """
    mesh = HybridMesh(nodes, triangles, quads, boundary or {}, wall_columns or ())
    _check_indices(mesh)
    bad = inverted_elements(mesh)
    if len(bad) and not allow_inverted:
        raise MeshError(f"inverted element {int(bad[0])}")
    if wall_columns is None:
        cols = build_wall_columns(mesh)
        mesh = HybridMesh(mesh.nodes, mesh.triangles, mesh.quads, mesh.boundary, cols)
    else:
        _check_columns(mesh)
    return mesh


def _check_indices(mesh):
    n = mesh.n_nodes
    if not np.all(np.isfinite(mesh.nodes)):
        raise MeshError("non-finite node coordinate")
    for name, conn in (("triangle", mesh.triangles), ("quad", mesh.quads)):
        if len(conn) == 0:
            continue
        bad = np.flatnonzero(np.any((conn < 0) | (conn >= n), axis=1))
        if len(bad):
            raise MeshError(f"dangling index in {name} {int(bad[0])}")
    for tag, edges in mesh.boundary.items():
        if len(edges) == 0:
            continue
        bad = np.flatnonzero(np.any((edges < 0) | (edges >= n), axis=1))
        if len(bad):
            raise MeshError(f"dangling index in {tag} edge {int(bad[0])}")


def _quad_edge_map(quads):
    emap = {}
    for qi, q in enumerate(quads):
        for a in range(4):
            key = frozenset((int(q[a]), int(q[(a + 1) % 4])))
            emap.setdefault(key, []).append(qi)
    return emap


def build_wall_columns(mesh):
    """Reconstruct wall-normal node columns from quad adjacency.

    Starting from wall edges that bound a quad, layers are peeled outward:
    in each quad the edge opposite the current layer edge is the next layer,
    and the two remaining edges link a node to its outward neighbour.
    Columns are returned ordered by wall node index.
    """
    quads = mesh.quads
    if len(quads) == 0:
        return ()
    emap = _quad_edge_map(quads)
    visited = np.zeros(len(quads), bool)
    nxt = {}
    frontier = [tuple(int(v) for v in e) for e in mesh.boundary["wall"]
                if frozenset(int(v) for v in e) in emap]
    wall_nodes = sorted({v for e in frontier for v in e})
    while frontier:
        new = []
        for a, b in frontier:
            for qi in emap.get(frozenset((a, b)), []):
                if visited[qi]:
                    continue
                visited[qi] = True
                q = [int(v) for v in quads[qi]]
                ia, ib = q.index(a), q.index(b)
                # outward neighbour of a is its quad neighbour other than b
                na = q[(ia - 1) % 4] if q[(ia + 1) % 4] == b else q[(ia + 1) % 4]
                nb = q[(ib - 1) % 4] if q[(ib + 1) % 4] == a else q[(ib + 1) % 4]
                for v, w in ((a, na), (b, nb)):
                    if nxt.get(v, w) != w:
                        raise MeshError(f"non-manifold inflation layer at node {v}")
                    nxt[v] = w
                new.append((na, nb))
        frontier = new
    if not visited.all():
        raise MeshError(
            f"non-manifold inflation layer: quad {int(np.flatnonzero(~visited)[0])} "
            "is not connected to a wall column")
    cols = []
    for w in wall_nodes:
        col = [w]
        while col[-1] in nxt:
            col.append(nxt[col[-1]])
            if len(col) > mesh.n_nodes:
                raise MeshError(f"non-manifold inflation layer: cycle from node {w}")
        cols.append(col)
    return tuple(cols)


def _check_columns(mesh):
    wall = {int(v) for v in mesh.boundary["wall"].ravel()}
    emap = _quad_edge_map(mesh.quads)
    for ci, col in enumerate(mesh.wall_columns):
        if len(col) and (np.any(col < 0) or np.any(col >= mesh.n_nodes)):
            raise MeshError(f"dangling index in wall column {ci}")
        if len(col) == 0 or int(col[0]) not in wall:
            raise MeshError(f"wall column {ci} does not start on a wall edge")
        for a, b in zip(col[:-1], col[1:]):
            if frozenset((int(a), int(b))) not in emap:
                raise MeshError(f"wall column {ci}: nodes {a},{b} do not share a quad edge")


# ---------------------------------------------------------------------------
# point location


def _bilinear_shape(xi, eta):
    return np.array([(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta])


def _inverse_bilinear(xq, p, maxiter=50):
    """Local (xi, eta) in [0,1]^2 reference coords of ``p`` in quad ``xq`` (4, 2)."""
    xi = eta = 0.5
    scale = max(np.ptp(xq[:, 0]), np.ptp(xq[:, 1]))
    for _ in range(maxiter):
        n = _bilinear_shape(xi, eta)
        r = n @ xq - p
        dxi = np.array([-(1 - eta), 1 - eta, eta, -eta]) @ xq
        deta = np.array([-(1 - xi), -xi, xi, 1 - xi]) @ xq
        det = dxi[0] * deta[1] - dxi[1] * deta[0]
        if det == 0.0:
            break
        d_xi = (r[0] * deta[1] - r[1] * deta[0]) / det
        d_eta = (dxi[0] * r[1] - dxi[1] * r[0]) / det
        xi -= d_xi
        eta -= d_eta
        if abs(d_xi) + abs(d_eta) < 1e-15 or np.linalg.norm(r) < 1e-16 * scale:
            break
    return xi, eta


class PointLocator:
    """Bin-grid point location on a hybrid mesh.

    Bins are squares of side ``delta_max`` (longest edge); each stores the
    elements whose bounding box overlaps it. Ties are broken by lowest
    element id.
    """

    def __init__(self, mesh, tol=LOCATE_TOL):
        self.mesh = mesh
        self.tol = tol
        x = mesh.nodes
        elems = mesh.elements()
        self.lo = np.array([[x[c, 0].min(), x[c, 1].min()] for c in elems]).reshape(-1, 2)
        self.hi = np.array([[x[c, 0].max(), x[c, 1].max()] for c in elems]).reshape(-1, 2)
        if len(elems) == 0:
            self.h = 1.0
            self.origin = np.zeros(2)
            self.bins = {}
            return
        _, self.h = mesh_spacing_bounds(mesh)
        self.origin = self.lo.min(axis=0)
        pad = 1e-9 * self.h
        ilo = np.floor((self.lo - pad - self.origin) / self.h).astype(int)
        ihi = np.floor((self.hi + pad - self.origin) / self.h).astype(int)
        bins = {}
        for e in range(len(elems)):
            for i in range(ilo[e, 0], ihi[e, 0] + 1):
                for j in range(ilo[e, 1], ihi[e, 1] + 1):
                    bins.setdefault((i, j), []).append(e)
        self.bins = {k: np.array(v) for k, v in bins.items()}
        nt = mesh.n_triangles
        t = mesh.triangles
        if nt:
            a = x[t[:, 0]]
            m = np.stack([x[t[:, 1]] - a, x[t[:, 2]] - a], axis=2)  # columns are edge vectors
            self._tri_origin = a
            self._tri_inv = np.linalg.inv(m)

    def _candidates(self, p):
        key = tuple(np.floor((p - self.origin) / self.h).astype(int))
        c = self.bins.get(key)
        if c is None:
            return np.empty(0, int)
        pad = 1e-9 * self.h
        inside = np.all((self.lo[c] - pad <= p) & (p <= self.hi[c] + pad), axis=1)
        return c[inside]

    def weights(self, e, p):
        """Interpolation weights of ``p`` w.r.t. element ``e`` (3 or 4 values, sum 1)."""
        nt = self.mesh.n_triangles
        if e < nt:
            w12 = self._tri_inv[e] @ (p - self._tri_origin[e])
            return np.array([1.0 - w12[0] - w12[1], w12[0], w12[1]])
        xq = self.mesh.nodes[self.mesh.quads[e - nt]]
        xi, eta = _inverse_bilinear(xq, p)
        return _bilinear_shape(xi, eta)

    def _contains(self, e, p):
        nt = self.mesh.n_triangles
        if e < nt:
            w = self.weights(e, p)
            return w if np.all(w >= -self.tol) else None
        xq = self.mesh.nodes[self.mesh.quads[e - nt]]
        xi, eta = _inverse_bilinear(xq, p)
        t = self.tol
        if -t <= xi <= 1 + t and -t <= eta <= 1 + t:
            w = _bilinear_shape(xi, eta)
            # Newton may stall on a badly shaped quad; verify the map
            if np.linalg.norm(w @ xq - p) <= 1e-9 * max(self.h, 1e-300):
                return w
        return None

    def locate_all(self, p):
        """All ``(element, weights)`` pairs whose closed element contains ``p``."""
        p = np.asarray(p, float)
        out = []
        for e in self._candidates(p):
            w = self._contains(int(e), p)
            if w is not None:
                out.append((int(e), w))
        return out

    def locate(self, p):
        """Lowest-id ``(element, weights)`` containing ``p``, or ``None``."""
        p = np.asarray(p, float)
        for e in self._candidates(p):
            w = self._contains(int(e), p)
            if w is not None:
                return int(e), w
        return None

    @cached_property
    def _all_edges(self):
        segs, owner = [], []
        for e, c in enumerate(self.mesh.elements()):
            k = len(c)
            for a in range(k):
                segs.append((c[a], c[(a + 1) % k]))
                owner.append(e)
        return np.array(segs).reshape(-1, 2), np.array(owner, int)

    def closest_element(self, p):
        """``(element, distance, closest point)`` to the closed element hull.

        Brute force over every element edge; ties by lowest id.
        """
        p = np.asarray(p, float)
        hit = self.locate(p)
        if hit is not None:
            return hit[0], 0.0, p.copy()
        segs, owner = self._all_edges
        a = self.mesh.nodes[segs[:, 0]]
        b = self.mesh.nodes[segs[:, 1]]
        ab = b - a
        denom = np.einsum("ij,ij->i", ab, ab)
        t = np.clip(np.einsum("ij,ij->i", p - a, ab) / np.where(denom > 0, denom, 1.0), 0.0, 1.0)
        q = a + t[:, None] * ab
        d = np.linalg.norm(q - p, axis=1)
        best = np.full(self.mesh.n_elements, np.inf)
        np.minimum.at(best, owner, d)
        e = int(np.argmin(best))
        k = np.flatnonzero(owner == e)
        j = k[np.argmin(d[k])]
        return e, float(best[e]), q[j]


def locate_point(mesh, point):
    """Element containing ``point`` and its interpolation weights, or ``None``.

    Weights are barycentric for triangles and bilinear shape-function values
    for quads; in both cases ``weights @ nodes[element] == point``.
    """
    return mesh.locator.locate(point)


# ---------------------------------------------------------------------------
# JSON I/O


def mesh_to_dict(mesh):
    return {
        "nodes": mesh.nodes.tolist(),
        "triangles": mesh.triangles.tolist(),
        "quads": mesh.quads.tolist(),
        "boundary": {tag: mesh.boundary[tag].tolist() for tag in BOUNDARY_TAGS},
        "wall_columns": [c.tolist() for c in mesh.wall_columns],
    }


def mesh_from_dict(data, allow_inverted=False):
    try:
        nodes = data["nodes"]
    except (KeyError, TypeError):
        raise MeshError("mesh JSON has no 'nodes' array")
    bnd = data.get("boundary", {})
    try:
        return make_mesh(nodes, data.get("triangles", []), data.get("quads", []),
                         bnd, data.get("wall_columns"), allow_inverted)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, MeshError):
            raise
        raise MeshError(f"malformed mesh JSON: {exc}") from exc


def load_mesh(path, allow_inverted=False):
    try:
        with open(path) as f:
            data = json.load(f)
    except json.JSONDecodeError as exc:
        raise MeshError(f"{path}: parse failure: {exc}") from exc
    return mesh_from_dict(data, allow_inverted)


def save_mesh(mesh, path):
    write_json(path, mesh_to_dict(mesh))


def load_field(path):
    with open(path) as f:
        data = json.load(f)
    return NodalField(np.asarray(data["values"], float), data.get("name", ""))


def save_field(fld, path):
    write_json(path, {"name": fld.name, "values": fld.values.tolist()})
