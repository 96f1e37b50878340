"""
Conservative transfer of nodal spacing to a background mesh.

Every background node receives the minimum spacing of the computational
nodes lying in its element patch. Computational nodes outside the
background mesh are attached to the closest background element, and
background nodes whose patch captures no computational node take the
minimum over the computational element containing them.

The node-to-node association depends only on the two meshes, so it is
built once (:func:`build_transfer_map`) and reused for every spacing field
defined on the same computational mesh.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from ._jsonio import read_json, write_json
from .mesh import MeshError, SpacingField, load_mesh, node_patches
from .spacing import spacing_from_dict, spacing_to_dict

log = logging.getLogger(__name__)

# query points this far outside the mesh (relative to its longest edge) snap to it
SNAP_TOL = 1e-8


class TransferError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BackgroundMesh:
    mesh: object
    spacing: SpacingField

    def __post_init__(self):
        if len(self.spacing) != self.mesh.n_nodes:
            raise ValueError(f"{len(self.spacing)} spacing values for {self.mesh.n_nodes} nodes")


@dataclass(frozen=True, eq=False)
class TransferMap:
    """Computational nodes whose minimum defines each background node.

    ``indices[indptr[i]:indptr[i + 1]]`` are the computational nodes of
    background node ``i``.
    """

    indptr: np.ndarray
    indices: np.ndarray
    n_comp: int
    orphans: np.ndarray = field(default_factory=lambda: np.empty(0, int))
    isolated: np.ndarray = field(default_factory=lambda: np.empty(0, int))
    outside: np.ndarray = field(default_factory=lambda: np.empty(0, int))

    def apply(self, values):
        values = np.asarray(values, float)
        if len(values) != self.n_comp:
            raise TransferError(f"{len(values)} spacing values for a {self.n_comp}-node mesh")
        return np.minimum.reduceat(values[self.indices], self.indptr[:-1])


def build_transfer_map(comp_mesh, bg_mesh):
    """Association of computational nodes to background nodes.

    Returns
    -------
    TransferMap
    """
    loc = bg_mesh.locator
    pairs_bg, pairs_comp = [], []
    orphans = []
    elems = bg_mesh.elements()
    for j, x in enumerate(comp_mesh.nodes):
        hits = loc.locate_all(x)
        if hits:
            es = [e for e, _ in hits]
        else:
            e, _, _ = loc.closest_element(x)
            es = [e]
            orphans.append(j)
        nodes = np.unique(np.concatenate([elems[e] for e in es]))
        pairs_bg.append(nodes)
        pairs_comp.append(np.full(len(nodes), j))
    pairs_bg = np.concatenate(pairs_bg)
    pairs_comp = np.concatenate(pairs_comp)

    captured = np.zeros(bg_mesh.n_nodes, bool)
    captured[pairs_bg] = True
    isolated, outside = [], []
    extra_bg, extra_comp = [], []
    comp_loc = comp_mesh.locator
    for i in np.flatnonzero(~captured):
        hit = comp_loc.locate(bg_mesh.nodes[i])
        if hit is not None:
            cn = comp_mesh.element(hit[0])
            isolated.append(i)
        else:
            d = np.linalg.norm(comp_mesh.nodes - bg_mesh.nodes[i], axis=1)
            cn = np.array([int(np.argmin(d))])
            outside.append(i)
            log.warning("background node %d lies outside the computational mesh; "
                        "using nearest computational node %d", i, cn[0])
        extra_bg.append(np.full(len(cn), i))
        extra_comp.append(np.asarray(cn))
    if extra_bg:
        pairs_bg = np.concatenate([pairs_bg] + extra_bg)
        pairs_comp = np.concatenate([pairs_comp] + extra_comp)
    order = np.lexsort((pairs_comp, pairs_bg))
    pairs_bg, pairs_comp = pairs_bg[order], pairs_comp[order]
    indptr = np.searchsorted(pairs_bg, np.arange(bg_mesh.n_nodes + 1))
    return TransferMap(indptr, pairs_comp, comp_mesh.n_nodes,
                       np.array(orphans, int), np.array(isolated, int), np.array(outside, int))


def transfer_spacing(comp_mesh, comp_spacing, bg_mesh, transfer_map=None):
    """Background mesh carrying the conservatively transferred spacing."""
    tm = build_transfer_map(comp_mesh, bg_mesh) if transfer_map is None else transfer_map
    vals = tm.apply(comp_spacing.values)
    prov = dict(comp_spacing.provenance)
    prov["transfer"] = {"orphans": len(tm.orphans), "isolated": len(tm.isolated),
                        "outside": len(tm.outside)}
    sp = SpacingField(vals, comp_spacing.delta_min, comp_spacing.delta_max, prov)
    return BackgroundMesh(bg_mesh, sp)


def patch_minimum_bound(comp_mesh, comp_spacing, bg_mesh):
    """Independent upper bound on each background value: min over located patch nodes.

    Uses only direct containment of computational nodes (no special cases);
    background nodes with an empty patch get ``inf``.
    """
    patches = node_patches(bg_mesh)
    loc = bg_mesh.locator
    bound = np.full(bg_mesh.n_nodes, np.inf)
    elem_min = {}
    for j, x in enumerate(comp_mesh.nodes):
        for e, _ in loc.locate_all(x):
            elem_min[e] = min(elem_min.get(e, np.inf), comp_spacing.values[j])
    for i, patch in enumerate(patches):
        for e in patch:
            bound[i] = min(bound[i], elem_min.get(int(e), np.inf))
    return bound


# ---------------------------------------------------------------------------
# queries


def _interp(bg, e, w):
    return float(w @ bg.spacing.values[bg.mesh.element(e)])


def query_spacing(bg, point, snap_tol=SNAP_TOL):
    """Interpolated spacing at ``point``.

    Points outside the mesh by less than ``snap_tol`` times the longest edge
    are snapped to the closest element.
    """
    p = np.asarray(point, float)
    loc = bg.mesh.locator
    hit = loc.locate(p)
    if hit is None:
        e, dist, q = loc.closest_element(p)
        if dist > snap_tol * loc.h:
            raise TransferError(f"point {p.tolist()} is outside the background mesh")
        return _interp(bg, e, loc.weights(e, q))
    return _interp(bg, *hit)


def query_many(bg, points, snap_tol=SNAP_TOL):
    return np.array([query_spacing(bg, p, snap_tol) for p in np.asarray(points, float)])


# ---------------------------------------------------------------------------
# JSON


def save_background(bg, path, mesh_path=None, provenance=None):
    d = spacing_to_dict(bg.spacing, provenance)
    if mesh_path is not None:
        d["background_mesh"] = str(mesh_path)
    write_json(path, d)


def load_background(path, mesh=None):
    d = read_json(path)
    if mesh is None:
        if "background_mesh" not in d:
            raise MeshError(f"{path}: no background mesh given or referenced")
        mesh = load_mesh(d["background_mesh"], allow_inverted=True)
    return BackgroundMesh(mesh, spacing_from_dict(d))
