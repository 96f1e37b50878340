"""
Synthetic stand-ins for solver output.

Computational meshes are O-grids around an elliptic body of unit chord
(leading edge at the origin, trailing edge at ``(1, 0)``): an inflation
layer of quads extruded along the exact wall normals with heights
``h_1 = C * Re**(-3/4)`` and ``h_k = G * h_{k-1}``, followed by triangulated
rings graded out to a circular far field. Background meshes use the same
angular parametrisation without the inflation layer. Nodal pressure and
Mach number come from analytic fields: a smooth base, a tanh shock, a
Gaussian wake deficit and a wall boundary-layer factor.
"""

from dataclasses import asdict, dataclass, replace

import numpy as np
from scipy.optimize import brentq

from .mesh import MeshError, NodalField, make_mesh
from .nurbs import eval_curve

CENTER = np.array([0.5, 0.0])
TRAILING_EDGE = np.array([1.0, 0.0])
CRITICAL_MACH = 0.6


@dataclass(frozen=True)
class SyntheticCase:
    """Descriptor of a synthetic computational case.

    ``body`` is ``"ellipse"`` (O-grid with inflation layer) or ``"none"``
    (structured right-triangle grid on ``box``).
    """

    body: str = "ellipse"
    thickness: float = 0.12
    far_radius: float = 10.0
    n_wall: int = 100
    n_layers: int = 20
    n_rings: int = 40
    reynolds: float = 6.5e6
    c_height: float = 1.0
    growth: float = 1.25
    box: tuple = (0.0, 0.0, 1.0, 1.0)
    nx: int = 20
    ny: int = 20
    # flow
    gamma: float = 1.4
    mach_inf: float = 0.7
    alpha_deg: float = 2.0
    shock_x: float = 0.6
    shock_width: float = 0.04
    shock_amp: float = 0.3
    shock_height: float = 0.5
    wake_width: float = 0.03
    wake_spread: float = 0.05
    wake_deficit: float = 0.5
    bl_fraction: float = 0.1
    noise: float = 0.0
    seed: int = 0

    def to_dict(self):
        d = asdict(self)
        d["box"] = list(self.box)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "box" in d:
            d["box"] = tuple(d["box"])
        return cls(**d)


def first_layer_height(reynolds, c_height=1.0):
    """Non-dimensional first inflation-layer height ``C * Re**(-3/4)``."""
    return c_height * reynolds ** -0.75


def layer_offsets(h1, growth, n_layers):
    """Cumulative wall distances ``[0, h1, h1 + G h1, ...]`` of ``n_layers`` layers."""
    if not h1 > 0:
        raise MeshError(f"first layer height must be positive, got {h1}")
    if not growth > 1:
        raise MeshError(f"growth factor must exceed 1, got {growth}")
    return np.concatenate([[0.0], np.cumsum(h1 * growth ** np.arange(n_layers))])


# ---------------------------------------------------------------------------
# geometry helpers


def ellipse_wall(n, thickness):
    """Counter-clockwise wall points and outward unit normals, starting at the trailing edge."""
    nu = 2.0 * np.pi * np.arange(n) / n
    a, b = 0.5, 0.5 * thickness
    pts = np.stack([CENTER[0] + a * np.cos(nu), b * np.sin(nu)], axis=1)
    nrm = np.stack([b * np.cos(nu), a * np.sin(nu)], axis=1)
    nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
    return pts, nrm, nu


def _grading(length, first, n):
    """Geometric ratio ``g`` with ``first * (g**n - 1) / (g - 1) == length``."""
    if first * n >= length:
        return 1.0
    f = lambda g: first * (g ** n - 1.0) / (g - 1.0) - length
    return brentq(f, 1.0 + 1e-12, 10.0)


def _ring_fractions(length, first, n):
    g = _grading(length, first, n)
    steps = first * g ** np.arange(n) if g > 1.0 else np.full(n, length / n)
    s = np.concatenate([[0.0], np.cumsum(steps)])
    return s / s[-1]


def _structured_cells(n_around, n_radial, offset=0):
    """Index quads of a periodic-in-i, open-in-r structured grid (row-major by ring)."""
    i = np.arange(n_around)
    cells = []
    for r in range(n_radial):
        a = offset + r * n_around + i
        b = offset + r * n_around + (i + 1) % n_around
        cells.append(np.stack([a, b, b + n_around, a + n_around], axis=1))
    return np.concatenate(cells) if cells else np.empty((0, 4), int)


def _orient(nodes, cells):
    """Reverse all cells if they are clockwise; mixed orientation means folded cells."""
    x = nodes[cells]
    area = 0.5 * np.sum(x[..., 0] * np.roll(x[..., 1], -1, 1) - np.roll(x[..., 0], -1, 1) * x[..., 1], 1)
    if np.all(area < 0):
        return cells[:, ::-1].copy()
    if np.any(area <= 0):
        raise MeshError(f"grid cell {int(np.flatnonzero(area <= 0)[0])} is folded")
    return cells


def _tri_area(x, t):
    a, b, c = x[t[:, 0]], x[t[:, 1]], x[t[:, 2]]
    return (b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (c[:, 0] - a[:, 0]) * (b[:, 1] - a[:, 1])


def _split(nodes, quads):
    """Two triangles per quad, along the shorter diagonal unless that folds a non-convex cell."""
    x = nodes
    d02 = np.sum((x[quads[:, 0]] - x[quads[:, 2]]) ** 2, axis=1)
    d13 = np.sum((x[quads[:, 1]] - x[quads[:, 3]]) ** 2, axis=1)
    a02 = np.minimum(_tri_area(x, quads[:, [0, 1, 2]]), _tri_area(x, quads[:, [0, 2, 3]]))
    a13 = np.minimum(_tri_area(x, quads[:, [0, 1, 3]]), _tri_area(x, quads[:, [1, 2, 3]]))
    use02 = np.where((a02 > 0) & (a13 > 0), d02 <= d13, a02 > 0)
    t1 = np.where(use02[:, None], quads[:, [0, 1, 2]], quads[:, [0, 1, 3]])
    t2 = np.where(use02[:, None], quads[:, [0, 2, 3]], quads[:, [1, 2, 3]])
    return np.stack([t1, t2], axis=1).reshape(-1, 3)


def o_grid(wall, normals, angles, offsets, far_radius, n_rings):
    """O-grid between a closed wall loop and a far-field circle.

    Parameters
    ----------
    wall, normals : (n, 2) arrays
        Counter-clockwise wall points and outward normals.
    angles : (n,) array
        Polar angle of each far-field node (about the body centre).
    offsets : (L + 1,) array
        Wall distances of the inflation layer nodes (``[0]`` for none).
    far_radius : float
    n_rings : int
        Triangulated rings between the last inflation node and the far field.

    Returns
    -------
    mesh : HybridMesh
    wall_distance : (n_nodes,) array
        Distance of each node from the wall measured along its grid line.
    """
    n = len(wall)
    L = len(offsets) - 1
    inner = [wall + t * normals for t in offsets]
    top = inner[-1]
    far = CENTER + far_radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    span = np.linalg.norm(far - top, axis=1)
    if L >= 2:
        # continue the geometric growth of the inflation layer
        first = (offsets[-1] - offsets[-2]) ** 2 / (offsets[-2] - offsets[-3])
    else:
        first = 0.5 * np.mean(np.linalg.norm(np.roll(wall, -1, 0) - wall, axis=1))
    s = _ring_fractions(span.min(), first, n_rings)
    rings = [top + sr * (far - top) for sr in s[1:]]
    nodes = np.concatenate(inner + rings)
    dist = np.concatenate([np.full(n, t) for t in offsets]
                          + [offsets[-1] + sr * span for sr in s[1:]])
    quads = _orient(nodes, _structured_cells(n, L))
    tris = _split(nodes, _orient(nodes, _structured_cells(n, n_rings, offset=L * n)))
    i = np.arange(n)
    boundary = {"wall": np.stack([i, (i + 1) % n], 1),
                "farfield": len(nodes) - n + np.stack([i, (i + 1) % n], 1)}
    return make_mesh(nodes, tris, quads, boundary), dist


def box_mesh(box=(0.0, 0.0, 1.0, 1.0), nx=20, ny=20):
    """Structured grid of ``nx`` by ``ny`` cells, each split into two right triangles."""
    x0, y0, x1, y1 = box
    X, Y = np.meshgrid(np.linspace(x0, x1, nx + 1), np.linspace(y0, y1, ny + 1))
    nodes = np.stack([X.ravel(), Y.ravel()], axis=1)
    j, i = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    a = (j * (nx + 1) + i).ravel()
    b, c, d = a + 1, a + nx + 2, a + nx + 1
    tris = np.concatenate([np.stack([a, b, c], 1), np.stack([a, c, d], 1)])
    ring = np.concatenate([np.arange(nx), nx + (nx + 1) * np.arange(ny),
                           (nx + 1) * (ny + 1) - 1 - np.arange(nx),
                           (nx + 1) * (ny - np.arange(ny))])
    far = np.stack([ring, np.roll(ring, -1)], 1)
    return make_mesh(nodes, tris, (), {"farfield": far})


# ---------------------------------------------------------------------------
# analytic flow


def _freestream_pressure(case):
    return 1.0 / (case.gamma * case.mach_inf ** 2)


def analytic_pressure(case, x, with_shock=True):
    """Smooth base pressure plus an upper-surface tanh shock."""
    g, minf = case.gamma, case.mach_inf
    pinf = _freestream_pressure(case)
    q = 0.5 * g * pinf * minf ** 2
    r_le = np.hypot(x[:, 0], x[:, 1])
    alpha = np.radians(case.alpha_deg)
    suction = (0.6 + 2.0 * alpha) * np.exp(-((x[:, 0] - 0.4) ** 2 / 0.15 + (x[:, 1] - 0.05) ** 2 / 0.08))
    cp = 0.9 * np.exp(-(r_le / 0.15) ** 2) - suction
    p = pinf + q * cp
    if with_shock and case.shock_amp != 0.0:
        front = 0.5 * (1.0 + np.tanh((x[:, 0] - case.shock_x) / case.shock_width))
        side = 0.5 * (1.0 + np.tanh(x[:, 1] / 0.02)) * np.exp(-(x[:, 1] / case.shock_height) ** 2)
        decay = np.exp(-((x[:, 0] - case.shock_x) / 0.5) ** 2)
        p = p + q * case.shock_amp * front * side * decay
    return p


def isentropic_mach(case, p):
    """Mach number from pressure through the isentropic relation of the free stream."""
    g = case.gamma
    pinf = _freestream_pressure(case)
    p0 = pinf * (1.0 + 0.5 * (g - 1.0) * case.mach_inf ** 2) ** (g / (g - 1.0))
    return np.sqrt(np.maximum(2.0 / (g - 1.0) * ((p0 / p) ** ((g - 1.0) / g) - 1.0), 0.0))


def wake_factor(case, x):
    """Multiplicative Mach deficit along the wake leaving the trailing edge at angle alpha."""
    alpha = np.radians(case.alpha_deg)
    t = np.array([np.cos(alpha), np.sin(alpha)])
    rel = x - TRAILING_EDGE
    along = rel @ t
    across = rel @ np.array([-t[1], t[0]])
    width = case.wake_width + case.wake_spread * np.maximum(along, 0.0)
    ramp = 0.5 * (1.0 + np.tanh(along / 0.02))
    decay = 1.0 / (1.0 + 0.2 * np.maximum(along, 0.0))
    return 1.0 - case.wake_deficit * ramp * decay * np.exp(-(across / width) ** 2)


def analytic_fields(case, x, wall_distance=None, bl_thickness=None):
    """Nodal pressure and Mach number at points ``x``."""
    p = analytic_pressure(case, x)
    m = isentropic_mach(case, p) * wake_factor(case, x)
    if wall_distance is not None and bl_thickness:
        m = m * (1.0 - np.exp(-wall_distance / bl_thickness))
    return p, m


def synthesize_case(case=SyntheticCase()):
    """Mesh and nodal ``pressure``/``mach`` fields for a synthetic case.

    Returns
    -------
    mesh : HybridMesh
    fields : dict of NodalField
    """
    if case.body == "none":
        mesh = box_mesh(case.box, case.nx, case.ny)
        p, m = analytic_fields(case, mesh.nodes)
    elif case.body == "ellipse":
        h1 = first_layer_height(case.reynolds, case.c_height)
        offsets = layer_offsets(h1, case.growth, case.n_layers)
        wall, nrm, nu = ellipse_wall(case.n_wall, case.thickness)
        mesh, dist = o_grid(wall, nrm, nu, offsets, case.far_radius, case.n_rings)
        p, m = analytic_fields(case, mesh.nodes, dist, case.bl_fraction * offsets[-1])
        # thin-layer pressure: constant across the inflation layer
        for col in mesh.wall_columns:
            p[col[:-1]] = p[col[-1]]
        if case.noise:
            rng = np.random.default_rng(case.seed)
            inner = np.zeros(mesh.n_nodes, bool)
            for col in mesh.wall_columns:
                inner[col[:-1]] = True
            p = p + np.where(inner, case.noise * rng.standard_normal(mesh.n_nodes) * p, 0.0)
    else:
        raise ValueError(f"unknown body '{case.body}'")
    return mesh, {"pressure": NodalField(p, "pressure"), "mach": NodalField(m, "mach")}


def background_for(case, n_wall=50, n_rings=20):
    """Coarse all-triangle background mesh matching the case's body and far field.

    ``case.n_wall`` must be a multiple of ``n_wall`` so the background wall
    and far-field nodes coincide with computational nodes.
    """
    if case.body != "ellipse":
        nx = max(2, case.nx // 2)
        ny = max(2, case.ny // 2)
        return box_mesh(case.box, nx, ny)
    if case.n_wall % n_wall:
        raise ValueError(f"n_wall {case.n_wall} is not a multiple of {n_wall}")
    wall, nrm, nu = ellipse_wall(n_wall, case.thickness)
    mesh, _ = o_grid(wall, nrm, nu, np.array([0.0]), case.far_radius, n_rings)
    return mesh


def flow_family_case(mach_inf, alpha_deg, base=SyntheticCase()):
    """Two-parameter transonic family.

    Below ``CRITICAL_MACH`` the flow is shock-free; above it the shock sits
    further aft and gets stronger with ``mach_inf``. The wake leaves the
    trailing edge at ``alpha_deg``.
    """
    u = (mach_inf - 0.4) / 0.45
    amp = 0.4 * max(0.0, np.tanh((mach_inf - CRITICAL_MACH) / 0.1))
    return replace(base, mach_inf=float(mach_inf), alpha_deg=float(alpha_deg),
                   shock_x=0.3 + 0.4 * u, shock_amp=float(amp))


def aerofoil_wall(geom, n_side):
    """Counter-clockwise aerofoil wall loop from the trailing edge over the upper side.

    Parameters are cosine-clustered towards both edges; the leading and
    trailing edge points are shared by the two curves and appear once.
    """
    lam = 0.5 * (1.0 - np.cos(np.pi * np.arange(n_side + 1) / n_side))
    up = eval_curve(geom.upper, lam[::-1])          # TE -> LE
    lo = eval_curve(geom.lower, lam[1:-1])          # LE -> TE, edges excluded
    return np.concatenate([up, lo])


def loop_normals(wall):
    """Outward unit normals at the vertices of a counter-clockwise loop.

    The average of the adjacent edge normals, except at cusps (where that
    average nearly cancels) which use the reversed bisector of the two edges.
    """
    prev = np.roll(wall, 1, 0) - wall
    nxt = np.roll(wall, -1, 0) - wall
    u1 = prev / np.linalg.norm(prev, axis=1)[:, None]
    u2 = nxt / np.linalg.norm(nxt, axis=1)[:, None]
    edge = np.stack([u2[:, 1], -u2[:, 0]], 1) + np.stack([-u1[:, 1], u1[:, 0]], 1)
    cusp = -(u1 + u2)
    use_edge = np.linalg.norm(edge, axis=1) > 0.5
    n = np.where(use_edge[:, None], edge, cusp)
    return n / np.linalg.norm(n, axis=1)[:, None]


def aerofoil_background(geom, n_side=25, n_rings=20, far_radius=10.0):
    """All-triangle O-grid background mesh around an aerofoil.

    A first ring of nodes sits a quarter of the mean wall edge off the wall
    along the vertex normals, so the trailing edge is surrounded by several
    well-shaped triangles. From there grid lines run to the far-field point
    whose polar angle is proportional to the arc length along the wall from
    the trailing edge.
    """
    wall = aerofoil_wall(geom, n_side)
    seg = np.linalg.norm(np.diff(np.vstack([wall, wall[:1]]), axis=0), axis=1)
    ang = 2.0 * np.pi * np.concatenate([[0.0], np.cumsum(seg[:-1])]) / seg.sum()
    h = 0.25 * seg.mean()
    mesh, _ = o_grid(wall, loop_normals(wall), ang, np.array([0.0, h]), far_radius, n_rings)
    tris = np.vstack([mesh.triangles, _split(mesh.nodes, mesh.quads)])
    return make_mesh(mesh.nodes, tris, (), mesh.boundary)
