"""
Comparison of predicted and target spacing on a background mesh.
"""

import csv
import io
from dataclasses import dataclass

import numpy as np

from ._jsonio import write_json, write_text
from .mesh import NodalField
from .transfer import query_spacing

# ratio bin edges, symmetric about 1 in log scale, with open tails
BIN_EDGES = np.array([0.0, 1 / 2, 1 / 1.5, 1 / 1.25, 1 / 1.15, 1 / 1.05,
                      1.05, 1.15, 1.25, 1.5, 2.0, np.inf])


@dataclass(frozen=True, eq=False)
class RatioHistogram:
    edges: np.ndarray
    counts: np.ndarray
    within_115: float
    within_150: float

    @property
    def total(self):
        return int(self.counts.sum())

    def summary(self):
        return {"total": self.total, "within_1.15": self.within_115,
                "within_1.5": self.within_150, "counts": self.counts.tolist(),
                "edges": [e if np.isfinite(e) else "inf" for e in self.edges.tolist()]}

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bin_low", "bin_high", "count"])
        for lo, hi, c in zip(self.edges[:-1], self.edges[1:], self.counts):
            w.writerow([repr(float(lo)), repr(float(hi)), int(c)])
        return buf.getvalue()


def ratio_histogram(ratios):
    """Histogram of spacing ratios over the fixed bins."""
    r = np.asarray(ratios, float).ravel()
    if np.any(~(r > 0)):
        raise ValueError("spacing ratios must be positive")
    idx = np.searchsorted(BIN_EDGES, r, side="right") - 1
    counts = np.bincount(idx, minlength=len(BIN_EDGES) - 1)
    n = max(len(r), 1)
    w115 = float(np.count_nonzero((r >= 1 / 1.15) & (r <= 1.15)) / n)
    w150 = float(np.count_nonzero((r >= 1 / 1.5) & (r <= 1.5)) / n)
    return RatioHistogram(BIN_EDGES.copy(), counts, w115, w150)


def element_centroids(mesh):
    """Vertex average of every element, global element order."""
    x = mesh.nodes
    parts = [x[c].mean(axis=1) for c in (mesh.triangles, mesh.quads) if len(c)]
    return np.concatenate(parts) if parts else np.empty((0, 2))


def centroid_spacing(bg):
    """Interpolated spacing at every element centroid of a background mesh."""
    m = bg.mesh
    v = bg.spacing.values
    out = [v[m.triangles].mean(axis=1)] if m.n_triangles else []
    if m.n_quads:
        cq = m.nodes[m.quads].mean(axis=1)
        out.append(np.array([query_spacing(bg, c) for c in cq]))
    return np.concatenate(out) if out else np.empty(0)


def _check_topology(a, b):
    ma, mb = a.mesh, b.mesh
    if (ma.n_nodes != mb.n_nodes or not np.array_equal(ma.triangles, mb.triangles)
            or not np.array_equal(ma.quads, mb.quads)):
        raise ValueError("target and predicted spacing live on different background topologies")


def centroid_ratios(target, predicted):
    """predicted / target spacing at each element centroid."""
    _check_topology(target, predicted)
    return centroid_spacing(predicted) / centroid_spacing(target)


def spacing_ratio_histogram(target, predicted):
    """Ratio histogram of one or several (target, predicted) background pairs.

    ``target`` and ``predicted`` are BackgroundMesh instances or equal-length
    sequences of them (ratios of all cases are pooled).
    """
    if isinstance(target, (list, tuple)):
        if len(target) != len(predicted):
            raise ValueError("different numbers of target and predicted cases")
        r = np.concatenate([centroid_ratios(t, p) for t, p in zip(target, predicted)])
    else:
        r = centroid_ratios(target, predicted)
    return ratio_histogram(r)


def spacing_error_map(target, predicted):
    """Nodal percentage error ``100 |pred - target| / target``."""
    _check_topology(target, predicted)
    t = target.spacing.values
    p = predicted.spacing.values
    if np.any(t <= 0):
        raise ValueError("target spacing must be positive")
    return NodalField(100.0 * np.abs(p - t) / t, "spacing_error_percent")


def write_histogram(hist, csv_path, json_path=None, extra=None):
    write_text(csv_path, hist.to_csv())
    if json_path is not None:
        d = hist.summary()
        d.update(extra or {})
        write_json(json_path, d)
