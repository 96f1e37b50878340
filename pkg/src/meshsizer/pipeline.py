"""
Dataset construction and train/evaluate helpers.

Two synthetic families are available:

* flow: the shock position and strength follow the free-stream Mach number
  and the wake direction follows the angle of attack; all cases share one
  computational mesh, so the transfer map is built once;
* geometry: 23 aerofoil parameters (22 control-point offsets and ``theta``);
  each case gets its own computational mesh and the reference background
  mesh is morphed onto the case geometry before the transfer.
"""

from dataclasses import replace

import numpy as np

from .evaluation import spacing_ratio_histogram
from .mesh import SpacingField
from .morphing import ElasticityConfig, morph_background, recover_wall_params
from .neural import Dataset, TrainConfig, predict_log_spacing, predict_spacing, r_squared, train
from .nurbs import aerofoil_parameter_bounds, build_aerofoil, eval_curve
from .sampling import SPLITS, DesignSpace
from .spacing import SpacingConfig, compute_target_spacing
from .synthetic import (SyntheticCase, aerofoil_background, analytic_fields, background_for,
                        flow_family_case, synthesize_case)
from .transfer import BackgroundMesh, build_transfer_map, transfer_spacing

FLOW_SPACE = DesignSpace((0.4, 0.0), (0.85, 3.0), ("mach_inf", "alpha_deg"))
DEFAULT_SPACING = SpacingConfig(trailing_edge_x=1.0)


def geometry_space():
    labels, lo, hi = aerofoil_parameter_bounds()
    return DesignSpace(tuple(lo), tuple(hi), tuple(labels))


def _stack(splits):
    rows, tags, k = [], {}, 0
    for s in SPLITS:
        pts = np.asarray(splits.get(s, np.empty((0, 0))))
        tags[s] = list(range(k, k + len(pts)))
        k += len(pts)
        rows.extend(pts)
    return np.array(rows), tags


def _case_error(k, exc):
    """Same exception type, message prefixed with the failing case index."""
    try:
        return type(exc)(f"case {k}: {exc}")
    except Exception:
        return exc


def build_flow_dataset(splits, base=SyntheticCase(), bg_wall=50, bg_rings=20,
                       spacing_cfg=DEFAULT_SPACING):
    """Dataset of the flow family.

    Parameters
    ----------
    splits : mapping
        Split name to (n, 2) array of ``(mach_inf, alpha_deg)``.

    Returns
    -------
    dataset : Dataset
    bg_mesh : HybridMesh
    """
    params, tags = _stack(splits)
    mesh, _ = synthesize_case(base)
    bg = background_for(base, bg_wall, bg_rings)
    tmap = build_transfer_map(mesh, bg)
    out = []
    bounds = None
    for k, prm in enumerate(params):
        try:
            case = flow_family_case(prm[0], prm[1], base)
            m, fields = synthesize_case(case)
            s = compute_target_spacing(m, fields, spacing_cfg)
        except (ValueError, RuntimeError, ArithmeticError) as exc:
            raise _case_error(k, exc) from exc
        bounds = (s.delta_min, s.delta_max)
        out.append(tmap.apply(s.values))
    ds = Dataset(params, np.array(out), tags, FLOW_SPACE.labels, *(bounds or (None, None)),
                 meta={"family": "flow", "base": base.to_dict(), "spacing": spacing_cfg.to_dict(),
                       "background": {"n_wall": bg_wall, "n_rings": bg_rings}})
    return ds, bg


def geometry_family_case(geom, base=SyntheticCase()):
    """Shock placed at the crest of the upper surface, strength growing with thickness."""
    lam = np.linspace(0.0, 1.0, 401)
    up = eval_curve(geom.upper, lam)
    lo = eval_curve(geom.lower, lam)
    crest = up[np.argmax(up[:, 1]), 0]
    thick = up[:, 1].max() - lo[:, 1].min()
    return replace(base, mach_inf=0.73, alpha_deg=2.0,
                   shock_x=float(crest + 0.25), shock_amp=float(2.5 * thick))


def build_geometry_dataset(splits, base=SyntheticCase(), n_side=25, refine=3, n_rings=20,
                           spacing_cfg=DEFAULT_SPACING, elasticity=ElasticityConfig()):
    """Dataset of the geometry family.

    The computational mesh is an all-triangle O-grid around the reference
    aerofoil with ``refine`` times the background wall resolution (so
    background wall nodes coincide with computational ones); both meshes
    are morphed onto each case geometry.

    Returns
    -------
    dataset : Dataset
    ref_bg : HybridMesh
        Reference background mesh (around the unperturbed aerofoil).
    """
    params, tags = _stack(splits)
    ref_geom = build_aerofoil()
    ref_bg = aerofoil_background(ref_geom, n_side, n_rings, base.far_radius)
    wall = recover_wall_params(ref_bg, ref_geom)
    ref_comp = aerofoil_background(ref_geom, n_side * refine, 2 * n_rings, base.far_radius)
    comp_wall = recover_wall_params(ref_comp, ref_geom)
    out = []
    dmin, dmax = np.inf, 0.0
    for k, prm in enumerate(params):
        try:
            geom = build_aerofoil(prm[:22], float(prm[22]))
            case = geometry_family_case(geom, base)
            comp = morph_background(ref_comp, comp_wall, geom, elasticity)
            p, m = analytic_fields(case, comp.nodes)
            s = compute_target_spacing(comp, {"pressure": p, "mach": m}, spacing_cfg)
            bg = morph_background(ref_bg, wall, geom, elasticity)
            out.append(transfer_spacing(comp, s, bg).spacing.values)
        except (ValueError, RuntimeError, ArithmeticError) as exc:
            raise _case_error(k, exc) from exc
        dmin, dmax = min(dmin, s.delta_min), max(dmax, s.delta_max)
    ds = Dataset(params, np.array(out), tags, geometry_space().labels,
                 dmin if out else None, dmax if out else None,
                 meta={"family": "geometry", "base": base.to_dict(),
                       "spacing": spacing_cfg.to_dict(),
                       "background": {"n_side": n_side, "n_rings": n_rings}})
    return ds, ref_bg


def evaluate_split(net, dataset, bg_mesh, split="test"):
    """Log-space R^2 and pooled centroid ratio histogram of one split."""
    x, y = dataset.split(split)
    pred = predict_log_spacing(net, x)
    r2 = r_squared(np.log10(y), pred)
    bounds = (dataset.delta_min, dataset.delta_max)
    targets = [BackgroundMesh(bg_mesh, SpacingField(np.clip(row, *bounds), *bounds)) for row in y]
    preds = [predict_spacing(net, xi, bg_mesh, bounds) for xi in x]
    return r2, spacing_ratio_histogram(targets, preds)


def grid_search(dataset, layers=(1, 2, 3), neurons=(10, 20, 40), cfg=TrainConfig()):
    """Validation-selected networks over a layers x neurons grid.

    Returns
    -------
    list of dict
        One entry per cell: ``layers``, ``neurons``, ``net``, ``report``
        and the test-split ``r2`` (log10 spacing).
    """
    n_in, n_out = dataset.inputs.shape[1], dataset.outputs.shape[1]
    x_te, y_te = dataset.split("test")
    cells = []
    for nl in layers:
        for nn in neurons:
            sizes = [n_in] + [nn] * nl + [n_out]
            net, rep = train(dataset, sizes, cfg)
            r2 = r_squared(np.log10(y_te), predict_log_spacing(net, x_te)) if len(x_te) else None
            cells.append({"layers": nl, "neurons": nn, "net": net, "report": rep, "r2": r2})
    return cells
