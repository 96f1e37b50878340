"""
``meshsizer`` command-line interface.

Every command reads an optional JSON config (``--config``); relative paths
inside it are resolved against the config file's directory. Outputs go to
``--out`` (default: the config's ``out`` entry, else the working directory)
and carry a provenance block with the config hash, seed and package
versions. Exit codes: 0 ok, 1 usage, 2 I/O, 3 numeric failure.
"""

import argparse
import hashlib
import json
import logging
import os
import sys

import numpy as np
import scipy

from . import __version__
from ._jsonio import read_json, write_json
from .evaluation import spacing_error_map, spacing_ratio_histogram, write_histogram
from .mesh import MeshError, load_field, load_mesh, save_field, save_mesh
from .morphing import ElasticityConfig, MorphError, morph_background, recover_wall_params
from .neural import (TrainConfig, TrainingError, load_dataset, load_net, predict_log_spacing,
                     predict_spacing, r_squared, save_dataset, save_net, train)
from .nurbs import InversionError, build_aerofoil, load_geometry
from .pipeline import (FLOW_SPACE, DEFAULT_SPACING, build_flow_dataset, build_geometry_dataset,
                       evaluate_split, geometry_space, grid_search)
from .recovery import RecoveryError
from .sampling import DesignSpace, load_design, sample_design, save_design
from .spacing import SpacingConfig, SpacingError, compute_target_spacing, derive_primitives, load_spacing, save_spacing
from .synthetic import SyntheticCase, background_for, synthesize_case
from .transfer import TransferError, load_background, save_background, transfer_spacing

log = logging.getLogger("meshsizer")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3
NUMERIC_ERRORS = (RecoveryError, SpacingError, MorphError, TrainingError, TransferError,
                  InversionError, FloatingPointError, np.linalg.LinAlgError, ValueError)


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# configuration


class Run:
    """Resolved configuration of one command invocation."""

    def __init__(self, command, config, base_dir, out_dir):
        self.command = command
        self.config = config
        self.base_dir = base_dir
        self.out_dir = out_dir
        self.seed = int(config.get("seed", 0))

    def path(self, key, required=True):
        paths = self.config.get("paths", {})
        if key not in paths:
            if required:
                raise UsageError(f"config has no paths.{key}")
            return None
        return self._resolve(paths[key])

    def _resolve(self, p):
        p = os.path.join(self.base_dir, p) if not os.path.isabs(p) else p
        if not os.path.exists(p):
            raise InputError(f"{p}: no such file")
        return p

    def field_paths(self):
        f = self.config.get("paths", {}).get("fields")
        if not isinstance(f, dict) or not f:
            raise UsageError("config has no paths.fields mapping")
        return {k: self._resolve(v) for k, v in f.items()}

    def output(self, name):
        os.makedirs(self.out_dir, exist_ok=True)
        return os.path.join(self.out_dir, name)

    def provenance(self):
        canon = json.dumps(self.config, sort_keys=True, separators=(",", ":"))
        return {"command": self.command,
                "config_hash": hashlib.sha256(canon.encode()).hexdigest(),
                "seed": self.seed,
                "versions": {"meshsizer": __version__, "numpy": np.__version__,
                             "scipy": scipy.__version__}}

    def spacing_config(self):
        d = dict(self.config.get("spacing", DEFAULT_SPACING.to_dict()))
        return SpacingConfig.from_dict(d)

    def train_config(self):
        d = dict(self.config.get("train", {}))
        d["seed"] = self.seed
        return TrainConfig(**d)

    def case(self):
        return SyntheticCase.from_dict(self.config.get("case", {}))


def _parse_grid(text):
    cells = []
    for item in text.split(","):
        try:
            l, n = item.split(":")
            cells.append((int(l), int(n)))
        except ValueError:
            raise UsageError(f"bad --grid entry '{item}', expected layers:neurons")
        if cells[-1][0] < 1 or cells[-1][1] < 1:
            raise UsageError(f"bad --grid entry '{item}', sizes must be positive")
    return cells


def load_run(args):
    if args.config is not None:
        if not os.path.exists(args.config):
            raise InputError(f"{args.config}: no such file")
        try:
            config = read_json(args.config)
        except json.JSONDecodeError as exc:
            raise InputError(f"{args.config}: parse failure: {exc}")
        if not isinstance(config, dict):
            raise UsageError(f"{args.config}: config must be a JSON object")
        base = os.path.dirname(os.path.abspath(args.config))
    else:
        config, base = {}, os.getcwd()
    config = json.loads(json.dumps(config))
    if args.seed is not None:
        config["seed"] = args.seed
    if args.strategy is not None or args.scaling is not None:
        sp = dict(config.get("spacing", DEFAULT_SPACING.to_dict()))
        if args.strategy is not None:
            sp["strategy"] = args.strategy
        if args.scaling is not None:
            sp["scaling"] = args.scaling
        config["spacing"] = sp
    if args.grid is not None:
        config["grid"] = [list(c) for c in _parse_grid(args.grid)]
    if args.out is not None:
        out = args.out
    elif "out" in config:
        out = os.path.join(base, config["out"])
    else:
        out = os.getcwd()
    return Run(args.command, config, base, out)


# ---------------------------------------------------------------------------
# commands


def cmd_synth(run):
    case = run.case()
    mesh, fields = synthesize_case(case)
    save_mesh(mesh, run.output("mesh.json"))
    for name, f in fields.items():
        save_field(f, run.output(f"{name}.json"))
    opts = run.config.get("background", {})
    n_wall = opts.get("n_wall", case.n_wall // 2 if case.n_wall % 2 == 0 else case.n_wall)
    n_rings = opts.get("n_rings", max(1, case.n_rings // 2))
    save_mesh(background_for(case, n_wall, n_rings), run.output("background_mesh.json"))
    write_json(run.output("case.json"), {"case": case.to_dict(), "provenance": run.provenance()})


def _read_fields(run, n_nodes):
    paths = run.field_paths()
    fields = {k: load_field(p) for k, p in paths.items()}
    for k, f in fields.items():
        if len(f) != n_nodes:
            raise ValueError(f"field '{k}' ({paths[k]}) has {len(f)} values for {n_nodes} nodes")
    if {"pressure", "mach"} <= fields.keys():
        return {"pressure": fields["pressure"], "mach": fields["mach"]}
    need = {"density", "momentum_x", "momentum_y", "energy"}
    if need <= fields.keys():
        mom = np.column_stack([fields["momentum_x"].values, fields["momentum_y"].values])
        p, m = derive_primitives(fields["density"], mom, fields["energy"])
        return {"pressure": p, "mach": m}
    raise UsageError("paths.fields needs pressure and mach, or density, momentum_x, "
                     "momentum_y and energy")


def cmd_compute_spacing(run):
    mesh = load_mesh(run.path("mesh"))
    fields = _read_fields(run, mesh.n_nodes)
    s = compute_target_spacing(mesh, fields, run.spacing_config())
    save_spacing(s, run.output("spacing.json"), run.provenance())


def cmd_transfer(run):
    mesh = load_mesh(run.path("mesh"))
    spacing = load_spacing(run.path("spacing"))
    bg_path = run.path("background_mesh")
    bg = transfer_spacing(mesh, spacing, load_mesh(bg_path, allow_inverted=True))
    save_background(bg, run.output("background.json"), os.path.abspath(bg_path), run.provenance())


def cmd_morph(run):
    bg = load_mesh(run.path("background_mesh"), allow_inverted=True)
    ref_path = run.path("geometry", required=False)
    ref = load_geometry(ref_path) if ref_path else build_aerofoil()
    new = load_geometry(run.path("new_geometry"))
    wall = recover_wall_params(bg, ref)
    cfg = ElasticityConfig(**run.config.get("elasticity", {}))
    save_mesh(morph_background(bg, wall, new, cfg), run.output("morphed_mesh.json"))
    write_json(run.output("wall.json"), {"wall": wall.to_dict(), "provenance": run.provenance()})


def _design_space(design):
    family = design.get("family", "flow")
    if "space" in design:
        return DesignSpace.from_list(design["space"])
    if family == "flow":
        return FLOW_SPACE
    if family == "geometry":
        return geometry_space()
    raise UsageError(f"unknown design family '{family}'")


def _sample(run):
    design = run.config.get("design", {})
    space = _design_space(design)
    counts = design.get("counts", {"train": 20, "validation": 5, "test": 80})
    splits = sample_design(space, counts, bool(design.get("scrambled", False)), run.seed,
                           design.get("starts"))
    return space, splits


def cmd_sample(run):
    space, splits = _sample(run)
    save_design(space, splits, run.output("design.json"), run.provenance())


def cmd_build_dataset(run):
    design_path = run.path("design", required=False)
    if design_path:
        _, splits = load_design(design_path)
    else:
        _, splits = _sample(run)
    opts = dict(run.config.get("dataset", {}))
    family = opts.pop("family", run.config.get("design", {}).get("family", "flow"))
    base, sp = run.case(), run.spacing_config()
    if family == "flow":
        ds, bg = build_flow_dataset(splits, base, spacing_cfg=sp, **opts)
    elif family == "geometry":
        el = ElasticityConfig(**run.config.get("elasticity", {}))
        ds, bg = build_geometry_dataset(splits, base, spacing_cfg=sp, elasticity=el, **opts)
    else:
        raise UsageError(f"unknown dataset family '{family}'")
    ds.meta["provenance"] = run.provenance()
    save_dataset(ds, run.output("dataset.json"))
    save_mesh(bg, run.output("background_mesh.json"))


def _train_cells(run, ds, cfg):
    g = run.config.get("grid")
    if isinstance(g, dict):
        return grid_search(ds, tuple(g["layers"]), tuple(g["neurons"]), cfg)
    if g is not None:
        cells = []
        for nl, nn in g:
            cells.extend(grid_search(ds, (int(nl),), (int(nn),), cfg))
        return cells
    hidden = [int(n) for n in run.config.get("network", {}).get("hidden", [10])]
    net, rep = train(ds, [ds.inputs.shape[1]] + hidden + [ds.outputs.shape[1]], cfg)
    x_te, y_te = ds.split("test")
    r2 = r_squared(np.log10(y_te), predict_log_spacing(net, x_te)) if len(x_te) > 1 else None
    return [{"layers": len(hidden), "neurons": hidden, "net": net, "report": rep, "r2": r2}]


def cmd_train(run):
    ds = load_dataset(run.path("dataset"))
    cells = _train_cells(run, ds, run.train_config())
    best = min(cells, key=lambda c: c["report"]["validation_cost"])
    net = best["net"]
    net.meta.update({"labels": list(ds.labels), "delta_min": ds.delta_min,
                     "delta_max": ds.delta_max, "provenance": run.provenance()})
    save_net(net, run.output("model.json"))
    report = {"cells": [{"layers": c["layers"], "neurons": c["neurons"], "r2": c["r2"],
                         "best_epoch": c["report"]["best_epoch"], "epochs": c["report"]["epochs"],
                         "train_cost": c["report"]["train_cost"],
                         "validation_cost": c["report"]["validation_cost"]} for c in cells],
              "selected": cells.index(best), "provenance": run.provenance()}
    write_json(run.output("train_report.json"), report)
    for c in cells:
        r2 = "n/a" if c["r2"] is None else f"{c['r2']:.4f}"
        print(f"layers={c['layers']} neurons={c['neurons']} test_R2={r2} "
              f"validation_cost={c['report']['validation_cost']:.3e}")


def _model_bounds(net):
    try:
        return float(net.meta["delta_min"]), float(net.meta["delta_max"])
    except (KeyError, TypeError):
        raise UsageError("model has no spacing bounds (delta_min/delta_max) in its metadata")


def cmd_predict(run):
    net = load_net(run.path("model"))
    bg_path = run.path("background_mesh")
    if "params" not in run.config:
        raise UsageError("config has no params entry")
    bg = load_mesh(bg_path, allow_inverted=True)
    pred = predict_spacing(net, np.asarray(run.config["params"], float), bg, _model_bounds(net))
    save_background(pred, run.output("prediction.json"), os.path.abspath(bg_path), run.provenance())


def cmd_evaluate(run):
    paths = run.config.get("paths", {})
    prov = run.provenance()
    if "model" in paths:
        net = load_net(run.path("model"))
        ds = load_dataset(run.path("dataset"))
        bg = load_mesh(run.path("background_mesh"), allow_inverted=True)
        split = run.config.get("split", "test")
        r2, hist = evaluate_split(net, ds, bg, split)
        write_histogram(hist, run.output("histogram.csv"), run.output("histogram.json"),
                        {"split": split, "r2_log10": r2, "provenance": prov})
        print(f"{split}: R2(log10)={r2:.4f} within_1.15={hist.within_115:.3f}")
        return
    mesh_path = run.path("background_mesh", required=False)
    mesh = load_mesh(mesh_path, allow_inverted=True) if mesh_path else None
    target = load_background(run.path("target"), mesh)
    pred = load_background(run.path("predicted"), target.mesh if mesh is None else mesh)
    hist = spacing_ratio_histogram(target, pred)
    write_histogram(hist, run.output("histogram.csv"), run.output("histogram.json"),
                    {"provenance": prov})
    err = spacing_error_map(target, pred)
    write_json(run.output("error_map.json"),
               {"name": err.name, "values": err.values.tolist(), "provenance": prov})
    print(f"within_1.15={hist.within_115:.3f} within_1.5={hist.within_150:.3f}")


COMMANDS = {
    "synth": cmd_synth,
    "compute-spacing": cmd_compute_spacing,
    "transfer": cmd_transfer,
    "morph": cmd_morph,
    "sample": cmd_sample,
    "build-dataset": cmd_build_dataset,
    "train": cmd_train,
    "predict": cmd_predict,
    "evaluate": cmd_evaluate,
}


def build_parser():
    p = _Parser(prog="meshsizer", description="Spacing-function computation, transfer and prediction.")
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--strategy", choices=["fv_dual", "fe_hybrid", "fe_split"])
    p.add_argument("--scaling", type=float)
    p.add_argument("--grid", help='layers:neurons cells, e.g. "1:10,2:20"')
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        run = load_run(args)
        COMMANDS[args.command](run)
    except UsageError as exc:
        print(f"meshsizer: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InputError as exc:
        print(f"meshsizer: {exc}", file=sys.stderr)
        return EXIT_IO
    except (OSError, MeshError, json.JSONDecodeError, KeyError) as exc:
        name = getattr(exc, "filename", None)
        msg = f"{name}: {exc.strerror}" if name else str(exc)
        print(f"meshsizer: I/O error: {msg}", file=sys.stderr)
        return EXIT_IO
    except NUMERIC_ERRORS as exc:
        print(f"meshsizer: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
