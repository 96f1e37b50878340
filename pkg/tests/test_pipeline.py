import numpy as np
import pytest

from meshsizer.evaluation import spacing_error_map
from meshsizer.mesh import SpacingField
from meshsizer.morphing import morph_background, recover_wall_params
from meshsizer.neural import TrainConfig, predict_spacing, train
from meshsizer.nurbs import build_aerofoil
from meshsizer.pipeline import (FLOW_SPACE, build_flow_dataset, build_geometry_dataset,
                                evaluate_split, geometry_space, grid_search)
from meshsizer.sampling import sample_design
from meshsizer.synthetic import SyntheticCase
from meshsizer.transfer import BackgroundMesh

SMALL = SyntheticCase(n_wall=40, n_layers=8, n_rings=16)


def test_flow_dataset_rows_and_determinism():
    pts = np.array([[0.5, 1.0], [0.8, 2.0], [0.5, 1.0]])
    ds, bg = build_flow_dataset({"train": pts}, SMALL, bg_wall=20, bg_rings=8)
    assert ds.outputs.shape == (3, bg.n_nodes)
    assert np.array_equal(ds.outputs[0], ds.outputs[2])
    assert not np.array_equal(ds.outputs[0], ds.outputs[1])
    assert np.all(ds.outputs >= ds.delta_min) and np.all(ds.outputs <= ds.delta_max)
    assert list(ds.splits["train"]) == [0, 1, 2]


def test_geometry_dataset_shares_connectivity():
    space = geometry_space()
    lo, hi = np.array(space.lower), np.array(space.upper)
    pts = np.array([lo + 0.3 * (hi - lo), lo + 0.7 * (hi - lo)])
    ds, ref_bg = build_geometry_dataset({"train": pts}, n_side=10, refine=2, n_rings=8)
    assert ds.outputs.shape == (2, ref_bg.n_nodes)
    assert not np.array_equal(ds.outputs[0], ds.outputs[1])
    wall = recover_wall_params(ref_bg, build_aerofoil())
    for p in pts:
        m = morph_background(ref_bg, wall, build_aerofoil(p[:22], p[22]))
        assert np.array_equal(m.triangles, ref_bg.triangles)
        assert not np.array_equal(m.nodes, ref_bg.nodes)


def test_case_failure_names_case():
    lo = np.array(geometry_space().lower)
    bad = lo.copy()
    bad[22] = 3.0
    with pytest.raises(ValueError, match="case 1"):
        build_geometry_dataset({"train": np.array([lo, bad])}, n_side=10, refine=2, n_rings=8)


@pytest.fixture(scope="module")
def flow_model():
    d = sample_design(FLOW_SPACE, {"train": 20, "validation": 5})
    d["test"] = np.array([[0.5, 1.5], [0.8, 1.5]])
    ds, bg = build_flow_dataset(d)
    net, _ = train(ds, [2, 10, bg.n_nodes])
    return ds, bg, net


def test_subsonic_error_below_transonic(flow_model):
    ds, bg, net = flow_model
    x, y = ds.split("test")
    b = (ds.delta_min, ds.delta_max)
    err = [spacing_error_map(BackgroundMesh(bg, SpacingField(yi, *b)),
                             predict_spacing(net, xi, bg, b)).values.max() for xi, yi in zip(x, y)]
    assert err[0] < err[1]


def test_evaluate_split_pools_cases(flow_model):
    ds, bg, net = flow_model
    r2, hist = evaluate_split(net, ds, bg, "test")
    assert hist.total == 2 * bg.n_elements
    assert r2 > 0.9


def test_grid_search_cells():
    d = sample_design(FLOW_SPACE, {"train": 6, "validation": 2, "test": 3})
    ds, _ = build_flow_dataset(d, SMALL, bg_wall=20, bg_rings=8)
    cells = grid_search(ds, (1, 2), (4, 6), TrainConfig(max_epochs=30))
    assert [(c["layers"], c["neurons"]) for c in cells] == [(1, 4), (1, 6), (2, 4), (2, 6)]
    assert all(c["net"].layer_sizes[1:-1] == [c["neurons"]] * c["layers"] for c in cells)
    assert all(np.isfinite(c["r2"]) for c in cells)
