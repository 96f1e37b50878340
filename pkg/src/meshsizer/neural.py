"""
Feed-forward network for spacing prediction.

ReLU hidden layers, linear output, trained by full-batch ADAM on the mean
squared error with early stopping on a validation split. Inputs are scaled
to [0, 1] and outputs are min-max scaled ``log10`` spacings, both using the
training-split ranges.
"""

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from ._jsonio import read_json, write_json
from .mesh import SpacingField
from .transfer import BackgroundMesh

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_epochs: int = 20000
    patience: int = 200
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning rate must be positive")
        if self.patience < 1:
            raise ValueError("patience must be at least 1")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be at least 1")

    def to_dict(self):
        return asdict(self)


@dataclass(eq=False)
class FeedForwardNet:
    """Weights ``theta[l]`` have shape (n_l, n_{l+1}); z_{l+1} = F(z_l @ theta[l] + b[l])."""

    layer_sizes: list
    weights: list
    biases: list
    input_min: np.ndarray = None
    input_max: np.ndarray = None
    output_min: np.ndarray = None
    output_max: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.layer_sizes = [int(n) for n in self.layer_sizes]
        self.weights = [np.asarray(w, float) for w in self.weights]
        self.biases = [np.asarray(b, float) for b in self.biases]
        ls = self.layer_sizes
        if len(self.weights) != len(ls) - 1 or len(self.biases) != len(ls) - 1:
            raise ValueError("number of weight matrices does not match layer_sizes")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (ls[l], ls[l + 1]) or b.shape != (ls[l + 1],):
                raise ValueError(f"layer {l}: weight {w.shape} / bias {b.shape} inconsistent with sizes")
        n_in, n_out = ls[0], ls[-1]
        self.input_min = np.zeros(n_in) if self.input_min is None else np.asarray(self.input_min, float)
        self.input_max = np.ones(n_in) if self.input_max is None else np.asarray(self.input_max, float)
        self.output_min = np.zeros(n_out) if self.output_min is None else np.asarray(self.output_min, float)
        self.output_max = np.ones(n_out) if self.output_max is None else np.asarray(self.output_max, float)
        if np.any(self.input_max <= self.input_min) or np.any(self.output_max <= self.output_min):
            raise ValueError("normalisation ranges need max > min")

    @property
    def n_inputs(self):
        return self.layer_sizes[0]

    @property
    def n_outputs(self):
        return self.layer_sizes[-1]

    def copy(self):
        return FeedForwardNet(list(self.layer_sizes), [w.copy() for w in self.weights],
                              [b.copy() for b in self.biases], self.input_min.copy(),
                              self.input_max.copy(), self.output_min.copy(),
                              self.output_max.copy(), dict(self.meta))

    # normalisation
    def scale_inputs(self, x):
        return (np.asarray(x, float) - self.input_min) / (self.input_max - self.input_min)

    def scale_outputs(self, log_delta):
        return (np.asarray(log_delta, float) - self.output_min) / (self.output_max - self.output_min)

    def unscale_outputs(self, y):
        return self.output_min + np.asarray(y, float) * (self.output_max - self.output_min)


def init_net(layer_sizes, seed=0):
    """Fan-in scaled uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    ws, bs = [], []
    for a, b in zip(layer_sizes[:-1], layer_sizes[1:]):
        lim = np.sqrt(6.0 / a)
        ws.append(rng.uniform(-lim, lim, (a, b)))
        bs.append(np.zeros(b))
    return FeedForwardNet(list(layer_sizes), ws, bs)


def forward(net, z, return_all=False):
    """Network output for normalised inputs ``z`` (one vector or a batch)."""
    z = np.asarray(z, float)
    single = z.ndim == 1
    a = z[None, :] if single else z
    if a.shape[1] != net.n_inputs:
        raise ValueError(f"expected {net.n_inputs} inputs, got {a.shape[1]}")
    acts = [a]
    last = len(net.weights) - 1
    for l, (w, b) in enumerate(zip(net.weights, net.biases)):
        a = a @ w + b
        if l < last:
            a = np.maximum(a, 0.0)
        acts.append(a)
    if return_all:
        return acts
    return a[0] if single else a


def cost(net, z, y):
    """Mean squared error over all cases and outputs, in normalised space."""
    y = np.atleast_2d(np.asarray(y, float))
    if y.size == 0:
        raise ValueError("empty split")
    h = forward(net, np.atleast_2d(z))
    return float(np.mean((y - h) ** 2))


def gradients(net, z, y):
    """Cost and its gradient w.r.t. every weight matrix and bias vector."""
    z = np.atleast_2d(np.asarray(z, float))
    y = np.atleast_2d(np.asarray(y, float))
    acts = forward(net, z, return_all=True)
    n, m = y.shape
    delta = 2.0 * (acts[-1] - y) / (n * m)
    gw = [None] * len(net.weights)
    gb = [None] * len(net.weights)
    for l in range(len(net.weights) - 1, -1, -1):
        gw[l] = acts[l].T @ delta
        gb[l] = delta.sum(axis=0)
        if l > 0:
            delta = (delta @ net.weights[l].T) * (acts[l] > 0)
    return float(np.mean((acts[-1] - y) ** 2)), gw, gb


# ---------------------------------------------------------------------------
# dataset


@dataclass(eq=False)
class Dataset:
    """Input parameters and background-mesh spacing of several cases.

    ``splits`` maps ``train``/``validation``/``test`` to row indices.
    """

    inputs: np.ndarray
    outputs: np.ndarray
    splits: dict
    labels: tuple = ()
    delta_min: float = None
    delta_max: float = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, float))
        self.outputs = np.atleast_2d(np.asarray(self.outputs, float))
        if len(self.inputs) != len(self.outputs):
            raise ValueError("inputs and outputs have different numbers of cases")
        self.splits = {k: np.asarray(v, int) for k, v in self.splits.items()}
        if np.any(self.outputs <= 0):
            raise ValueError("spacing outputs must be positive")
        if self.delta_max is not None and np.any(self.outputs > self.delta_max * (1 + 1e-12)):
            raise ValueError("spacing outputs exceed delta_max")

    def split(self, name):
        idx = self.splits.get(name, np.empty(0, int))
        return self.inputs[idx], self.outputs[idx]

    def to_dict(self):
        return {"inputs": self.inputs.tolist(), "outputs": self.outputs.tolist(),
                "splits": {k: v.tolist() for k, v in self.splits.items()},
                "labels": list(self.labels), "delta_min": self.delta_min,
                "delta_max": self.delta_max, "meta": self.meta}

    @classmethod
    def from_dict(cls, d):
        return cls(d["inputs"], d["outputs"], d["splits"], tuple(d.get("labels", ())),
                   d.get("delta_min"), d.get("delta_max"), d.get("meta", {}))


def save_dataset(ds, path):
    write_json(path, ds.to_dict())


def load_dataset(path):
    return Dataset.from_dict(read_json(path))


def _ranges(a):
    lo, hi = a.min(axis=0), a.max(axis=0)
    hi = np.where(hi > lo, hi, lo + 1.0)   # constant columns: unit range
    return lo, hi


# ---------------------------------------------------------------------------
# training


def train(dataset, layer_sizes, cfg=TrainConfig()):
    """Fit a network with full-batch ADAM and validation early stopping.

    Returns
    -------
    net : FeedForwardNet
        Weights of the epoch with the lowest validation cost.
    report : dict
        ``best_epoch``, ``epochs``, ``train_cost``, ``validation_cost`` and
        the per-epoch ``history`` of (train, validation) costs.
    """
    x_tr, d_tr = dataset.split("train")
    x_va, d_va = dataset.split("validation")
    if len(x_tr) == 0 or len(x_va) == 0:
        raise TrainingError("training and validation splits must be nonempty")
    layer_sizes = list(layer_sizes)
    if layer_sizes[0] != dataset.inputs.shape[1] or layer_sizes[-1] != dataset.outputs.shape[1]:
        raise TrainingError(f"layer sizes {layer_sizes} do not match data "
                            f"({dataset.inputs.shape[1]} inputs, {dataset.outputs.shape[1]} outputs)")
    net = init_net(layer_sizes, cfg.seed)
    net.input_min, net.input_max = _ranges(x_tr)
    net.output_min, net.output_max = _ranges(np.log10(d_tr))
    z_tr, y_tr = net.scale_inputs(x_tr), net.scale_outputs(np.log10(d_tr))
    z_va, y_va = net.scale_inputs(x_va), net.scale_outputs(np.log10(d_va))

    params = net.weights + net.biases
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    b1, b2 = cfg.beta1, cfg.beta2
    best = (np.inf, 0, [p.copy() for p in params])
    history = []
    wait = 0
    epoch = 0
    for epoch in range(1, cfg.max_epochs + 1):
        c_tr, gw, gb = gradients(net, z_tr, y_tr)
        if not np.isfinite(c_tr):
            raise TrainingError(f"training diverged (non-finite cost) at epoch {epoch}")
        for k, g in enumerate(gw + gb):
            m[k] = b1 * m[k] + (1 - b1) * g
            v[k] = b2 * v[k] + (1 - b2) * g * g
            mh = m[k] / (1 - b1 ** epoch)
            vh = v[k] / (1 - b2 ** epoch)
            params[k] -= cfg.learning_rate * mh / (np.sqrt(vh) + cfg.eps)
        c_va = cost(net, z_va, y_va)
        history.append((c_tr, c_va))
        if c_va < best[0]:
            best = (c_va, epoch, [p.copy() for p in params])
            wait = 0
        else:
            wait += 1
            if wait >= cfg.patience:
                break
    nl = len(net.weights)
    net.weights = best[2][:nl]
    net.biases = best[2][nl:]
    net.meta = {"train_config": cfg.to_dict(), "best_epoch": best[1]}
    report = {"best_epoch": best[1], "epochs": epoch,
              "train_cost": cost(net, z_tr, y_tr), "validation_cost": best[0],
              "history": history}
    return net, report


def r_squared(targets, predictions):
    """Coefficient of determination over all entries jointly."""
    t = np.asarray(targets, float).ravel()
    p = np.asarray(predictions, float).ravel()
    if t.shape != p.shape:
        raise ValueError("targets and predictions differ in shape")
    if t.size < 2:
        raise ValueError("R^2 needs at least two values")
    sst = np.sum((t - t.mean()) ** 2)
    if sst == 0:
        raise ValueError("targets have zero variance")
    return float(1.0 - np.sum((t - p) ** 2) / sst)


def predict_log_spacing(net, params):
    """Predicted log10 spacing for raw (un-normalised) parameter vectors."""
    z = net.scale_inputs(np.atleast_2d(params))
    return net.unscale_outputs(forward(net, z))


def predict_spacing(net, params, bg_mesh, bounds):
    """Background mesh with the predicted nodal spacing for one parameter vector."""
    params = np.asarray(params, float)
    if params.shape != (net.n_inputs,):
        raise ValueError(f"expected {net.n_inputs} parameters, got shape {params.shape}")
    if bg_mesh.n_nodes != net.n_outputs:
        raise ValueError(f"network predicts {net.n_outputs} values for a "
                         f"{bg_mesh.n_nodes}-node background mesh")
    if np.any(params < net.input_min) or np.any(params > net.input_max):
        log.warning("parameters %s outside the training range; extrapolating", params.tolist())
    dmin, dmax = bounds
    delta = np.clip(10.0 ** predict_log_spacing(net, params)[0], dmin, dmax)
    return BackgroundMesh(bg_mesh, SpacingField(delta, dmin, dmax, {"source": "prediction"}))


# ---------------------------------------------------------------------------
# JSON


def net_to_dict(net):
    return {"layer_sizes": net.layer_sizes,
            "weights": [w.ravel().tolist() for w in net.weights],
            "biases": [b.tolist() for b in net.biases],
            "input_norm": {"min": net.input_min.tolist(), "max": net.input_max.tolist()},
            "output_norm": {"min": net.output_min.tolist(), "max": net.output_max.tolist()},
            "meta": net.meta}


def net_from_dict(d):
    ls = d["layer_sizes"]
    ws = [np.asarray(w, float).reshape(a, b) for w, a, b in zip(d["weights"], ls[:-1], ls[1:])]
    return FeedForwardNet(ls, ws, d["biases"], d["input_norm"]["min"], d["input_norm"]["max"],
                          d["output_norm"]["min"], d["output_norm"]["max"], d.get("meta", {}))


def save_net(net, path):
    write_json(path, net_to_dict(net))


def load_net(path):
    return net_from_dict(read_json(path))
