"""GCN, GAT, GraphSage and MLP forwards built from ndtape ops.

Parameters live in an ordered ``dict[str, Tensor]``. For node tasks the last
layer emits the class logits. For graph tasks every layer in ``layer_dims``
except the last is an encoder layer with an activation; node embeddings are
mean-pooled per graph and the last entry is a linear classifier.

Checkpoint layout (one directory per model)::

    manifest.json        {"spec": {...}, "seed": s, "tensors": [{"name", "shape", "file"}], "meta": {...}}
    <name>.f64           raw little-endian float64, row-major
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from . import ndtape as nd
from . import rng as rng_mod
from .errors import ConfigError, DimensionError
from .graphdata import GraphDataset, mean_aggregation_operator, normalize_adjacency, readout_operator, with_self_loops
from .ndtape import SparseMatrix, Tensor

ARCHITECTURES = ("GCN", "GAT", "SAGE", "MLP")
SPARSE_INPUT_DENSITY = 0.1

# hidden width, layer count, heads per (task, architecture)
DEFAULTS = {
    "node": {"GCN": (64, 2, 1), "SAGE": (64, 3, 1), "GAT": (8, 2, 4), "MLP": (64, 2, 1)},
    "graph": {"GCN": (16, 2, 1), "SAGE": (16, 3, 1), "GAT": (8, 2, 4), "MLP": (16, 2, 1)},
}


@dataclass(frozen=True)
class ModelSpec:
    architecture: str
    layer_dims: tuple[int, ...]
    heads: int = 1
    task: str = "node"
    dropout: float = 0.0

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ConfigError(f"unknown architecture {self.architecture!r}", "architecture")
        if self.task not in ("node", "graph"):
            raise ConfigError(f"unknown task {self.task!r}", "task")
        object.__setattr__(self, "layer_dims", tuple(int(d) for d in self.layer_dims))
        if len(self.layer_dims) < (3 if self.task == "graph" else 2) or min(self.layer_dims) < 1:
            raise ConfigError(f"invalid layer_dims {self.layer_dims}", "layer_dims")
        if self.heads < 1:
            raise ConfigError("heads must be >= 1", "heads")

    @property
    def activation(self) -> str:
        return "elu" if self.architecture == "GAT" else "relu"

    @property
    def num_classes(self) -> int:
        return self.layer_dims[-1]

    @property
    def in_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def num_layers(self) -> int:
        return len(self.layer_dims) - 1


def default_spec(
    architecture: str,
    in_dim: int,
    num_classes: int,
    task: str = "node",
    hidden: int | None = None,
    num_layers: int | None = None,
    heads: int | None = None,
    dropout: float = 0.0,
) -> ModelSpec:
    """Spec with the standard widths: node 64 / 64 / 8x4 heads, graph 16 / 16 / 8.

    ``num_layers`` counts message-passing layers. For graph tasks the readout
    classifier is added on top.
    """
    arch = architecture.upper()
    if arch in ("GRAPHSAGE", "GSAGE"):
        arch = "SAGE"
    if arch not in ARCHITECTURES:
        raise ConfigError(f"unknown architecture {architecture!r}", "architecture")
    h0, l0, k0 = DEFAULTS[task][arch]
    hidden = hidden or h0
    num_layers = num_layers or l0
    heads = heads or k0
    if task == "node":
        dims = (in_dim,) + (hidden,) * (num_layers - 1) + (num_classes,)
    else:
        dims = (in_dim,) + (hidden,) * num_layers + (num_classes,)
    return ModelSpec(arch, dims, heads if arch == "GAT" else 1, task, dropout)


class GraphOperators:
    """Per-dataset sparse operators, built lazily and shared read-only."""

    def __init__(self, data: GraphDataset):
        self.data = data

    @cached_property
    def norm_adj(self) -> SparseMatrix:
        return normalize_adjacency(self.data)

    @cached_property
    def mean_op(self) -> SparseMatrix:
        return mean_aggregation_operator(self.data)

    @cached_property
    def attention_pattern(self) -> SparseMatrix:
        return with_self_loops(self.data.adjacency)

    @cached_property
    def readout(self) -> SparseMatrix | None:
        if self.data.graph_index is None:
            return None
        return readout_operator(self.data.graph_index, self.data.num_graphs)

    @cached_property
    def features(self) -> Tensor:
        return nd.constant(self.data.features)

    @cached_property
    def model_input(self) -> Tensor | SparseMatrix:
        """Features as fed to the first layer: CSR when mostly zeros (bag-of-words corpora)."""
        x = self.data.features
        if x.size and np.count_nonzero(x) <= SPARSE_INPUT_DENSITY * x.size:
            return SparseMatrix.from_dense(x)
        return self.features


# --------------------------------------------------------------------------- init


def _glorot(g: np.random.Generator, fan_in: int, fan_out: int, shape=None) -> Tensor:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return nd.parameter(g.uniform(-bound, bound, size=shape or (fan_in, fan_out)))


def _encoder_dims(spec: ModelSpec) -> list[tuple[int, int, bool]]:
    """(in, out, is_output_layer) for every message-passing / MLP layer."""
    dims = spec.layer_dims[:-1] if spec.task == "graph" else spec.layer_dims
    n = len(dims) - 1
    out = []
    for i in range(n):
        last = spec.task == "node" and i == n - 1
        out.append((dims[i], dims[i + 1], last))
    return out


def _gat_in(spec: ModelSpec, i: int, d_in: int) -> int:
    return d_in if i == 0 else d_in * spec.heads


def init_params(spec: ModelSpec, seed: int) -> dict[str, Tensor]:
    """Glorot-uniform weights and zero biases from a seeded stream."""
    g = rng_mod.generator(seed, f"init/{spec.architecture}")
    params: dict[str, Tensor] = {}
    for i, (d_in, d_out, last) in enumerate(_encoder_dims(spec)):
        p = f"layer{i}"
        if spec.architecture in ("GCN", "MLP"):
            params[f"{p}.weight"] = _glorot(g, d_in, d_out)
            params[f"{p}.bias"] = nd.parameter(np.zeros((1, d_out)))
        elif spec.architecture == "SAGE":
            params[f"{p}.w_self"] = _glorot(g, d_in, d_out)
            params[f"{p}.w_neigh"] = _glorot(g, d_in, d_out)
            params[f"{p}.bias"] = nd.parameter(np.zeros((1, d_out)))
        else:
            fan_in = _gat_in(spec, i, d_in)
            for k in range(spec.heads):
                params[f"{p}.head{k}.weight"] = _glorot(g, fan_in, d_out)
                params[f"{p}.head{k}.att_src"] = _glorot(g, d_out, 1)
                params[f"{p}.head{k}.att_dst"] = _glorot(g, d_out, 1)
            width = d_out if last else d_out * spec.heads
            params[f"{p}.bias"] = nd.parameter(np.zeros((1, width)))
    if spec.task == "graph":
        d_emb = spec.layer_dims[-2] * (spec.heads if spec.architecture == "GAT" else 1)
        params["classifier.weight"] = _glorot(g, d_emb, spec.num_classes)
        params["classifier.bias"] = nd.parameter(np.zeros((1, spec.num_classes)))
    return params


def num_parameters(params: dict[str, Tensor]) -> int:
    return sum(t.values.size for t in params.values())


# --------------------------------------------------------------------------- forwards


def _act(spec: ModelSpec, x: Tensor) -> Tensor:
    return nd.elu(x) if spec.activation == "elu" else nd.relu(x)


def _maybe_dropout(spec: ModelSpec, h, rng: np.random.Generator | None):
    if rng is None or spec.dropout == 0.0:
        return h
    if isinstance(h, SparseMatrix):
        h = nd.constant(h.to_dense())
    return nd.dropout(h, spec.dropout, rng)


def _project(h, w: Tensor) -> Tensor:
    """``h @ w`` for a dense tensor or a constant CSR input."""
    return nd.spmm(h, w) if isinstance(h, SparseMatrix) else nd.matmul(h, w)


def _check_input(spec: ModelSpec, x) -> None:
    if len(x.shape) != 2 or x.shape[1] != spec.in_dim:
        raise DimensionError(f"{spec.architecture} expects {spec.in_dim} input features, got shape {x.shape}")


def _run_layers(spec, params, x, layer_fn, rng):
    _check_input(spec, x)
    h = x
    acts = []
    for i, (_, _, last) in enumerate(_encoder_dims(spec)):
        h = _maybe_dropout(spec, h, rng)
        h = layer_fn(i, h, last)
        if not last:
            h = _act(spec, h)
        acts.append(h)
    return h, acts


def forward_gcn(params, norm_adj: SparseMatrix, x: Tensor, spec: ModelSpec, rng=None):
    """``H' = act(A_hat H W + b)``; the node-task output layer is linear."""

    def layer(i, h, last):
        return nd.add(nd.spmm(norm_adj, _project(h, params[f"layer{i}.weight"])), params[f"layer{i}.bias"])

    return _run_layers(spec, params, x, layer, rng)


def forward_sage(params, mean_op: SparseMatrix, x: Tensor, spec: ModelSpec, rng=None):
    """``H' = act(H W_self + mean_neigh(H) W_neigh + b)``."""

    def layer(i, h, last):
        p = f"layer{i}"
        own = _project(h, params[f"{p}.w_self"])
        neigh = nd.spmm(mean_op, _project(h, params[f"{p}.w_neigh"]))
        return nd.add(nd.add(own, neigh), params[f"{p}.bias"])

    return _run_layers(spec, params, x, layer, rng)


def gat_attention(params, prefix: str, pattern: SparseMatrix, h: Tensor) -> tuple[Tensor, Tensor]:
    """One attention head: returns (per-edge coefficients, aggregated output)."""
    wh = _project(h, params[f"{prefix}.weight"])
    src = nd.matmul(wh, params[f"{prefix}.att_src"])
    dst = nd.matmul(wh, params[f"{prefix}.att_dst"])
    # edge (i, j): i receives from j, score a_src . Wh_i + a_dst . Wh_j
    e = nd.add(nd.gather_rows(src, pattern.row_indices()), nd.gather_rows(dst, pattern.col_idx))
    alpha = nd.segment_softmax(nd.leaky_relu(e, 0.2), pattern)
    return alpha, nd.edge_spmm(pattern, alpha, wh)


def forward_gat(params, pattern: SparseMatrix, x: Tensor, spec: ModelSpec, rng=None):
    """Multi-head attention over ``N(i) + {i}``; hidden heads concatenated, output heads averaged.

    ``pattern`` must already contain self-loops.
    """

    def layer(i, h, last):
        outs = [gat_attention(params, f"layer{i}.head{k}", pattern, h)[1] for k in range(spec.heads)]
        if last:
            merged = outs[0]
            for o in outs[1:]:
                merged = nd.add(merged, o)
            merged = nd.scale(merged, 1.0 / spec.heads)
        else:
            merged = nd.concat_cols(outs) if len(outs) > 1 else outs[0]
        return nd.add(merged, params[f"layer{i}.bias"])

    return _run_layers(spec, params, x, layer, rng)


def forward_mlp(params, x: Tensor, spec: ModelSpec, rng=None):
    """Plain perceptron on node features; the graph is never touched."""

    def layer(i, h, last):
        return nd.add(_project(h, params[f"layer{i}.weight"]), params[f"layer{i}.bias"])

    return _run_layers(spec, params, x, layer, rng)


def readout_mean(node_embeddings: Tensor, readout: SparseMatrix | np.ndarray) -> Tensor:
    """Per-graph mean of node embeddings. ``readout`` is an operator or a membership vector."""
    if not isinstance(readout, SparseMatrix):
        readout = readout_operator(np.asarray(readout))
    return nd.spmm(readout, node_embeddings)


def forward(spec: ModelSpec, params, ops: GraphOperators, x: Tensor | None = None, rng=None):
    """Dispatch on architecture. Returns ``(logits, layer_activations)``."""
    x = ops.model_input if x is None else x
    if spec.architecture == "GCN":
        h, acts = forward_gcn(params, ops.norm_adj, x, spec, rng)
    elif spec.architecture == "SAGE":
        h, acts = forward_sage(params, ops.mean_op, x, spec, rng)
    elif spec.architecture == "GAT":
        h, acts = forward_gat(params, ops.attention_pattern, x, spec, rng)
    else:
        h, acts = forward_mlp(params, x, spec, rng)
    if spec.task == "graph":
        if ops.readout is None:
            raise ConfigError("graph-task model needs a batched graph collection", "task")
        pooled = readout_mean(h, ops.readout)
        h = nd.add(nd.matmul(pooled, params["classifier.weight"]), params["classifier.bias"])
    return h, acts


# --------------------------------------------------------------------------- checkpoints


def snapshot(params: dict[str, Tensor]) -> dict[str, np.ndarray]:
    return {k: v.values.copy() for k, v in params.items()}


def restore(params: dict[str, Tensor], values: dict[str, np.ndarray]) -> None:
    for k, v in values.items():
        params[k].values = v.copy()


def spec_to_dict(spec: ModelSpec) -> dict:
    d = asdict(spec)
    d["layer_dims"] = list(spec.layer_dims)
    return d


def spec_from_dict(d: dict) -> ModelSpec:
    return ModelSpec(d["architecture"], tuple(d["layer_dims"]), d.get("heads", 1), d.get("task", "node"), d.get("dropout", 0.0))


def _safe(name: str) -> str:
    return name.replace("/", "_")


def save_checkpoint(directory, spec: ModelSpec, params: dict, seed: int, meta: dict | None = None) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    tensors = []
    for name, t in params.items():
        arr = t.values if isinstance(t, Tensor) else np.asarray(t)
        fname = f"{_safe(name)}.f64"
        arr.astype("<f8").tofile(d / fname)
        tensors.append({"name": name, "shape": list(arr.shape), "file": fname})
    manifest = {"spec": spec_to_dict(spec), "seed": int(seed), "tensors": tensors, "meta": meta or {}}
    (d / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return d


def load_checkpoint(directory) -> tuple[ModelSpec, dict[str, Tensor], dict]:
    d = Path(directory)
    manifest = json.loads((d / "manifest.json").read_text())
    params = {}
    for entry in manifest["tensors"]:
        arr = np.fromfile(d / entry["file"], dtype="<f8").reshape(entry["shape"])
        params[entry["name"]] = nd.parameter(arr)
    meta = dict(manifest.get("meta", {}))
    meta["seed"] = manifest.get("seed")
    return spec_from_dict(manifest["spec"]), params, meta


@dataclass
class Model:
    """A spec with its parameters and init seed."""

    spec: ModelSpec
    seed: int
    params: dict[str, Tensor] = field(default_factory=dict)

    @classmethod
    def create(cls, spec: ModelSpec, seed: int) -> "Model":
        return cls(spec, seed, init_params(spec, seed))

    def __call__(self, ops: GraphOperators, x: Tensor | None = None, rng=None):
        return forward(self.spec, self.params, ops, x, rng)
