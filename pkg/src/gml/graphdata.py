"""Graph datasets: loaders, operators, deterministic splits, generators and noise.

Supported on-disk layouts:

* content/cites text (citation corpora): ``<id> <f_1> ... <f_D> <label>`` per
  line in the content file, ``<cited> <citing>`` per line in the cites file.
* TU text layout: ``DS_A.txt`` (1-indexed edge list), ``DS_graph_indicator.txt``,
  ``DS_graph_labels.txt`` and optionally ``DS_node_labels.txt`` /
  ``DS_node_attributes.txt``.
* Generic CSV triplet in one directory: ``edges.csv`` (``src,dst`` header),
  ``features.csv`` (N rows of D numbers, optional header), ``labels.csv``
  (N integers, optional header).
* Tabular CSV with a named label column (no graph).

Splits are stored as JSON ``{"train": [...], "val": [...], "test": [...], "seed": s}``.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rng as rng_mod
from .errors import DatasetError, ParameterError, ParseError
from .ndtape import SparseMatrix

log = logging.getLogger(__name__)


@dataclass
class GraphDataset:
    """A node-attributed undirected graph with optional node labels.

    ``adjacency`` is the raw structure: symmetric, no self-loops, unit weights.
    For graph-level corpora batched into one disjoint union, ``graph_index``
    maps each node to its graph and ``graph_labels`` holds per-graph classes.
    """

    features: np.ndarray
    adjacency: SparseMatrix
    labels: np.ndarray | None = None
    num_classes: int = 0
    name: str = ""
    graph_index: np.ndarray | None = None
    graph_labels: np.ndarray | None = None
    report: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2:
            raise DatasetError("features must be a 2-D matrix")
        n = self.features.shape[0]
        if self.adjacency.shape != (n, n):
            raise DatasetError(f"adjacency shape {self.adjacency.shape} does not match {n} nodes")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape != (n,):
                raise DatasetError("every node needs exactly one label")
            if self.num_classes == 0 and n:
                self.num_classes = int(self.labels.max()) + 1

    @property
    def num_nodes(self) -> int:
        return self.features.shape[0]

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    @property
    def num_edges(self) -> int:
        """Undirected edge count."""
        return self.adjacency.nnz // 2

    @property
    def is_graph_task(self) -> bool:
        return self.graph_index is not None

    @property
    def num_graphs(self) -> int:
        return 0 if self.graph_labels is None else int(self.graph_labels.size)

    def with_features(self, features: np.ndarray) -> "GraphDataset":
        return GraphDataset(
            features, self.adjacency, self.labels, self.num_classes, self.name,
            self.graph_index, self.graph_labels, dict(self.report),
        )

    def with_adjacency(self, adjacency: SparseMatrix, name: str | None = None) -> "GraphDataset":
        return GraphDataset(
            self.features, adjacency, self.labels, self.num_classes, name or self.name,
            self.graph_index, self.graph_labels, dict(self.report),
        )


@dataclass
class GraphCollection:
    """M small graphs, each with one class label."""

    graphs: list[GraphDataset]
    labels: np.ndarray
    num_classes: int
    name: str = ""

    def __post_init__(self):
        if not self.graphs:
            raise DatasetError("a graph collection needs at least one graph")
        dims = {g.num_features for g in self.graphs}
        if len(dims) != 1:
            raise DatasetError(f"inconsistent feature dimensionality across graphs: {sorted(dims)}")
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.labels.shape != (len(self.graphs),):
            raise DatasetError("one label per graph required")

    def __len__(self) -> int:
        return len(self.graphs)

    @property
    def num_features(self) -> int:
        return self.graphs[0].num_features

    def node_counts(self) -> list[int]:
        return [g.num_nodes for g in self.graphs]

    def batch(self) -> GraphDataset:
        """Disjoint union of all graphs, for full-batch graph classification."""
        offsets = np.cumsum([0] + self.node_counts())
        rows, cols = [], []
        for g, off in zip(self.graphs, offsets):
            r = g.adjacency.row_indices()
            rows.append(r + off)
            cols.append(g.adjacency.col_idx + off)
        n = int(offsets[-1])
        adj = SparseMatrix.from_coo(n, n, np.concatenate(rows), np.concatenate(cols))
        index = np.repeat(np.arange(len(self.graphs)), self.node_counts())
        feats = np.concatenate([g.features for g in self.graphs], axis=0)
        return GraphDataset(
            feats, adj, None, self.num_classes, self.name,
            graph_index=index, graph_labels=self.labels.copy(),
        )


@dataclass
class Split:
    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    seed: int = 0

    def __post_init__(self):
        self.train = np.asarray(self.train, dtype=np.int64)
        self.val = np.asarray(self.val, dtype=np.int64)
        self.test = np.asarray(self.test, dtype=np.int64)

    def sizes(self) -> tuple[int, int, int]:
        return (self.train.size, self.val.size, self.test.size)

    def to_json(self) -> str:
        return json.dumps(
            {"train": self.train.tolist(), "val": self.val.tolist(), "test": self.test.tolist(), "seed": self.seed}
        )

    @classmethod
    def from_json(cls, text: str) -> "Split":
        d = json.loads(text)
        return cls(d["train"], d["val"], d["test"], int(d.get("seed", 0)))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Split)
            and self.seed == other.seed
            and all(np.array_equal(a, b) for a, b in zip(
                (self.train, self.val, self.test), (other.train, other.val, other.test)))
        )


# --------------------------------------------------------------------------- structure helpers


def adjacency_from_edges(n: int, src, dst) -> SparseMatrix:
    """Symmetric, self-loop free, duplicate-free unit adjacency from an edge list."""
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    keep = src != dst
    src, dst = src[keep], dst[keep]
    rows = np.concatenate([src, dst])
    cols = np.concatenate([dst, src])
    if rows.size:
        pairs = np.unique(rows * n + cols)
        rows, cols = pairs // n, pairs % n
    return SparseMatrix.from_coo(n, n, rows, cols, np.ones(rows.size))


def edge_list(adj: SparseMatrix) -> np.ndarray:
    """Undirected edges as an ``(E, 2)`` array with ``u < v``."""
    r, c = adj.row_indices(), adj.col_idx
    keep = r < c
    return np.stack([r[keep], c[keep]], axis=1)


def with_self_loops(adj: SparseMatrix) -> SparseMatrix:
    n = adj.n_rows
    eye = np.arange(n)
    rows = np.concatenate([adj.row_indices(), eye])
    cols = np.concatenate([adj.col_idx, eye])
    vals = np.concatenate([adj.vals, np.ones(n)])
    return SparseMatrix.from_coo(n, n, rows, cols, vals)


def normalize_adjacency(g: GraphDataset | SparseMatrix) -> SparseMatrix:
    """Symmetric normalization ``D^-1/2 (A + I) D^-1/2`` with ``D`` the degree of ``A + I``."""
    adj = g.adjacency if isinstance(g, GraphDataset) else g
    a_hat = with_self_loops(adj)
    deg = np.bincount(a_hat.row_indices(), weights=a_hat.vals, minlength=a_hat.n_rows)
    inv_sqrt = 1.0 / np.sqrt(deg)
    vals = a_hat.vals * inv_sqrt[a_hat.row_indices()] * inv_sqrt[a_hat.col_idx]
    return SparseMatrix(a_hat.n_rows, a_hat.n_cols, a_hat.row_ptr, a_hat.col_idx, vals)


def mean_aggregation_operator(g: GraphDataset | SparseMatrix) -> SparseMatrix:
    """Row-stochastic neighbour-mean operator; isolated nodes get an empty row."""
    adj = g.adjacency if isinstance(g, GraphDataset) else g
    deg = np.diff(adj.row_ptr).astype(np.float64)
    rows = adj.row_indices()
    return SparseMatrix(adj.n_rows, adj.n_cols, adj.row_ptr, adj.col_idx, 1.0 / deg[rows])


def readout_operator(graph_index: np.ndarray, num_graphs: int | None = None) -> SparseMatrix:
    """``M x N`` operator whose row g averages the nodes belonging to graph g."""
    graph_index = np.asarray(graph_index, dtype=np.int64)
    m = int(graph_index.max()) + 1 if num_graphs is None else num_graphs
    counts = np.bincount(graph_index, minlength=m)
    if np.any(counts == 0):
        raise DatasetError(f"graph {int(np.argmin(counts))} has no nodes")
    nodes = np.arange(graph_index.size)
    return SparseMatrix.from_coo(m, graph_index.size, graph_index, nodes, 1.0 / counts[graph_index])


# --------------------------------------------------------------------------- loaders


def _remap_first_seen(values) -> tuple[np.ndarray, list]:
    index: dict = {}
    out = np.empty(len(values), dtype=np.int64)
    for i, v in enumerate(values):
        out[i] = index.setdefault(v, len(index))
    return out, list(index)


def load_citation(content_path, cites_path, name: str = "") -> GraphDataset:
    """Load a content/cites citation corpus. Edges are symmetrized."""
    content_path, cites_path = Path(content_path), Path(cites_path)
    ids, feats, raw_labels = [], [], []
    width = None
    with open(content_path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 3:
                raise ParseError("expected id, features and label", content_path, lineno)
            if width is None:
                width = len(parts)
            elif len(parts) != width:
                raise ParseError(f"expected {width} fields, found {len(parts)}", content_path, lineno)
            try:
                feats.append([float(x) for x in parts[1:-1]])
            except ValueError as e:
                raise ParseError(f"non-numeric feature ({e})", content_path, lineno) from None
            ids.append(parts[0])
            raw_labels.append(parts[-1])
    if not ids:
        raise DatasetError(f"{content_path}: no nodes")
    node_of = {}
    for i, nid in enumerate(ids):
        if nid in node_of:
            raise ParseError(f"duplicate node id {nid!r}", content_path, i + 1)
        node_of[nid] = i
    labels, classes = _remap_first_seen(raw_labels)

    src, dst, dangling = [], [], 0
    with open(cites_path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise ParseError("expected two node ids", cites_path, lineno)
            a, b = node_of.get(parts[0]), node_of.get(parts[1])
            if a is None or b is None:
                dangling += 1
                continue
            src.append(a)
            dst.append(b)
    if dangling:
        log.warning("%s: dropped %d citations referencing unknown ids", cites_path, dangling)
    n = len(ids)
    adj = adjacency_from_edges(n, src, dst)
    report = {"dangling_edges": dangling, "raw_edges": len(src) + dangling, "classes": classes}
    return GraphDataset(np.array(feats), adj, labels, len(classes), name or content_path.stem, report=report)


def _read_numeric_rows(path: Path) -> list[list[float]]:
    rows = []
    with open(path, newline="") as fh:
        for lineno, rec in enumerate(csv.reader(fh), 1):
            if not rec or all(not c.strip() for c in rec):
                continue
            try:
                rows.append([float(c) for c in rec])
            except ValueError:
                if lineno == 1 and not rows:
                    continue  # header
                raise ParseError("non-numeric value", path, lineno) from None
    return rows


def load_csv_graph(directory, name: str = "") -> GraphDataset:
    """Load the generic ``edges.csv`` / ``features.csv`` / ``labels.csv`` triplet."""
    d = Path(directory)
    feats = _read_numeric_rows(d / "features.csv")
    if not feats:
        raise DatasetError(f"{d / 'features.csv'}: empty")
    labels = np.array([int(r[0]) for r in _read_numeric_rows(d / "labels.csv")], dtype=np.int64)
    edges = np.array(_read_numeric_rows(d / "edges.csv"), dtype=np.int64).reshape(-1, 2)
    n = len(feats)
    if labels.size != n:
        raise DatasetError(f"labels.csv has {labels.size} rows, features.csv has {n}")
    if edges.size and (edges.min() < 0 or edges.max() >= n):
        raise DatasetError("edges.csv references a node outside [0, N)")
    adj = adjacency_from_edges(n, edges[:, 0], edges[:, 1])
    return GraphDataset(np.array(feats), adj, labels, int(labels.max()) + 1, name or d.name)


def load_tu(directory, use_node_attributes: bool = False) -> GraphCollection:
    """Load a TU-format graph-classification corpus.

    Node features are the one-hot node labels when ``DS_node_labels.txt`` exists,
    with continuous attributes appended if ``use_node_attributes``. Corpora with
    attributes but no node labels use the attributes; corpora with neither get
    a constant feature.
    """
    d = Path(directory)
    found = sorted(d.glob("*_A.txt"))
    if not found:
        raise FileNotFoundError(f"no *_A.txt edge file in {d}")
    ds = found[0].name[: -len("_A.txt")]

    def path(suffix, required=True):
        p = d / f"{ds}_{suffix}.txt"
        if required and not p.exists():
            raise FileNotFoundError(f"missing mandatory file {p}")
        return p if p.exists() else None

    def read_ints(p):
        rows = _read_numeric_rows(p)
        return np.array(rows, dtype=np.int64)

    edges = read_ints(path("A")).reshape(-1, 2) - 1
    indicator = read_ints(path("graph_indicator")).reshape(-1) - 1
    graph_labels_raw = read_ints(path("graph_labels")).reshape(-1)
    n_total = indicator.size
    if n_total == 0:
        raise DatasetError(f"{ds}: no nodes")
    m = int(indicator.max()) + 1
    if graph_labels_raw.size != m:
        raise DatasetError(f"{ds}: {graph_labels_raw.size} graph labels for {m} graphs")
    if edges.size and (edges.min() < 0 or edges.max() >= n_total):
        raise DatasetError(f"{ds}: edge references unknown node")
    if np.any(indicator[edges[:, 0]] != indicator[edges[:, 1]]):
        bad = int(np.flatnonzero(indicator[edges[:, 0]] != indicator[edges[:, 1]])[0])
        raise DatasetError(f"{ds}: edge {bad + 1} crosses graphs")

    blocks = []
    nl_path = path("node_labels", required=False)
    na_path = path("node_attributes", required=False)
    if nl_path is not None:
        node_labels = read_ints(nl_path).reshape(-1)
        values = np.unique(node_labels)
        blocks.append((node_labels[:, None] == values[None, :]).astype(np.float64))
    if na_path is not None and (use_node_attributes or nl_path is None):
        blocks.append(np.array(_read_numeric_rows(na_path), dtype=np.float64).reshape(n_total, -1))
    features = np.concatenate(blocks, axis=1) if blocks else np.ones((n_total, 1))

    values = np.unique(graph_labels_raw)
    graph_labels = np.searchsorted(values, graph_labels_raw)

    order = np.argsort(indicator, kind="stable")
    if not np.array_equal(order, np.arange(n_total)):
        raise DatasetError(f"{ds}: graph indicator must list nodes grouped by graph")
    counts = np.bincount(indicator, minlength=m)
    offsets = np.concatenate([[0], np.cumsum(counts)])
    edge_graph = indicator[edges[:, 0]]
    graphs = []
    for gi in range(m):
        lo, hi = offsets[gi], offsets[gi + 1]
        e = edges[edge_graph == gi] - lo
        adj = adjacency_from_edges(hi - lo, e[:, 0], e[:, 1])
        graphs.append(GraphDataset(features[lo:hi], adj, name=f"{ds}[{gi}]"))
    return GraphCollection(graphs, graph_labels, int(values.size), ds)


def load_tabular(csv_path, label_column: str) -> tuple[np.ndarray, np.ndarray]:
    """Read a numeric CSV with one categorical label column.

    Features are standardized per column (zero mean, unit population variance);
    constant columns become zeros. Labels are remapped by first appearance.
    """
    csv_path = Path(csv_path)
    with open(csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or label_column not in reader.fieldnames:
            raise ParseError(f"label column {label_column!r} not found", csv_path, 1)
        cols = [c for c in reader.fieldnames if c != label_column]
        rows, raw_labels = [], []
        for lineno, rec in enumerate(reader, 2):
            try:
                rows.append([float(rec[c]) for c in cols])
            except (TypeError, ValueError):
                raise ParseError("non-numeric feature cell", csv_path, lineno) from None
            raw_labels.append(rec[label_column])
    if not rows:
        raise DatasetError(f"{csv_path}: no rows")
    x = np.array(rows)
    labels, _ = _remap_first_seen(raw_labels)
    return standardize(x), labels


def standardize(x: np.ndarray) -> np.ndarray:
    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    return np.where(sd > 0, (x - mu) / np.where(sd > 0, sd, 1.0), 0.0)


# --------------------------------------------------------------------------- splits


def _split(n: int, ratios, seed: int) -> Split:
    if n < 3:
        raise ParameterError(f"need at least 3 items to split, got {n}")
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or abs(sum(ratios) - 1.0) > 1e-9 or min(ratios) < 0:
        raise ParameterError(f"split ratios must be three non-negative numbers summing to 1, got {ratios}")
    perm = rng_mod.generator(seed, "split").permutation(n)
    n_train = math.floor(ratios[0] * n + 1e-9)
    n_val = math.floor(ratios[1] * n + 1e-9)
    return Split(
        np.sort(perm[:n_train]), np.sort(perm[n_train : n_train + n_val]), np.sort(perm[n_train + n_val :]), seed
    )


def split_nodes(n: int, ratios=(0.70, 0.15, 0.15), seed: int = 0) -> Split:
    return _split(n, ratios, seed)


def split_graphs(m: int, ratios=(0.75, 0.10, 0.15), seed: int = 0) -> Split:
    return _split(m, ratios, seed)


# --------------------------------------------------------------------------- generators


def _structure_only(n: int, adj: SparseMatrix, name: str) -> GraphDataset:
    return GraphDataset(np.zeros((n, 0)), adj, name=name)


def gen_barabasi_albert(n: int, m: int, seed: int = 0) -> GraphDataset:
    """Preferential attachment grown from an m-node clique.

    Every new node links to m distinct existing nodes drawn with probability
    proportional to degree, giving m(m-1)/2 + (n-m)m edges.
    """
    if not (1 <= m < n):
        raise ParameterError(f"Barabasi-Albert needs 1 <= m < n, got m={m}, n={n}")
    g = rng_mod.generator(seed, "barabasi_albert")
    deg = np.zeros(n)
    src, dst = [], []
    for u in range(m):
        for v in range(u + 1, m):
            src.append(u)
            dst.append(v)
    deg[:m] = m - 1
    for t in range(m, n):
        w = deg[:t]
        total = w.sum()
        p = w / total if total > 0 else np.full(t, 1.0 / t)
        targets = g.choice(t, size=m, replace=False, p=p)
        for v in np.sort(targets):
            src.append(t)
            dst.append(int(v))
        deg[targets] += 1
        deg[t] = m
    return _structure_only(n, adjacency_from_edges(n, src, dst), f"ba(n={n},m={m})")


def gen_random(n: int, p: float, seed: int = 0) -> GraphDataset:
    """Erdos-Renyi graph: each unordered pair independently with probability p."""
    if not 0.0 <= p <= 1.0:
        raise ParameterError(f"edge probability must be in [0, 1], got {p}")
    if n < 1:
        raise ParameterError("need at least one node")
    iu, ju = np.triu_indices(n, k=1)
    keep = rng_mod.generator(seed, "random_graph").random(iu.size) < p
    return _structure_only(n, adjacency_from_edges(n, iu[keep], ju[keep]), f"random(n={n},p={p})")


def gen_planted_partition(
    n: int,
    num_classes: int,
    num_features: int,
    p_in: float,
    p_out: float,
    feature_signal: float = 0.6,
    density: float = 0.05,
    seed: int = 0,
) -> GraphDataset:
    """Synthetic citation-like corpus: community graph with sparse binary word features.

    Each class owns a block of "topic words" whose activation probability is
    raised by ``feature_signal``; other words fire at ``density``. Edges
    fall within a class with probability ``p_in`` and across with ``p_out``.
    """
    if num_classes < 2 or n < num_classes:
        raise ParameterError("need at least two classes and one node per class")
    g = rng_mod.generator(seed, "planted_partition")
    labels = g.permutation(np.arange(n) % num_classes)
    iu, ju = np.triu_indices(n, k=1)
    same = labels[iu] == labels[ju]
    keep = g.random(iu.size) < np.where(same, p_in, p_out)
    adj = adjacency_from_edges(n, iu[keep], ju[keep])
    block = max(1, num_features // num_classes)
    prob = np.full((n, num_features), density)
    for c in range(num_classes):
        rows = labels == c
        prob[np.ix_(rows, np.arange(c * block, min((c + 1) * block, num_features)))] += feature_signal * density * 4
    feats = (g.random((n, num_features)) < np.clip(prob, 0, 1)).astype(np.float64)
    return GraphDataset(feats, adj, labels, num_classes, f"planted(n={n},C={num_classes})")


def add_laplace_noise(x: np.ndarray, scale: float, seed: int = 0) -> np.ndarray:
    """``x`` plus i.i.d. Laplace(0, scale) noise; ``scale == 0`` returns an exact copy."""
    if scale < 0:
        raise ParameterError(f"noise scale must be non-negative, got {scale}")
    x = np.asarray(x, dtype=np.float64)
    if scale == 0:
        return x.copy()
    return x + rng_mod.generator(seed, "laplace_noise").laplace(0.0, scale, size=x.shape)
