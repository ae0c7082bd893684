"""Post-hoc analysis: linear CKA, ensembles, Wilcoxon signed-rank, seed aggregation.

File formats
------------
ActivationDump directory::

    manifest.json   {"meta": {...}, "layers": [{"file": "layer0.f64", "shape": [N, d]}, ...]}
    layer<i>.f64    raw little-endian float64, row-major

CKA matrix CSV: header ``layer_a,layer_b,cka`` then one row per pair.
MetricTable CSV: ``config,n,mean,std`` where ``std`` is empty for a single seed.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.stats import norm, rankdata

from .errors import DimensionError, DomainError, ParameterError

# --------------------------------------------------------------------------- CKA


def _centered(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise DimensionError(f"CKA expects a 2-D activation matrix, got shape {x.shape}")
    return x - x.mean(axis=0, keepdims=True)


def linear_cka(xa, xb) -> float:
    """Linear centered kernel alignment between two representations of the same rows."""
    a, b = _centered(xa), _centered(xb)
    if a.shape[0] != b.shape[0]:
        raise DimensionError(f"row counts differ: {a.shape[0]} vs {b.shape[0]}")
    if a.shape[0] < 2:
        raise DimensionError("CKA needs at least two rows")
    # Rescaling leaves CKA unchanged and keeps the Gram products well inside float range.
    sa, sb = np.abs(a).max(initial=0.0), np.abs(b).max(initial=0.0)
    if sa == 0 or sb == 0:
        return 0.0
    a, b = a / sa, b / sb
    cross = np.linalg.norm(b.T @ a, "fro") ** 2
    denom = np.linalg.norm(a.T @ a, "fro") * np.linalg.norm(b.T @ b, "fro")
    if denom == 0:
        return 0.0
    return float(cross / denom)


def cka_matrix(layers_a: Sequence, layers_b: Sequence) -> np.ndarray:
    """``out[i, j] = linear_cka(layers_a[i], layers_b[j])``."""
    return np.array([[linear_cka(a, b) for b in layers_b] for a in layers_a])


def cka_matrix_csv(matrix: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["layer_a", "layer_b", "cka"])
    for i, j in itertools.product(range(matrix.shape[0]), range(matrix.shape[1])):
        w.writerow([i + 1, j + 1, f"{matrix[i, j]:.6f}"])
    return buf.getvalue()


@dataclass
class ActivationDump:
    """Per-layer hidden representations of one model on a fixed node set."""

    layers: list[np.ndarray]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.layers = [np.asarray(x, dtype=np.float64) for x in self.layers]
        if not self.layers:
            raise ParameterError("an activation dump needs at least one layer")
        rows = {x.shape[0] for x in self.layers}
        if len(rows) != 1 or any(x.ndim != 2 for x in self.layers):
            raise DimensionError(f"all layers must be 2-D with one row per node, got {[x.shape for x in self.layers]}")

    @property
    def num_rows(self) -> int:
        return self.layers[0].shape[0]

    def save(self, directory) -> Path:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        entries = []
        for i, x in enumerate(self.layers):
            name = f"layer{i}.f64"
            np.ascontiguousarray(x).astype("<f8").tofile(d / name)
            entries.append({"file": name, "shape": list(x.shape)})
        (d / "manifest.json").write_text(json.dumps({"meta": self.meta, "layers": entries}, indent=2, sort_keys=True))
        return d

    @classmethod
    def load(cls, directory) -> "ActivationDump":
        d = Path(directory)
        manifest = json.loads((d / "manifest.json").read_text())
        layers = []
        for e in manifest["layers"]:
            arr = np.fromfile(d / e["file"], dtype="<f8")
            shape = tuple(e["shape"])
            if arr.size != math.prod(shape):
                raise DimensionError(f"{e['file']}: expected {shape}, found {arr.size} values")
            layers.append(arr.reshape(shape))
        return cls(layers, manifest.get("meta", {}))


def compare_dumps(a: ActivationDump, b: ActivationDump) -> np.ndarray:
    if a.num_rows != b.num_rows:
        raise DimensionError(f"dumps cover different node sets ({a.num_rows} vs {b.num_rows} rows)")
    return cka_matrix(a.layers, b.layers)


# --------------------------------------------------------------------------- ensembles


def ensemble_predict(member_probs: Sequence) -> np.ndarray:
    """Argmax of the mean class distribution; ties go to the lowest class index."""
    if len(member_probs) == 0:
        raise ParameterError("ensemble needs at least one member")
    mats = [np.asarray(p, dtype=np.float64) for p in member_probs]
    if len({m.shape for m in mats}) != 1 or mats[0].ndim != 2:
        raise DimensionError(f"member probability shapes differ: {[m.shape for m in mats]}")
    # Sum in a canonical order so the result does not depend on member order.
    stacked = np.sort(np.stack(mats), axis=0)
    return np.argmax(stacked.sum(axis=0) / len(mats), axis=1)


def ensemble_accuracy(member_probs: Sequence, labels, rows=None) -> float:
    pred = ensemble_predict(member_probs)
    labels = np.asarray(labels)
    if rows is not None:
        pred, labels = pred[rows], labels[rows]
    return 100.0 * float(np.mean(pred == labels))


# --------------------------------------------------------------------------- Wilcoxon


EXACT_MAX_N = 20


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float
    p_value: float
    n: int
    method: str


def _exact_upper_tail(ranks: np.ndarray, statistic: float) -> float:
    """P(W+ >= statistic) under the null, counting every sign assignment.

    Ranks are doubled so average ranks become integers, then a subset-sum
    count over the doubled ranks enumerates all 2^n assignments at once.
    """
    doubled = np.rint(ranks * 2).astype(np.int64)
    counts = np.zeros(int(doubled.sum()) + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in doubled:
        counts[r:] = counts[r:] + counts[: counts.size - r].copy()
    target = int(np.rint(statistic * 2))
    return float(counts[target:].sum() / 2.0 ** len(ranks))


def wilcoxon_signed_rank(x: Sequence[float], y: Sequence[float]) -> WilcoxonResult:
    """One-sided signed-rank test of ``x > y``.

    Zero differences are dropped and tied magnitudes share average ranks.
    Exact for up to 20 non-zero differences, normal approximation with
    continuity and tie corrections above that.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise DimensionError(f"paired samples must be 1-D and equal length, got {x.shape} and {y.shape}")
    if x.size < 5:
        raise ParameterError(f"need at least 5 pairs, got {x.size}")
    d = x - y
    d = d[d != 0]
    if d.size == 0:
        raise DomainError("all paired differences are zero; the test is undefined")
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    n = d.size
    if n <= EXACT_MAX_N:
        return WilcoxonResult(w_plus, _exact_upper_tail(ranks, w_plus), n, "exact")
    mean = n * (n + 1) / 4.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float((tie_counts**3 - tie_counts).sum()) / 48.0
    z = (w_plus - mean - 0.5) / math.sqrt(var)
    return WilcoxonResult(w_plus, float(norm.sf(z)), n, "normal")


# --------------------------------------------------------------------------- aggregation


@dataclass(frozen=True)
class MetricSummary:
    config: str
    n: int
    mean: float
    std: float | None

    def format(self, digits: int = 2) -> str:
        if self.std is None:
            return f"{self.mean:.{digits}f}"
        return f"{self.mean:.{digits}f} ± {self.std:.{digits}f}"


@dataclass
class MetricTable:
    rows: list[MetricSummary]

    def get(self, config: str) -> MetricSummary:
        for r in self.rows:
            if r.config == config:
                return r
        raise KeyError(config)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["config", "n", "mean", "std"])
        for r in self.rows:
            w.writerow([r.config, r.n, f"{r.mean:.4f}", "" if r.std is None else f"{r.std:.4f}"])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps([r.__dict__ for r in self.rows], indent=2)


def aggregate(rows: Iterable[Mapping], key: str = "config", value: str = "test_acc") -> MetricTable:
    """Mean and sample standard deviation of ``value`` per ``key``, in first-seen order."""
    groups: dict[str, list[float]] = {}
    for r in rows:
        groups.setdefault(str(r[key]), []).append(float(r[value]))
    out = []
    for name, vals in groups.items():
        arr = np.array(vals)
        std = float(arr.std(ddof=1)) if arr.size >= 2 else None
        out.append(MetricSummary(name, arr.size, float(arr.mean()), std))
    return MetricTable(out)


def read_metric_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
