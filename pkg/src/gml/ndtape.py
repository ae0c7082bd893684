"""Dense/sparse float64 tensors with a recorded reverse-mode gradient tape.

Usage::

    w = Tensor(np.ones((3, 2)), requires_grad=True)
    with Tape() as tape:
        loss = nd.sum(nd.matmul(x, w))
        grads = tape.backward(loss)
    grads[w.node_id]

Operations are recorded only while a :class:`Tape` is active and at least one
input requires a gradient. Outside a tape every op is a plain numpy
computation, which is how evaluation passes run.

Only one broadcast form is accepted by the binary elementwise ops: a ``1 x C``
row vector against an ``n x C`` matrix. Anything else raises
:class:`DimensionError`.
"""
from __future__ import annotations

import contextvars
import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DimensionError, DomainError, NumericError, ParameterError

EPS = 1e-12

_ids = itertools.count(1)
_active: contextvars.ContextVar["Tape | None"] = contextvars.ContextVar("gml_active_tape", default=None)


class Tensor:
    """A float64 array that can take part in a recorded computation."""

    __slots__ = ("values", "requires_grad", "node_id")

    def __init__(self, values, requires_grad: bool = False):
        arr = np.array(values, dtype=np.float64)
        if not np.isfinite(arr).all():
            raise NumericError("tensor values must be finite")
        self.values = arr
        self.requires_grad = bool(requires_grad)
        self.node_id = next(_ids)

    @classmethod
    def _wrap(cls, arr: np.ndarray, requires_grad: bool) -> "Tensor":
        t = cls.__new__(cls)
        t.values = arr
        t.requires_grad = requires_grad
        t.node_id = next(_ids)
        return t

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def ndim(self) -> int:
        return self.values.ndim

    def item(self) -> float:
        if self.values.size != 1:
            raise DimensionError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.values.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.values

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}, id={self.node_id})"


def constant(values) -> Tensor:
    return Tensor(values, requires_grad=False)


def parameter(values) -> Tensor:
    return Tensor(values, requires_grad=True)


def detach(t: Tensor) -> Tensor:
    """Value-only snapshot. The returned array is read-only."""
    arr = t.values.copy()
    arr.setflags(write=False)
    return Tensor._wrap(arr, False)


# --------------------------------------------------------------------------- sparse


class SparseMatrix:
    """CSR matrix with validated structure. Values are constants for the tape."""

    __slots__ = ("n_rows", "n_cols", "row_ptr", "col_idx", "vals", "_csr", "_csr_t")

    def __init__(self, n_rows: int, n_cols: int, row_ptr, col_idx, vals):
        self.n_rows = int(n_rows)
        self.n_cols = int(n_cols)
        self.row_ptr = np.asarray(row_ptr, dtype=np.int64)
        self.col_idx = np.asarray(col_idx, dtype=np.int64)
        self.vals = np.asarray(vals, dtype=np.float64)
        self._csr = None
        self._csr_t = None
        self._validate()

    def _validate(self) -> None:
        rp, ci = self.row_ptr, self.col_idx
        if rp.shape != (self.n_rows + 1,):
            raise DimensionError(f"row_ptr must have length n_rows+1={self.n_rows + 1}")
        if rp[0] != 0 or rp[-1] != ci.size or ci.size != self.vals.size:
            raise DimensionError("row_ptr endpoints inconsistent with col_idx/vals")
        if np.any(np.diff(rp) < 0):
            raise DimensionError("row_ptr must be monotone")
        if ci.size:
            if ci.min() < 0 or ci.max() >= self.n_cols:
                raise DimensionError("column index out of range")
            rows = np.repeat(np.arange(self.n_rows), np.diff(rp))
            same_row = rows[1:] == rows[:-1]
            if np.any(np.diff(ci)[same_row] <= 0):
                raise DimensionError("column indices must be strictly increasing within each row")
        if not np.isfinite(self.vals).all():
            raise NumericError("sparse values must be finite")

    @classmethod
    def from_coo(cls, n_rows: int, n_cols: int, rows, cols, vals=None, *, sum_duplicates: bool = True):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.ones(rows.size) if vals is None else np.asarray(vals, dtype=np.float64)
        m = sp.coo_matrix((vals, (rows, cols)), shape=(n_rows, n_cols)).tocsr()
        if sum_duplicates:
            m.sum_duplicates()
        m.sort_indices()
        return cls(n_rows, n_cols, m.indptr, m.indices, m.data)

    @classmethod
    def from_scipy(cls, m) -> "SparseMatrix":
        m = sp.csr_matrix(m, dtype=np.float64)
        m.sum_duplicates()
        m.sort_indices()
        return cls(m.shape[0], m.shape[1], m.indptr, m.indices, m.data)

    @classmethod
    def from_dense(cls, dense) -> "SparseMatrix":
        return cls.from_scipy(sp.csr_matrix(np.asarray(dense, dtype=np.float64)))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self) -> int:
        return int(self.col_idx.size)

    def row_indices(self) -> np.ndarray:
        """Row index of every stored entry (COO rows)."""
        return np.repeat(np.arange(self.n_rows, dtype=np.int64), np.diff(self.row_ptr))

    def to_scipy(self) -> sp.csr_matrix:
        if self._csr is None:
            self._csr = sp.csr_matrix((self.vals, self.col_idx, self.row_ptr), shape=self.shape)
        return self._csr

    def _transposed(self) -> sp.csr_matrix:
        if self._csr_t is None:
            self._csr_t = self.to_scipy().T.tocsr()
        return self._csr_t

    def to_dense(self) -> np.ndarray:
        return self.to_scipy().toarray()

    def is_symmetric(self, tol: float = 0.0) -> bool:
        if self.n_rows != self.n_cols:
            return False
        d = self.to_scipy() - self._transposed()
        return d.nnz == 0 or float(np.abs(d.data).max()) <= tol

    def __repr__(self) -> str:
        return f"SparseMatrix({self.n_rows}x{self.n_cols}, nnz={self.nnz})"


# --------------------------------------------------------------------------- tape


@dataclass
class _Op:
    out_id: int
    input_ids: tuple[int | None, ...]
    backward: Callable[[np.ndarray], Sequence[np.ndarray | None]]


@dataclass
class Tape:
    """Ordered record of operations for one forward/backward step."""

    ops: list[_Op] = field(default_factory=list)
    _tokens: list = field(default_factory=list, repr=False)

    def __enter__(self) -> "Tape":
        self._tokens.append(_active.set(self))
        return self

    def __exit__(self, *exc) -> None:
        _active.reset(self._tokens.pop())

    def __len__(self) -> int:
        return len(self.ops)

    def backward(self, loss: Tensor) -> dict[int, np.ndarray]:
        """Reverse sweep from a scalar loss; returns ``{node_id: gradient}``.

        Gradients of fan-out nodes are summed. The record is consumed.
        """
        if loss.values.size != 1:
            raise ParameterError(f"backward needs a scalar loss, got shape {loss.shape}")
        grads: dict[int, np.ndarray] = {loss.node_id: np.ones_like(loss.values)}
        try:
            for op in reversed(self.ops):
                g = grads.get(op.out_id)
                if g is None:
                    continue
                for in_id, in_g in zip(op.input_ids, op.backward(g)):
                    if in_id is None or in_g is None:
                        continue
                    prev = grads.get(in_id)
                    grads[in_id] = in_g if prev is None else prev + in_g
        finally:
            self.ops = []
        return grads


def active_tape() -> Tape | None:
    return _active.get()


def backward(loss: Tensor, tape: Tape | None = None) -> dict[int, np.ndarray]:
    tape = tape if tape is not None else _active.get()
    if tape is None:
        raise ParameterError("no active tape to differentiate")
    return tape.backward(loss)


def _finite(arr: np.ndarray, name: str) -> np.ndarray:
    if not np.isfinite(arr).all():
        raise NumericError(f"{name} produced non-finite values")
    return arr


def _emit(name: str, out: np.ndarray, inputs: Sequence[Tensor], bwd) -> Tensor:
    _finite(out, name)
    tape = _active.get()
    track = tape is not None and any(t.requires_grad for t in inputs)
    res = Tensor._wrap(out, track)
    if track:
        ids = tuple(t.node_id if t.requires_grad else None for t in inputs)
        tape.ops.append(_Op(res.node_id, ids, bwd))
    return res


def _need2d(t: Tensor, name: str) -> None:
    if t.ndim != 2:
        raise DimensionError(f"{name} expects a 2-D tensor, got shape {t.shape}")


# --------------------------------------------------------------------------- linear algebra


def matmul(a: Tensor, b: Tensor) -> Tensor:
    _need2d(a, "matmul")
    _need2d(b, "matmul")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul inner dimensions differ: {a.shape} @ {b.shape}")
    av, bv = a.values, b.values
    ga, gb = a.requires_grad, b.requires_grad
    return _emit("matmul", av @ bv, (a, b), lambda g: (g @ bv.T if ga else None, av.T @ g if gb else None))


def spmm(a: SparseMatrix, b: Tensor) -> Tensor:
    """Sparse operator times dense tensor; the operator is a constant."""
    _need2d(b, "spmm")
    if a.n_cols != b.shape[0]:
        raise DimensionError(f"spmm dimensions differ: {a.shape} @ {b.shape}")
    out = np.asarray(a.to_scipy() @ b.values)
    return _emit("spmm", out, (b,), lambda g: (np.asarray(a._transposed() @ g),))


def transpose(x: Tensor) -> Tensor:
    _need2d(x, "transpose")
    return _emit("transpose", x.values.T.copy(), (x,), lambda g: (g.T,))


# --------------------------------------------------------------------------- elementwise


def _broadcast_kind(a: Tensor, b: Tensor, name: str) -> str:
    if a.shape == b.shape:
        return "same"
    if a.ndim == 2 and b.ndim == 2 and a.shape[1] == b.shape[1]:
        if b.shape[0] == 1:
            return "b_row"
        if a.shape[0] == 1:
            return "a_row"
    raise DimensionError(f"{name}: incompatible shapes {a.shape} and {b.shape}")


def _reduce(g: np.ndarray, kind: str, side: str) -> np.ndarray:
    if kind == f"{side}_row":
        return g.sum(axis=0, keepdims=True)
    return g


def add(a: Tensor, b: Tensor) -> Tensor:
    kind = _broadcast_kind(a, b, "add")
    return _emit("add", a.values + b.values, (a, b), lambda g: (_reduce(g, kind, "a"), _reduce(g, kind, "b")))


def sub(a: Tensor, b: Tensor) -> Tensor:
    kind = _broadcast_kind(a, b, "sub")
    return _emit("sub", a.values - b.values, (a, b), lambda g: (_reduce(g, kind, "a"), -_reduce(g, kind, "b")))


def hadamard(a: Tensor, b: Tensor) -> Tensor:
    kind = _broadcast_kind(a, b, "hadamard")
    av, bv = a.values, b.values
    return _emit(
        "hadamard",
        av * bv,
        (a, b),
        lambda g: (_reduce(g * bv, kind, "a"), _reduce(g * av, kind, "b")),
    )


def scale(x: Tensor, c: float) -> Tensor:
    c = float(c)
    return _emit("scale", x.values * c, (x,), lambda g: (g * c,))


def relu(x: Tensor) -> Tensor:
    mask = x.values > 0
    return _emit("relu", np.where(mask, x.values, 0.0), (x,), lambda g: (g * mask,))


def leaky_relu(x: Tensor, slope: float = 0.2) -> Tensor:
    mask = x.values > 0
    slope_arr = np.where(mask, 1.0, slope)
    return _emit("leaky_relu", x.values * slope_arr, (x,), lambda g: (g * slope_arr,))


def elu(x: Tensor, alpha: float = 1.0) -> Tensor:
    xv = x.values
    neg = alpha * np.expm1(np.minimum(xv, 0.0))
    out = np.where(xv > 0, xv, neg)
    deriv = np.where(xv > 0, 1.0, neg + alpha)
    return _emit("elu", out, (x,), lambda g: (g * deriv,))


def log(x: Tensor) -> Tensor:
    """Natural log with inputs clamped below at ``EPS``; negative input is an error."""
    xv = x.values
    if np.any(xv < 0):
        raise DomainError("log of negative value")
    clamped = np.maximum(xv, EPS)
    live = xv > EPS
    return _emit("log", np.log(clamped), (x,), lambda g: (np.where(live, g / clamped, 0.0),))


def dropout(x: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    if not 0.0 <= rate < 1.0:
        raise ParameterError("dropout rate must be in [0, 1)")
    if rate == 0.0:
        return x
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return _emit("dropout", x.values * mask, (x,), lambda g: (g * mask,))


# --------------------------------------------------------------------------- reductions & shape


def sum(x: Tensor) -> Tensor:  # noqa: A001 - mirrors the op name
    shape = x.shape
    return _emit("sum", np.array(x.values.sum()), (x,), lambda g: (np.full(shape, float(g)),))


def mean_rows(x: Tensor) -> Tensor:
    _need2d(x, "mean_rows")
    n = x.shape[0]
    return _emit("mean_rows", x.values.mean(axis=0, keepdims=True), (x,), lambda g: (np.repeat(g / n, n, axis=0),))


def l1_norm(x: Tensor) -> Tensor:
    sign = np.sign(x.values)
    return _emit("l1_norm", np.array(np.abs(x.values).sum()), (x,), lambda g: (float(g) * sign,))


def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    if not parts:
        raise DimensionError("concat_cols needs at least one tensor")
    for p in parts:
        _need2d(p, "concat_cols")
    n = parts[0].shape[0]
    if any(p.shape[0] != n for p in parts):
        raise DimensionError("concat_cols: row counts differ")
    bounds = np.cumsum([0] + [p.shape[1] for p in parts])
    out = np.concatenate([p.values for p in parts], axis=1)
    return _emit(
        "concat_cols",
        out,
        tuple(parts),
        lambda g: tuple(g[:, bounds[i] : bounds[i + 1]] for i in range(len(parts))),
    )


def gather_rows(x: Tensor, index) -> Tensor:
    _need2d(x, "gather_rows")
    idx = np.asarray(index, dtype=np.int64)
    n = x.shape[0]
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise DimensionError("gather_rows index out of range")

    def bwd(g):
        out = np.zeros((n, g.shape[1]))
        np.add.at(out, idx, g)
        return (out,)

    return _emit("gather_rows", x.values[idx], (x,), bwd)


def normalize_rows(x: Tensor) -> Tensor:
    """Divide each row by its sum."""
    _need2d(x, "normalize_rows")
    s = x.values.sum(axis=1, keepdims=True)
    if np.any(s == 0):
        raise NumericError("normalize_rows: zero row sum")
    out = x.values / s

    def bwd(g):
        return ((g - (g * out).sum(axis=1, keepdims=True)) / s,)

    return _emit("normalize_rows", out, (x,), bwd)


# --------------------------------------------------------------------------- probability


def softmax_rows(z: Tensor, T: float = 1.0) -> Tensor:
    """Row-wise ``softmax(z / T)`` with max subtraction."""
    if not T > 0:
        raise ParameterError(f"temperature must be positive, got {T}")
    _need2d(z, "softmax_rows")
    s = z.values / T
    e = np.exp(s - s.max(axis=1, keepdims=True))
    p = e / e.sum(axis=1, keepdims=True)

    def bwd(g):
        return ((p * (g - (g * p).sum(axis=1, keepdims=True))) / T,)

    return _emit("softmax_rows", p, (z,), bwd)


def _check_prob(p: np.ndarray, name: str) -> None:
    if np.any(p < 0):
        raise DomainError(f"{name}: negative probability")


def kl_divergence(p: Tensor, q: Tensor) -> Tensor:
    """Row-averaged ``KL(p || q)``; ``q`` is clamped at ``EPS`` before the log."""
    _need2d(p, "kl_divergence")
    if p.shape != q.shape:
        raise DimensionError(f"kl_divergence shapes differ: {p.shape} vs {q.shape}")
    pv, qv = p.values, q.values
    _check_prob(pv, "kl_divergence")
    _check_prob(qv, "kl_divergence")
    n = pv.shape[0]
    qc = np.maximum(qv, EPS)
    logp = np.log(np.maximum(pv, EPS))
    plogp = np.where(pv > 0, pv * logp, 0.0)
    val = (plogp - pv * np.log(qc)).sum() / n

    def bwd(g):
        g = float(g)
        dp = g * (logp - np.log(qc) + 1.0) / n
        dq = np.where(qv > EPS, -g * pv / qc / n, 0.0)
        return (dp, dq)

    return _emit("kl_divergence", np.array(val), (p, q), bwd)


def entropy_rows(p: Tensor) -> Tensor:
    """Per-row negative entropy ``sum_c p log p`` (<= 0), shape ``n x 1``."""
    _need2d(p, "entropy_rows")
    pv = p.values
    _check_prob(pv, "entropy_rows")
    logp = np.log(np.maximum(pv, EPS))
    out = np.where(pv > 0, pv * logp, 0.0).sum(axis=1, keepdims=True)
    return _emit("entropy_rows", out, (p,), lambda g: (g * (logp + 1.0),))


def cross_entropy(logits: Tensor, labels, mask) -> Tensor:
    """Mean over ``mask`` rows of ``-log softmax(logits)[i, labels[i]]``."""
    _need2d(logits, "cross_entropy")
    n, C = logits.shape
    labels = np.asarray(labels, dtype=np.int64)
    mask = np.asarray(mask, dtype=np.int64)
    if mask.size == 0:
        raise ParameterError("cross_entropy: empty mask")
    if mask.min() < 0 or mask.max() >= n:
        raise DomainError("cross_entropy: mask index out of range")
    y = labels[mask] if labels.shape[0] == n else labels
    if y.shape[0] != mask.size:
        raise DimensionError("cross_entropy: labels must cover all rows or exactly the masked rows")
    if y.size and (y.min() < 0 or y.max() >= C):
        raise DomainError("cross_entropy: label out of range")
    z = logits.values[mask]
    shifted = z - z.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(mask.size)
    loss = (lse - shifted[rows, y]).mean()

    def bwd(g):
        soft = np.exp(shifted - lse[:, None])
        soft[rows, y] -= 1.0
        full = np.zeros((n, C))
        np.add.at(full, mask, soft * (float(g) / mask.size))
        return (full,)

    return _emit("cross_entropy", np.array(loss), (logits,), bwd)


# --------------------------------------------------------------------------- edge-wise (attention)


def segment_softmax(e: Tensor, pattern: SparseMatrix) -> Tensor:
    """Softmax of per-edge scores ``e`` (E x 1) within each CSR row of ``pattern``."""
    if e.shape != (pattern.nnz, 1):
        raise DimensionError(f"segment_softmax expects ({pattern.nnz}, 1), got {e.shape}")
    seg = pattern.row_indices()
    ev = e.values[:, 0]
    m = np.full(pattern.n_rows, -np.inf)
    np.maximum.at(m, seg, ev)
    ex = np.exp(ev - m[seg])
    denom = np.bincount(seg, weights=ex, minlength=pattern.n_rows)
    alpha = (ex / denom[seg])[:, None]

    def bwd(g):
        dots = np.bincount(seg, weights=(g * alpha)[:, 0], minlength=pattern.n_rows)
        return (alpha * (g - dots[seg][:, None]),)

    return _emit("segment_softmax", alpha, (e,), bwd)


def edge_spmm(pattern: SparseMatrix, w: Tensor, h: Tensor) -> Tensor:
    """``out[i] = sum_{(i,j) in pattern} w_ij * h[j]`` with learnable edge weights ``w`` (E x 1)."""
    _need2d(h, "edge_spmm")
    if w.shape != (pattern.nnz, 1):
        raise DimensionError(f"edge_spmm weights must be ({pattern.nnz}, 1), got {w.shape}")
    if pattern.n_cols != h.shape[0]:
        raise DimensionError("edge_spmm dimensions differ")
    rows = pattern.row_indices()
    cols = pattern.col_idx
    m = sp.csr_matrix((w.values[:, 0], cols, pattern.row_ptr), shape=pattern.shape)
    hv = h.values

    def bwd(g):
        dw = (g[rows] * hv[cols]).sum(axis=1, keepdims=True)
        dh = np.asarray(m.T @ g)
        return (dw, dh)

    return _emit("edge_spmm", np.asarray(m @ hv), (w, h), bwd)
