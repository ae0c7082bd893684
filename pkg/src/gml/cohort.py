"""Mutual learning for cohorts of graph models, and distillation into an MLP.

Per epoch every active member runs a forward pass and publishes a read-only
snapshot of its (possibly reweighted) class distribution on the training rows.
Each member then minimises

    CE(logits, y) + mean_k KL(snapshot_k || own)  [+ beta * (|chi|_1 + |phi|_1)]  [- gamma * entropy]

against its peers' snapshots and takes one Adam step. All members update
simultaneously from the same snapshots, so the order in which they are
processed (or the number of worker threads) does not change the result.

Variants: ``Ind`` trains the target alone with cross-entropy; ``GML`` adds the
mutual KL; ``GML-W`` reweights both distributions with a learned per-class
vector; ``GML-C`` adds the entropy bonus; ``GML-Co`` does both.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import ndtape as nd
from . import rng as rng_mod
from .errors import ConfigError, DimensionError, NumericError
from .graphdata import GraphDataset, Split
from .models import GraphOperators, Model, ModelSpec, default_spec, load_checkpoint, save_checkpoint
from .ndtape import SparseMatrix, Tensor

log = logging.getLogger(__name__)

VARIANTS = ("Ind", "GML", "GML-W", "GML-C", "GML-Co")
PENALTY_SIGNS = ("bonus", "literal")


# --------------------------------------------------------------------------- configuration


@dataclass
class MemberConfig:
    architecture: str
    seed: int = 0
    hidden: int | None = None
    num_layers: int | None = None
    heads: int | None = None
    dropout: float = 0.0

    def build_spec(self, in_dim: int, num_classes: int, task: str) -> ModelSpec:
        return default_spec(
            self.architecture, in_dim, num_classes, task, self.hidden, self.num_layers, self.heads, self.dropout
        )


@dataclass
class CohortConfig:
    """Everything that defines one cohort training run.

    Defaults follow the node-classification regime; :meth:`for_task` switches
    to the graph-classification one (T=6, patience 200, h=16).
    """

    members: list[MemberConfig]
    target_index: int = 0
    variant: str = "GML"
    gamma: float = 0.0
    beta: float = 0.0
    temperature: float = 1.0
    learning_rate: float = 0.01
    weight_decay: float = 5e-4
    max_epochs: int = 3000
    patience: int = 1500
    graph_aware: bool = False
    weight_hidden: int = 64
    penalty_sign: str = "bonus"
    task: str = "node"

    def __post_init__(self):
        self.members = [m if isinstance(m, MemberConfig) else MemberConfig(**m) for m in self.members]
        self.validate()

    @classmethod
    def for_task(cls, task: str, members, **overrides) -> "CohortConfig":
        base = {"task": task}
        if task == "graph":
            base.update(temperature=6.0, patience=200, max_epochs=1000, weight_hidden=16)
        base.update(overrides)
        return cls(members=members, **base)

    def validate(self) -> None:
        if not self.members:
            raise ConfigError("at least one member required", "members")
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}", "variant")
        if not 0 <= self.target_index < len(self.members):
            raise ConfigError("target_index outside the member list", "target_index")
        if self.variant != "Ind" and len(self.members) < 2:
            raise ConfigError(f"variant {self.variant} needs at least two members", "members")
        for name in ("gamma", "beta", "weight_decay"):
            if getattr(self, name) < 0:
                raise ConfigError("must be >= 0", name)
        for name in ("temperature", "learning_rate"):
            if not getattr(self, name) > 0:
                raise ConfigError("must be > 0", name)
        for name in ("max_epochs", "patience", "weight_hidden"):
            if int(getattr(self, name)) < 1:
                raise ConfigError("must be >= 1", name)
        if self.penalty_sign not in PENALTY_SIGNS:
            raise ConfigError(f"expected one of {PENALTY_SIGNS}", "penalty_sign")
        if self.task not in ("node", "graph"):
            raise ConfigError("expected 'node' or 'graph'", "task")
        if self.graph_aware and self.task == "graph":
            raise ConfigError("graph-aware weighting is defined for node tasks only", "graph_aware")

    @property
    def uses_weighting(self) -> bool:
        return self.variant in ("GML-W", "GML-Co")

    @property
    def uses_penalty(self) -> bool:
        return self.variant in ("GML-C", "GML-Co")

    @property
    def active_members(self) -> list[int]:
        return [self.target_index] if self.variant == "Ind" else list(range(len(self.members)))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["members"] = [asdict(m) for m in self.members]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CohortConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown field(s) {sorted(unknown)}", sorted(unknown)[0])
        if "members" not in d:
            raise ConfigError("missing", "members")
        members = []
        for i, m in enumerate(d["members"]):
            if isinstance(m, str):
                m = {"architecture": m}
            try:
                members.append(MemberConfig(**m))
            except TypeError as e:
                raise ConfigError(str(e), f"members[{i}]") from None
        args = {k: v for k, v in d.items() if k != "members"}
        types = {f.name: f.type for f in fields(cls)}
        for k, v in args.items():
            if types[k] in ("float",) and isinstance(v, (int, float)) and not isinstance(v, bool):
                args[k] = float(v)
            elif types[k] == "float":
                raise ConfigError(f"expected a number, got {v!r}", k)
        return cls(members=members, **args)


# --------------------------------------------------------------------------- adaptive weighting


@dataclass
class AdaptiveWeightUnit:
    """Learned per-class reweighting driven by prediction entropy.

    ``chi`` has one row per training example, ``phi`` maps the hidden width to
    classes. The graph-aware form adds a scalar convolution weight and bias
    applied after smoothing the entropies with the normalized adjacency.
    """

    chi: Tensor
    phi: Tensor
    conv_weight: Tensor | None = None
    conv_bias: Tensor | None = None

    @classmethod
    def create(cls, n_rows: int, hidden: int, num_classes: int, seed: int, graph_aware: bool = False):
        g = rng_mod.generator(seed, "adaptive_weights")
        b_chi = np.sqrt(6.0 / (n_rows + hidden))
        b_phi = np.sqrt(6.0 / (hidden + num_classes))
        chi = nd.parameter(g.uniform(-b_chi, b_chi, (n_rows, hidden)))
        phi = nd.parameter(g.uniform(-b_phi, b_phi, (hidden, num_classes)))
        if graph_aware:
            return cls(chi, phi, nd.parameter(g.uniform(-np.sqrt(3), np.sqrt(3), (1, 1))), nd.parameter(np.zeros((1, 1))))
        return cls(chi, phi)

    @property
    def graph_aware(self) -> bool:
        return self.conv_weight is not None

    def params(self) -> dict[str, Tensor]:
        out = {"weighting.chi": self.chi, "weighting.phi": self.phi}
        if self.graph_aware:
            out["weighting.conv_weight"] = self.conv_weight
            out["weighting.conv_bias"] = self.conv_bias
        return out

    def l1(self) -> Tensor:
        return nd.add(nd.l1_norm(self.chi), nd.l1_norm(self.phi))


def member_probs(logits: Tensor, rows, T: float) -> Tensor:
    """Tempered class distribution restricted to ``rows`` (``None`` keeps all)."""
    if rows is not None:
        logits = nd.gather_rows(logits, rows)
    return nd.softmax_rows(logits, T)


def adaptive_weights(
    unit: AdaptiveWeightUnit,
    p: Tensor,
    norm_adj: SparseMatrix | None = None,
    rows=None,
) -> Tensor:
    """Per-class weight vector ``softmax(H^T chi phi)`` of shape ``1 x C``.

    ``H`` is the per-row negative entropy of ``p``. In the graph-aware form
    ``p`` covers every node, ``H`` is smoothed as ``A_hat H w + b`` and then
    restricted to ``rows``.
    """
    h = nd.entropy_rows(p)
    if unit.graph_aware:
        if norm_adj is None or rows is None:
            raise ConfigError("graph-aware weighting needs the normalized adjacency and training rows")
        h = nd.add(nd.hadamard(nd.spmm(norm_adj, h), unit.conv_weight), unit.conv_bias)
        h = nd.gather_rows(h, rows)
    if h.shape[0] != unit.chi.shape[0]:
        raise ConfigError(f"weighting unit sized for {unit.chi.shape[0]} rows, got {h.shape[0]}", "weight_hidden")
    sigma = nd.matmul(nd.matmul(nd.transpose(h), unit.chi), unit.phi)
    return nd.softmax_rows(sigma, 1.0)


def apply_weighting(p: Tensor, w: Tensor) -> Tensor:
    """Scale each column of ``p`` by ``w`` and renormalize rows to sum to one."""
    if np.any(w.values <= 0):
        raise NumericError("adaptive weights must be strictly positive")
    return nd.normalize_rows(nd.hadamard(p, w))


# --------------------------------------------------------------------------- losses


@dataclass
class MemberStep:
    """Forward products of one member for one epoch."""

    logits: Tensor
    probs: Tensor
    shared: Tensor
    weights: Tensor | None = None

    def snapshot(self) -> np.ndarray:
        return nd.detach(self.shared).values


def member_forward(
    model: Model,
    ops: GraphOperators,
    train_rows: np.ndarray,
    config: CohortConfig,
    unit: AdaptiveWeightUnit | None = None,
    rng: np.random.Generator | None = None,
) -> MemberStep:
    logits, _ = model(ops, rng=rng)
    T = config.temperature
    if unit is None:
        p = member_probs(logits, train_rows, T)
        return MemberStep(logits, p, p)
    if unit.graph_aware:
        p_all = member_probs(logits, None, T)
        p = nd.gather_rows(p_all, train_rows)
        w = adaptive_weights(unit, p_all, ops.norm_adj, train_rows)
    else:
        p = member_probs(logits, train_rows, T)
        w = adaptive_weights(unit, p)
    return MemberStep(logits, p, apply_weighting(p, w), w)


def mean_negative_entropy(p: Tensor) -> Tensor:
    return nd.scale(nd.sum(nd.entropy_rows(p)), 1.0 / p.shape[0])


def mutual_loss(
    step: MemberStep,
    labels: np.ndarray,
    train_rows: np.ndarray,
    peers: list[np.ndarray],
    config: CohortConfig,
    unit: AdaptiveWeightUnit | None = None,
) -> tuple[Tensor, dict[str, float]]:
    """Supervised loss plus peer-matching, regularisation and entropy terms.

    ``peers`` are value-only snapshots; no gradient can reach their owners.
    """
    loss = nd.cross_entropy(step.logits, labels, train_rows)
    parts = {"ce": loss.item()}
    if peers:
        kl = None
        for snap in peers:
            if snap.shape != step.shared.shape:
                raise DimensionError(f"peer snapshot shape {snap.shape} != {step.shared.shape}")
            term = nd.kl_divergence(nd.constant(snap), step.shared)
            kl = term if kl is None else nd.add(kl, term)
        kl = nd.scale(kl, 1.0 / len(peers))
        parts["kl"] = kl.item()
        loss = nd.add(loss, kl)
    if unit is not None and config.beta > 0:
        reg = nd.scale(unit.l1(), config.beta)
        parts["reg"] = reg.item()
        loss = nd.add(loss, reg)
    if config.uses_penalty and config.gamma > 0:
        neg_h = mean_negative_entropy(step.probs)
        parts["entropy"] = -neg_h.item()
        # bonus: loss - gamma * entropy; literal: loss - gamma * (negative entropy)
        sign = 1.0 if config.penalty_sign == "bonus" else -1.0
        loss = nd.add(loss, nd.scale(neg_h, sign * config.gamma))
    parts["total"] = loss.item()
    return loss, parts


# --------------------------------------------------------------------------- optimizer


@dataclass
class AdamState:
    lr: float
    weight_decay: float = 0.0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: dict[str, Tensor], grads: dict[str, np.ndarray], state: AdamState) -> None:
    """One Adam update with decoupled weight decay, in place.

    Parameters without a gradient are left untouched.
    """
    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise NumericError(f"non-finite gradient for {name} at optimizer step {state.step + 1}")
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        if g.shape != p.shape:
            raise DimensionError(f"gradient shape {g.shape} != parameter shape {p.shape} for {name}")
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(g)
            v = state.v[name] = np.zeros_like(g)
        else:
            v = state.v[name]
        m *= state.beta1
        m += (1 - state.beta1) * g
        v *= state.beta2
        v += (1 - state.beta2) * (g * g)
        vals = p.values
        if state.weight_decay:
            vals = vals - state.lr * state.weight_decay * vals
        p.values = vals - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


# --------------------------------------------------------------------------- reports


@dataclass
class MemberResult:
    index: int
    architecture: str
    seed: int
    best_epoch: int
    val_acc: float
    test_acc: float
    mean_entropy: float
    history: dict[str, list[float]] = field(default_factory=dict)


@dataclass
class TrainReport:
    """Outcome of one run. Accuracies are percentages."""

    variant: str
    seed: int
    target_index: int
    members: list[MemberResult]
    epochs_run: int
    seconds: float
    config: dict = field(default_factory=dict)

    # Trained models are attached as a plain attribute (``report.models``) by the
    # training entry points; they are not part of the serialized report.

    @property
    def target(self) -> MemberResult:
        return next(m for m in self.members if m.index == self.target_index)

    def to_dict(self, history: bool = False) -> dict:
        d = asdict(self)
        if not history:
            for m in d["members"]:
                m.pop("history")
        return d

    def to_json(self, history: bool = False) -> str:
        return json.dumps(self.to_dict(history), indent=2, sort_keys=True)


METRIC_COLUMNS = ("seed", "variant", "member", "epoch_best", "val_acc", "test_acc")


def metric_rows(report: TrainReport) -> list[dict]:
    return [
        {
            "seed": report.seed,
            "variant": report.variant,
            "member": f"{m.index}:{m.architecture}{'*' if m.index == report.target_index else ''}",
            "epoch_best": m.best_epoch,
            "val_acc": f"{m.val_acc:.4f}",
            "test_acc": f"{m.test_acc:.4f}",
        }
        for m in report.members
    ]


def append_metrics(path, report: TrainReport) -> None:
    """Append deterministic metric rows (no wall-clock) to a CSV log."""
    path = Path(path)
    new = not path.exists()
    with open(path, "a", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=METRIC_COLUMNS, lineterminator="\n")
        if new:
            w.writeheader()
        w.writerows(metric_rows(report))


def append_timing(path, report: TrainReport, label: str = "") -> None:
    path = Path(path)
    new = not path.exists()
    with open(path, "a", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if new:
            w.writerow(["seed", "variant", "label", "members", "epochs", "seconds"])
        w.writerow([report.seed, report.variant, label, len(report.members), report.epochs_run, f"{report.seconds:.3f}"])


# --------------------------------------------------------------------------- training


@dataclass
class _Member:
    index: int
    config: MemberConfig
    model: Model
    unit: AdaptiveWeightUnit | None
    opt: AdamState
    rng: np.random.Generator | None
    best_state: dict[str, np.ndarray] = field(default_factory=dict)
    best_val: float = -1.0
    best_epoch: int = -1
    stale: int = 0
    history: dict[str, list[float]] = field(default_factory=lambda: {"loss": [], "train_acc": [], "val_acc": []})
    tape: nd.Tape | None = None
    step: MemberStep | None = None

    def all_params(self) -> dict[str, Tensor]:
        p = dict(self.model.params)
        if self.unit is not None:
            p.update(self.unit.params())
        return p

    def save_best(self) -> None:
        self.best_state = {k: t.values.copy() for k, t in self.all_params().items()}

    def restore_best(self) -> None:
        for k, t in self.all_params().items():
            t.values = self.best_state[k].copy()


@dataclass
class _Problem:
    ops: GraphOperators
    labels: np.ndarray
    split: Split
    num_classes: int
    in_dim: int
    task: str


def _problem(data: GraphDataset, split: Split) -> _Problem:
    if data.is_graph_task:
        labels, task = data.graph_labels, "graph"
    else:
        if data.labels is None:
            raise ConfigError("node task needs node labels", "dataset")
        labels, task = data.labels, "node"
    n = labels.size
    for part in (split.train, split.val, split.test):
        if part.size and part.max() >= n:
            raise DimensionError("split indices exceed the number of examples")
    if split.train.size == 0:
        raise ConfigError("empty training split", "split")
    return _Problem(GraphOperators(data), labels, split, data.num_classes, data.num_features, task)


def accuracy(logits: np.ndarray, labels: np.ndarray, rows: np.ndarray) -> float:
    if rows.size == 0:
        return float("nan")
    return 100.0 * float(np.mean(np.argmax(logits[rows], axis=1) == labels[rows]))


def _build_members(problem: _Problem, config: CohortConfig) -> list[_Member]:
    if config.task != problem.task:
        raise ConfigError(f"config task {config.task!r} does not match dataset task {problem.task!r}", "task")
    members = []
    for i in config.active_members:
        mc = config.members[i]
        spec = mc.build_spec(problem.in_dim, problem.num_classes, problem.task)
        model = Model.create(spec, mc.seed)
        unit = None
        if config.uses_weighting:
            unit = AdaptiveWeightUnit.create(
                problem.split.train.size, config.weight_hidden, problem.num_classes, mc.seed, config.graph_aware
            )
        rng = rng_mod.generator(mc.seed, "dropout") if mc.dropout > 0 else None
        members.append(_Member(i, mc, model, unit, AdamState(config.learning_rate, config.weight_decay), rng))
    return members


def _evaluate_logits(member: _Member, problem: _Problem) -> np.ndarray:
    if member.rng is None and member.step is not None:
        return member.step.logits.values
    logits, _ = member.model(problem.ops)
    return logits.values


def _run(
    members: list[_Member],
    problem: _Problem,
    config: CohortConfig,
    target_index: int,
    workers: int = 1,
    fixed_peers: list[np.ndarray] | None = None,
    log_every: int = 0,
):
    train = problem.split.train
    val = problem.split.val
    target = next(m for m in members if m.index == target_index)
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 and len(members) > 1 else None

    def each(fn):
        if pool is None:
            return [fn(m) for m in members]
        return list(pool.map(fn, members))

    def forward(m: _Member):
        m.tape = nd.Tape()
        with m.tape:
            m.step = member_forward(m.model, problem.ops, train, config, m.unit, m.rng)
        return m.step.snapshot()

    def update(args):
        m, peers = args
        with m.tape:
            loss, parts = mutual_loss(m.step, problem.labels, train, peers, config, m.unit)
            grads = m.tape.backward(loss)
        named = {k: grads[t.node_id] for k, t in m.all_params().items() if t.node_id in grads}
        adam_step(m.all_params(), named, m.opt)
        m.tape = None
        m.step = None
        return parts["total"]

    epoch = 0
    try:
        for epoch in range(config.max_epochs):
            try:
                snaps = each(forward)
            except NumericError as e:
                raise NumericError(f"epoch {epoch}: {e}") from e
            for m in members:
                logits = _evaluate_logits(m, problem)
                va = accuracy(logits, problem.labels, val)
                m.history["train_acc"].append(accuracy(logits, problem.labels, train))
                m.history["val_acc"].append(va)
                if va > m.best_val:
                    m.best_val, m.best_epoch, m.stale = va, epoch, 0
                    m.save_best()
                else:
                    m.stale += 1
            if fixed_peers is not None:
                jobs = [(m, fixed_peers) for m in members]
            else:
                jobs = [(m, [s for j, s in enumerate(snaps) if j != k]) for k, m in enumerate(members)]
            try:
                if pool is None:
                    losses = [update(job) for job in jobs]
                else:
                    losses = list(pool.map(update, jobs))
            except NumericError as e:
                raise NumericError(f"epoch {epoch}: {e}") from e
            for m, lv in zip(members, losses):
                m.history["loss"].append(lv)
            if log_every and epoch % log_every == 0:
                log.info("epoch %d target val %.2f loss %.4f", epoch, target.history["val_acc"][-1], target.history["loss"][-1])
            if target.stale >= config.patience:
                break
    finally:
        if pool is not None:
            pool.shutdown()
    return epoch + 1


def _finish(members: list[_Member], problem: _Problem) -> list[MemberResult]:
    results = []
    for m in members:
        m.restore_best()
        logits, _ = m.model(problem.ops)
        p = nd.softmax_rows(logits, 1.0).values
        ent = float(-np.where(p > 0, p * np.log(np.maximum(p, nd.EPS)), 0.0).sum(axis=1).mean())
        results.append(
            MemberResult(
                m.index, m.config.architecture, m.config.seed, m.best_epoch, m.best_val,
                accuracy(logits.values, problem.labels, problem.split.test), ent, m.history,
            )
        )
    return results


def train_cohort(
    data: GraphDataset,
    split: Split,
    config: CohortConfig,
    *,
    seed: int = 0,
    workers: int = 1,
    checkpoint_dir=None,
    log_every: int = 0,
) -> TrainReport:
    """Train every active member together; report test accuracy at each member's best validation epoch.

    Early stopping follows the target member: training ends once its
    validation accuracy has not improved for ``patience`` epochs. Ties keep
    the earliest epoch.
    """
    config.validate()
    problem = _problem(data, split)
    members = _build_members(problem, config)
    t0 = time.perf_counter()
    epochs = _run(members, problem, config, config.target_index, workers, log_every=log_every)
    results = _finish(members, problem)
    seconds = time.perf_counter() - t0
    report = TrainReport(config.variant, seed, config.target_index, results, epochs, seconds, config.to_dict())
    report.models = {m.index: m.model for m in members}
    if checkpoint_dir is not None:
        for m in members:
            save_checkpoint(
                Path(checkpoint_dir) / f"member{m.index}",
                m.model.spec,
                m.model.params,
                m.config.seed,
                {"dataset": data.name, "variant": config.variant, "target": m.index == config.target_index,
                 "num_classes": problem.num_classes},
            )
    return report


def distill(
    teacher,
    data: GraphDataset,
    split: Split,
    config: CohortConfig,
    student: MemberConfig | None = None,
    *,
    seed: int = 0,
) -> TrainReport:
    """Train an MLP on CE plus KL to a frozen teacher's softmax (T=1) on the training rows.

    ``teacher`` is a checkpoint directory or a ``Model``. ``config`` supplies
    optimizer and early-stopping settings; its variant and member list are
    ignored. Evaluation uses node features only.
    """
    if data.is_graph_task:
        raise ConfigError("distillation is defined for node tasks", "task")
    if isinstance(teacher, (str, Path)):
        spec, params, meta = load_checkpoint(teacher)
        teacher = Model(spec, int(meta.get("seed") or 0), params)
    problem = _problem(data, split)
    if teacher.spec.num_classes != problem.num_classes:
        raise ConfigError(
            f"teacher predicts {teacher.spec.num_classes} classes, dataset has {problem.num_classes}", "teacher"
        )
    t_logits, _ = teacher(problem.ops)
    soft = nd.softmax_rows(t_logits, 1.0).values[split.train]
    soft.setflags(write=False)

    student = student or MemberConfig("MLP", seed=seed)
    if student.architecture.upper() != "MLP":
        raise ConfigError("the student must be an MLP", "student")
    kd_config = CohortConfig(
        members=[student],
        variant="Ind",
        temperature=1.0,
        learning_rate=config.learning_rate,
        weight_decay=config.weight_decay,
        max_epochs=config.max_epochs,
        patience=config.patience,
        task="node",
    )
    members = _build_members(problem, kd_config)
    t0 = time.perf_counter()
    epochs = _run(members, problem, kd_config, 0, fixed_peers=[soft])
    results = _finish(members, problem)
    report = TrainReport("KD", seed, 0, results, epochs, time.perf_counter() - t0, kd_config.to_dict())
    report.models = {0: members[0].model}
    return report


def train_vanilla_mlp(data: GraphDataset, split: Split, config: CohortConfig, *, seed: int = 0) -> TrainReport:
    """Baseline MLP with cross-entropy only, same optimizer and stopping rule."""
    cfg = CohortConfig(
        members=[MemberConfig("MLP", seed=seed)],
        variant="Ind",
        learning_rate=config.learning_rate,
        weight_decay=config.weight_decay,
        max_epochs=config.max_epochs,
        patience=config.patience,
        task="node",
    )
    report = train_cohort(data, split, cfg, seed=seed)
    report.variant = "MLP"
    return report


def reports_to_csv(reports: list[TrainReport]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=METRIC_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in reports:
        w.writerows(metric_rows(r))
    return buf.getvalue()
