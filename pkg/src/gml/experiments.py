"""Experiment files, dataset resolution, and the runs behind each CLI command.

An experiment file (YAML) looks like::

    name: cora-sage-gcn-s-gmlc
    dataset: {name: cora}            # or {name: citation, content: ..., cites: ...}
    task: node
    seeds: [0, 1, 2]
    split: {ratios: [0.7, 0.15, 0.15], seed: null}   # null: split seed = run seed
    cohort: {members: [{architecture: SAGE, seed: 0}, {architecture: GCN, seed: 1}],
             variant: GML-C, gamma: 0.01, beta: 1.0, ...}
    bench: {...}                     # sweep-specific settings

Named datasets (cora, citeseer, pubmed, proteins) are read from the directory
in ``$GML_DATA_ROOT``. For run seed ``s`` a member's init seed is
``1000 * s + member.seed``.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from . import analysis as an
from . import cohort as co
from . import graphdata as gd
from . import presets
from .errors import ConfigError, DatasetError
from .models import GraphOperators, Model

log = logging.getLogger(__name__)

DATA_ROOT_ENV = "GML_DATA_ROOT"
IRIS_CSV = Path(__file__).parent / "data" / "iris.csv"
SEED_STRIDE = 1000

NAMED_NODE = ("cora", "citeseer", "pubmed")
DATASET_KINDS = NAMED_NODE + ("proteins", "iris", "planted", "citation", "csv", "tu", "tabular")


# --------------------------------------------------------------------------- configuration


@dataclass
class DatasetSpec:
    name: str
    path: str | None = None
    content: str | None = None
    cites: str | None = None
    label_column: str | None = None
    options: dict = field(default_factory=dict)


@dataclass
class ExperimentConfig:
    name: str
    dataset: DatasetSpec
    cohort: co.CohortConfig
    seeds: list[int]
    task: str = "node"
    split_ratios: tuple[float, float, float] | None = None
    split_seed: int | None = None
    bench: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "dataset": asdict(self.dataset),
            "task": self.task,
            "seeds": list(self.seeds),
            "split": {"ratios": list(self.split_ratios) if self.split_ratios else None, "seed": self.split_seed},
            "cohort": self.cohort.to_dict(),
            "bench": self.bench,
        }

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


_TOP_KEYS = {"name", "dataset", "task", "seeds", "split", "cohort", "bench"}


def parse_seeds(text: str) -> list[int]:
    """``"0,1,2"`` or a range ``"0-9"``."""
    try:
        out = []
        for part in str(text).split(","):
            part = part.strip()
            if not part:
                continue
            if "-" in part[1:]:
                lo, hi = part.split("-", 1)
                out.extend(range(int(lo), int(hi) + 1))
            else:
                out.append(int(part))
    except ValueError:
        raise ConfigError(f"cannot parse seed list {text!r}", "seeds") from None
    if not out:
        raise ConfigError("empty seed list", "seeds")
    return out


def config_from_dict(d: dict, name: str = "experiment") -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigError("an experiment file must be a mapping at the top level")
    unknown = set(d) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)}", sorted(unknown)[0])
    for key in ("dataset", "cohort"):
        if key not in d:
            raise ConfigError("missing", key)

    ds = d["dataset"]
    if isinstance(ds, str):
        ds = {"name": ds}
    if not isinstance(ds, dict):
        raise ConfigError("expected a name or a mapping", "dataset")
    try:
        dataset = DatasetSpec(**ds)
    except TypeError as e:
        raise ConfigError(str(e), "dataset") from None
    if dataset.name not in DATASET_KINDS:
        raise ConfigError(f"unknown dataset {dataset.name!r}; expected one of {DATASET_KINDS}", "dataset.name")

    task = d.get("task", "graph" if dataset.name in ("proteins", "tu") else "node")
    if task not in ("node", "graph"):
        raise ConfigError("expected 'node' or 'graph'", "task")
    cohort_d = dict(d["cohort"] or {})
    cohort_d.setdefault("task", task)
    if cohort_d["task"] != task:
        raise ConfigError(f"cohort task {cohort_d['task']!r} differs from experiment task {task!r}", "cohort.task")
    try:
        cohort = co.CohortConfig.from_dict(cohort_d)
    except ConfigError as e:
        raise ConfigError(str(e).split(": ", 1)[-1], f"cohort.{e.field}" if e.field else "cohort") from None
    except TypeError as e:
        raise ConfigError(str(e), "cohort") from None

    seeds = d.get("seeds", [0])
    if isinstance(seeds, (int, str)):
        seeds = parse_seeds(str(seeds))
    if not seeds or not all(isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in seeds):
        raise ConfigError("expected a non-empty list of non-negative integers", "seeds")

    split = d.get("split") or {}
    ratios = split.get("ratios")
    if ratios is not None:
        if len(ratios) != 3 or abs(sum(ratios) - 1) > 1e-9 or min(ratios) < 0:
            raise ConfigError("three non-negative ratios summing to 1 expected", "split.ratios")
        ratios = tuple(float(r) for r in ratios)
    split_seed = split.get("seed")
    if split_seed is not None and not isinstance(split_seed, int):
        raise ConfigError("expected an integer or null", "split.seed")
    bench = d.get("bench") or {}
    if not isinstance(bench, dict):
        raise ConfigError("expected a mapping", "bench")
    return ExperimentConfig(str(d.get("name", name)), dataset, cohort, list(seeds), task, ratios, split_seed, bench)


def load_config(source, data_root=None, check_paths: bool = True) -> ExperimentConfig:
    """Parse a YAML file or a preset name, then check that dataset paths exist."""
    if isinstance(source, dict):
        cfg = config_from_dict(source)
    else:
        path = Path(source)
        if path.is_file():
            try:
                raw = yaml.safe_load(path.read_text())
            except yaml.YAMLError as e:
                mark = getattr(e, "problem_mark", None)
                where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
                raise ConfigError(f"{path}: YAML syntax error{where}: {getattr(e, 'problem', e)}") from None
            cfg = config_from_dict(raw, name=path.stem)
        elif str(source) in presets.PRESETS:
            cfg = config_from_dict(presets.get(str(source)), name=str(source))
            cfg.name = str(source)
        else:
            raise ConfigError(f"no config file or preset named {str(source)!r}", "config")
    if check_paths:
        dataset_paths(cfg.dataset, data_root)
    return cfg


# --------------------------------------------------------------------------- datasets


def data_root(override=None) -> Path:
    return Path(override or os.environ.get(DATA_ROOT_ENV, "data"))


def dataset_paths(spec: DatasetSpec, root=None) -> dict[str, Path]:
    """Resolve and check every file a dataset needs; missing paths are config errors."""
    root = data_root(root)
    if spec.name in NAMED_NODE:
        base = root / spec.name
        paths = {"content": base / f"{spec.name}.content", "cites": base / f"{spec.name}.cites"}
    elif spec.name == "proteins":
        paths = {"dir": root / "PROTEINS", "indicator": root / "PROTEINS" / "PROTEINS_graph_indicator.txt"}
    elif spec.name == "citation":
        if not (spec.content and spec.cites):
            raise ConfigError("citation datasets need 'content' and 'cites'", "dataset")
        paths = {"content": Path(spec.content), "cites": Path(spec.cites)}
    elif spec.name in ("csv", "tu"):
        if not spec.path:
            raise ConfigError(f"{spec.name} datasets need 'path'", "dataset.path")
        paths = {"dir": Path(spec.path)}
    elif spec.name == "tabular":
        if not (spec.path and spec.label_column):
            raise ConfigError("tabular datasets need 'path' and 'label_column'", "dataset")
        paths = {"csv": Path(spec.path)}
    else:
        paths = {}
    for key, p in paths.items():
        if not p.exists():
            hint = f" (set ${DATA_ROOT_ENV}, currently {str(root)!r})" if spec.name in NAMED_NODE + ("proteins",) else ""
            raise ConfigError(f"{spec.name} dataset file not found: {p}{hint}", "dataset")
    return paths


def tabular_dataset(x: np.ndarray, labels: np.ndarray, name: str) -> gd.GraphDataset:
    n = x.shape[0]
    return gd.GraphDataset(x, gd.adjacency_from_edges(n, [], []), labels, int(labels.max()) + 1, name)


def load_dataset(spec: DatasetSpec, root=None) -> gd.GraphDataset:
    paths = dataset_paths(spec, root)
    if spec.name in NAMED_NODE or spec.name == "citation":
        return gd.load_citation(paths["content"], paths["cites"], spec.name if spec.name != "citation" else "")
    if spec.name == "proteins":
        return gd.load_tu(paths["dir"], **spec.options).batch()
    if spec.name == "tu":
        return gd.load_tu(paths["dir"], **spec.options).batch()
    if spec.name == "csv":
        return gd.load_csv_graph(paths["dir"])
    if spec.name == "planted":
        try:
            return gd.gen_planted_partition(**{**presets.PLANTED["options"], **spec.options})
        except TypeError as e:
            raise ConfigError(str(e), "dataset.options") from None
    if spec.name == "iris":
        x, y = gd.load_tabular(IRIS_CSV, "species")
        return tabular_dataset(x, y, "iris")
    if spec.name == "tabular":
        x, y = gd.load_tabular(paths["csv"], spec.label_column)
        return tabular_dataset(x, y, Path(spec.path).stem)
    raise ConfigError(f"unknown dataset {spec.name!r}", "dataset.name")


def num_examples(data: gd.GraphDataset) -> int:
    return data.num_graphs if data.is_graph_task else data.num_nodes


def split_for(cfg: ExperimentConfig, data: gd.GraphDataset, run_seed: int) -> gd.Split:
    seed = run_seed if cfg.split_seed is None else cfg.split_seed
    if data.is_graph_task:
        return gd.split_graphs(num_examples(data), cfg.split_ratios or (0.75, 0.10, 0.15), seed)
    return gd.split_nodes(num_examples(data), cfg.split_ratios or (0.70, 0.15, 0.15), seed)


def seeded_cohort(cohort: co.CohortConfig, run_seed: int, **overrides) -> co.CohortConfig:
    members = [replace(m, seed=SEED_STRIDE * run_seed + m.seed) for m in cohort.members]
    d = {**asdict(cohort), "members": members, **overrides}
    return co.CohortConfig(**d)


def cohort_of_size(cohort: co.CohortConfig, k: int) -> co.CohortConfig:
    """Target plus ``k - 1`` peers cycling through the configured peer architectures."""
    target = cohort.members[cohort.target_index]
    peers = [m for i, m in enumerate(cohort.members) if i != cohort.target_index] or [target]
    members = [replace(target, seed=0)] + [replace(peers[j % len(peers)], seed=j + 1) for j in range(k - 1)]
    variant = "Ind" if k == 1 else ("GML" if cohort.variant == "Ind" else cohort.variant)
    return replace(cohort, members=members, target_index=0, variant=variant)


# --------------------------------------------------------------------------- output helpers


def _fresh(path: Path) -> Path:
    if path.exists():
        path.unlink()
    return path


def _write_csv(path: Path, header, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def _write_manifest(out: Path, command: str, cfg: ExperimentConfig | None, seeds, seconds: dict, extra=None) -> None:
    manifest = {
        "command": command,
        "version": __version__,
        "seeds": list(seeds),
        "seconds_per_seed": {str(k): round(v, 3) for k, v in seconds.items()},
        "total_seconds": round(sum(seconds.values()), 3),
    }
    if cfg is not None:
        manifest.update({"name": cfg.name, "config": cfg.to_dict(), "config_sha256": cfg.digest()})
    manifest.update(extra or {})
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


def target_rows(rows: list[dict]) -> list[dict]:
    return [r for r in rows if str(r["member"]).endswith("*")]


def _fmt(v: float) -> str:
    return "" if v is None or (isinstance(v, float) and np.isnan(v)) else f"{v:.4f}"


# --------------------------------------------------------------------------- train


@dataclass
class RunResult:
    out: Path
    reports: list[co.TrainReport]
    table: an.MetricTable | None = None
    extra: dict = field(default_factory=dict)


def dump_activations(model: Model, data: gd.GraphDataset, directory: Path, meta: dict) -> an.ActivationDump:
    _, acts = model(GraphOperators(data))
    dump = an.ActivationDump([a.values for a in acts], meta)
    dump.save(directory)
    return dump


def run_train(
    cfg: ExperimentConfig,
    out,
    *,
    seeds=None,
    workers: int = 1,
    activations: bool = False,
    root=None,
    data: gd.GraphDataset | None = None,
    checkpoints: bool = True,
) -> RunResult:
    seeds = list(seeds or cfg.seeds)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    data = data if data is not None else load_dataset(cfg.dataset, root)
    metrics, timing = _fresh(out / "metrics.csv"), _fresh(out / "timing.csv")
    reports, seconds = [], {}
    for s in seeds:
        cohort = seeded_cohort(cfg.cohort, s)
        ckpt = out / "checkpoints" / f"seed{s}" if checkpoints else None
        report = co.train_cohort(data, split_for(cfg, data, s), cohort, seed=s, workers=workers, checkpoint_dir=ckpt)
        co.append_metrics(metrics, report)
        co.append_timing(timing, report, cfg.name)
        (out / "reports").mkdir(exist_ok=True)
        (out / "reports" / f"seed{s}.json").write_text(report.to_json(history=True))
        if activations:
            for idx, model in report.models.items():
                meta = {"dataset": data.name, "seed": s, "member": idx, "architecture": model.spec.architecture}
                dump_activations(model, data, out / "activations" / f"seed{s}" / f"member{idx}", meta)
        seconds[s] = report.seconds
        t = report.target
        log.info("%s seed %d: target %s test %.2f (best epoch %d, %.1fs)", cfg.name, s, t.architecture, t.test_acc, t.best_epoch, report.seconds)
        reports.append(report)
    table = an.aggregate(
        [{"config": f"{cfg.name}:{r.variant}", "test_acc": r.target.test_acc} for r in reports]
    )
    (out / "summary.csv").write_text(table.to_csv())
    (out / "summary.json").write_text(table.to_json())
    _write_manifest(out, "train", cfg, seeds, seconds, {"workers": workers})
    return RunResult(out, reports, table)


# --------------------------------------------------------------------------- distill


def resolve_teacher(teacher, seed: int) -> Path:
    """A checkpoint directory, or a ``train`` output directory (per-seed target checkpoint)."""
    p = Path(teacher)
    manifest = p / "manifest.json"
    if not manifest.exists():
        raise ConfigError(f"no checkpoint or training run at {p}", "teacher")
    info = json.loads(manifest.read_text())
    if "spec" in info:
        return p
    if info.get("command") != "train":
        raise ConfigError(f"{p} is neither a checkpoint nor a training run", "teacher")
    target = info["config"]["cohort"]["target_index"]
    ckpt = p / "checkpoints" / f"seed{seed}" / f"member{target}"
    if not (ckpt / "manifest.json").exists():
        raise ConfigError(f"training run {p} has no checkpoint for seed {seed}", "teacher")
    return ckpt


def run_distill(cfg: ExperimentConfig, teacher, out, *, seeds=None, with_baseline: bool = False, root=None, data=None) -> RunResult:
    seeds = list(seeds or cfg.seeds)
    for s in seeds:  # fail before any output or training if a teacher is missing
        resolve_teacher(teacher, s)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    data = data if data is not None else load_dataset(cfg.dataset, root)
    metrics, timing = _fresh(out / "metrics.csv"), _fresh(out / "timing.csv")
    reports, seconds, rows = [], {}, []
    for s in seeds:
        split = split_for(cfg, data, s)
        student = co.MemberConfig("MLP", seed=SEED_STRIDE * s)
        kd = co.distill(resolve_teacher(teacher, s), data, split, cfg.cohort, student, seed=s)
        runs = [kd]
        if with_baseline:
            runs.append(co.train_vanilla_mlp(data, split, cfg.cohort, seed=SEED_STRIDE * s))
            runs[-1].seed = s
        for r in runs:
            co.append_metrics(metrics, r)
            co.append_timing(timing, r, cfg.name)
            rows.append({"config": r.variant, "test_acc": r.target.test_acc})
        seconds[s] = sum(r.seconds for r in runs)
        reports.extend(runs)
        log.info("distill seed %d: KD %.2f%s", s, kd.target.test_acc,
                 f", MLP {runs[1].target.test_acc:.2f}" if with_baseline else "")
    table = an.aggregate(rows)
    (out / "summary.csv").write_text(table.to_csv())
    extra = {"teacher": str(teacher)}
    if with_baseline:
        extra["delta_vs_baseline"] = round(table.get("KD").mean - table.get("MLP").mean, 4)
    (out / "summary.json").write_text(json.dumps({"rows": json.loads(table.to_json()), **extra}, indent=2))
    _write_manifest(out, "distill", cfg, seeds, seconds, extra)
    return RunResult(out, reports, table, extra)


# --------------------------------------------------------------------------- analyze


def run_cka(dump_a, dump_b, out) -> np.ndarray:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    matrix = an.compare_dumps(an.ActivationDump.load(dump_a), an.ActivationDump.load(dump_b))
    (out / "cka.csv").write_text(an.cka_matrix_csv(matrix))
    return matrix


def run_wilcoxon(x_csv, y_csv, out, column: str = "test_acc") -> an.WilcoxonResult:
    """Pair the target rows of two metric logs by seed and test ``x > y``."""
    def by_seed(path):
        rows = target_rows(an.read_metric_csv(path)) or an.read_metric_csv(path)
        try:
            return {int(r["seed"]): float(r[column]) for r in rows}
        except KeyError as e:
            raise ConfigError(f"{path}: missing column {e}", column) from None
    x, y = by_seed(x_csv), by_seed(y_csv)
    common = sorted(set(x) & set(y))
    if not common:
        raise ConfigError("the two metric files share no seeds", "seeds")
    res = an.wilcoxon_signed_rank([x[s] for s in common], [y[s] for s in common])
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    _write_csv(out / "wilcoxon.csv", ["n", "statistic", "p_value", "method"],
               [[res.n, f"{res.statistic:g}", f"{res.p_value:.6g}", res.method]])
    return res


def _test_probs(model: Model, data: gd.GraphDataset) -> np.ndarray:
    logits, _ = model(GraphOperators(data))
    z = logits.values - logits.values.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def run_ensemble(cfg: ExperimentConfig, out, *, sizes=(1, 2, 3, 5), seeds=None, workers=1, root=None, data=None) -> RunResult:
    """Deep ensemble of independently trained targets vs the ensemble of one mutual-learning cohort."""
    seeds = list(seeds or cfg.seeds)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    data = data if data is not None else load_dataset(cfg.dataset, root)
    labels = data.graph_labels if data.is_graph_task else data.labels
    rows, seconds = [], {}
    for s in seeds:
        split = split_for(cfg, data, s)
        t0 = time.perf_counter()
        singles = []
        for k in range(max(sizes)):
            one = cohort_of_size(cfg.cohort, 1)
            one.members[0] = replace(one.members[0], seed=k)
            rep = co.train_cohort(data, split, seeded_cohort(one, s), seed=s)
            singles.append(_test_probs(rep.models[0], data))
        for n in sizes:
            deep = an.ensemble_accuracy(singles[:n], labels, split.test)
            rep = co.train_cohort(data, split, seeded_cohort(cohort_of_size(cfg.cohort, n), s), seed=s, workers=workers)
            probs = [_test_probs(m, data) for m in rep.models.values()]
            rows.append([n, s, f"{deep:.4f}", f"{an.ensemble_accuracy(probs, labels, split.test):.4f}",
                         f"{rep.target.test_acc:.4f}"])
        seconds[s] = time.perf_counter() - t0
    _write_csv(out / "ensemble.csv", ["size", "seed", "deep_ensemble_acc", "gml_ensemble_acc", "gml_target_acc"], rows)
    summary = []
    for n in sizes:
        sub = [r for r in rows if r[0] == n]
        summary.append([n] + [_fmt(float(np.mean([float(r[c]) for r in sub]))) for c in (2, 3, 4)])
    _write_csv(out / "ensemble_summary.csv", ["size", "deep_ensemble_acc", "gml_ensemble_acc", "gml_target_acc"], summary)
    _write_manifest(out, "analyze ensemble", cfg, seeds, seconds, {"sizes": list(sizes)})
    return RunResult(out, [], None, {"rows": rows, "summary": summary})


# --------------------------------------------------------------------------- bench


def bench_cohort_size(cfg: ExperimentConfig, out, *, sizes=None, seeds=None, workers=1, root=None, data=None) -> RunResult:
    sizes = list(sizes or cfg.bench.get("cohort_sizes", presets.COHORT_SIZES))
    seeds = list(seeds or cfg.seeds)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    data = data if data is not None else load_dataset(cfg.dataset, root)
    rows, reports, seconds = [], [], {}
    for s in seeds:
        split = split_for(cfg, data, s)
        seconds[s] = 0.0
        for k in sizes:
            rep = co.train_cohort(data, split, seeded_cohort(cohort_of_size(cfg.cohort, k), s), seed=s, workers=workers)
            reports.append(rep)
            seconds[s] += rep.seconds
            rows.append({"size": k, "seed": s, "test_acc": rep.target.test_acc, "seconds": rep.seconds,
                         "epochs": rep.epochs_run, "sec_per_epoch": rep.seconds / rep.epochs_run})
    _write_csv(out / "cohort_size.csv", ["size", "seed", "test_acc", "epochs", "seconds", "sec_per_epoch"],
               [[r["size"], r["seed"], _fmt(r["test_acc"]), r["epochs"], f"{r['seconds']:.3f}", f"{r['sec_per_epoch']:.6f}"] for r in rows])
    table_rows = []
    for k in sizes:
        sub = [r for r in rows if r["size"] == k]
        acc = an.aggregate([{"config": str(k), "test_acc": r["test_acc"]} for r in sub]).rows[0]
        table_rows.append([k, _fmt(acc.mean), _fmt(acc.std), f"{np.mean([r['seconds'] for r in sub]):.3f}",
                           f"{np.mean([r['sec_per_epoch'] for r in sub]):.6f}"])
    _write_csv(out / "cohort_size_summary.csv", ["size", "acc_mean", "acc_std", "seconds_mean", "sec_per_epoch_mean"], table_rows)
    _write_manifest(out, "bench cohort_size", cfg, seeds, seconds, {"sizes": sizes})
    return RunResult(out, reports, None, {"rows": rows, "summary": table_rows})


def bench_noise(cfg: ExperimentConfig, out, *, scales=None, variants=None, seeds=None, workers=1, root=None, data=None) -> RunResult:
    scales = [float(x) for x in (scales or cfg.bench.get("noise_scales", presets.NOISE_SCALES))]
    variants = list(variants or cfg.bench.get("variants", ["GML-C", "GML", "Ind"]))
    seeds = list(seeds or cfg.seeds)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    clean = data if data is not None else load_dataset(cfg.dataset, root)
    metrics = _fresh(out / "noise_metrics.csv")
    header = ("scale",) + co.METRIC_COLUMNS
    _write_csv(metrics, header, [])
    results: dict[tuple[float, str], list[float]] = {}
    reports, seconds = [], {}
    for s in seeds:
        split = split_for(cfg, clean, s)
        seconds[s] = 0.0
        for scale in scales:
            noisy = clean.with_features(gd.add_laplace_noise(clean.features, scale, seed=s))
            for v in variants:
                rep = co.train_cohort(noisy, split, seeded_cohort(cfg.cohort, s, variant=v), seed=s, workers=workers)
                reports.append(rep)
                seconds[s] += rep.seconds
                with open(metrics, "a", newline="") as fh:
                    w = csv.DictWriter(fh, fieldnames=header, lineterminator="\n")
                    for row in co.metric_rows(rep):
                        w.writerow({"scale": f"{scale:g}", **row})
                results.setdefault((scale, v), []).append(rep.target.test_acc)
    table = []
    for scale in scales:
        cells = []
        for v in variants:
            vals = results[(scale, v)]
            summary = an.aggregate([{"config": v, "test_acc": x} for x in vals]).rows[0]
            cells.append(summary.format(2))
        table.append([f"{scale:g}"] + cells)
    _write_csv(out / "noise_table.csv", ["noise_level"] + variants, table)
    _write_manifest(out, "bench noise", cfg, seeds, seconds, {"scales": scales, "variants": variants})
    means = {k: float(np.mean(v)) for k, v in results.items()}
    return RunResult(out, reports, None, {"means": means, "table": table})


def _match_ba_p(n: int, m: int) -> float:
    edges = m * (m - 1) // 2 + (n - m) * m
    return edges / (n * (n - 1) / 2)


def bench_structure(cfg: ExperimentConfig, out, *, seeds=None, workers=1, root=None, data=None) -> RunResult:
    """No graph (MLP) vs random graph vs preferential-attachment graph, single model vs cohort."""
    seeds = list(seeds or cfg.seeds)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    base = data if data is not None else load_dataset(cfg.dataset, root)
    if base.is_graph_task:
        raise ConfigError("the structure sweep needs a node task", "task")
    n = base.num_nodes
    m = int(cfg.bench.get("ba_m", 2))
    p = cfg.bench.get("random_p", "match_ba")
    p = _match_ba_p(n, m) if p == "match_ba" else float(p)
    target = cfg.cohort.members[cfg.cohort.target_index]
    pair_name = "-".join(mc.architecture for mc in cfg.cohort.members)
    rows, seconds = [], {}
    metrics = _fresh(out / "structure_metrics.csv")
    header = ("graph",) + co.METRIC_COLUMNS
    _write_csv(metrics, header, [])
    for s in seeds:
        split = split_for(cfg, base, s)
        graphs = {
            "none": base,
            "random": base.with_adjacency(gd.gen_random(n, p, seed=s).adjacency, f"{base.name}+random"),
            "ba": base.with_adjacency(gd.gen_barabasi_albert(n, m, seed=s).adjacency, f"{base.name}+ba"),
        }
        t0 = time.perf_counter()
        runs = []
        mlp = replace(cfg.cohort, members=[replace(target, architecture="MLP")], target_index=0, variant="Ind")
        runs.append(("none", f"{target.architecture}-Ind", co.train_cohort(graphs["none"], split, seeded_cohort(mlp, s), seed=s)))
        for g in ("random", "ba"):
            ind = replace(cfg.cohort, variant="Ind")
            runs.append((g, f"{target.architecture}-Ind", co.train_cohort(graphs[g], split, seeded_cohort(ind, s), seed=s)))
            gml = cfg.cohort if cfg.cohort.variant != "Ind" else replace(cfg.cohort, variant="GML")
            runs.append((g, pair_name, co.train_cohort(graphs[g], split, seeded_cohort(gml, s), seed=s, workers=workers)))
        with open(metrics, "a", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=header, lineterminator="\n")
            for g, method, rep in runs:
                for row in co.metric_rows(rep):
                    w.writerow({"graph": g, **row})
                rows.append({"seed": s, "method": method, "graph": g, "test_acc": rep.target.test_acc})
        seconds[s] = time.perf_counter() - t0
    methods = [f"{target.architecture}-Ind", pair_name]
    grid = []
    for method in methods:
        cells = []
        for g in ("none", "random", "ba"):
            vals = [r["test_acc"] for r in rows if r["method"] == method and r["graph"] == g]
            cells.append(f"{np.mean(vals):.2f}" if vals else "N/A")
        grid.append([method] + cells)
    _write_csv(out / "structure_table.csv", ["method", "no_graph", "random", "barabasi_albert"], grid)
    _write_manifest(out, "bench structure", cfg, seeds, seconds, {"ba_m": m, "random_p": p})
    return RunResult(out, [], None, {"rows": rows, "grid": grid})
