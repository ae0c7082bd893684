"""Command-line driver.

    gml train    --config CFG [--seeds 0,1,2] [--out DIR] [--parallel N] [--dump-activations]
    gml distill  --config CFG --teacher PATH [--with-baseline]
    gml analyze  cka --a DUMP --b DUMP | ensemble --config CFG [--sizes 1,2,3,5] | wilcoxon --x CSV --y CSV
    gml bench    {cohort_size,noise,structure} --config CFG
    gml presets  [NAME]

``CFG`` is a YAML experiment file or a preset name. Named datasets are read
from ``$GML_DATA_ROOT`` (or ``--data-root``).

Exit codes: 0 success, 1 runtime failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import yaml

from . import experiments as ex
from . import presets
from .errors import ConfigError, GMLError

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2

log = logging.getLogger("gml")


def _common(p: argparse.ArgumentParser, config: bool = True) -> None:
    if config:
        p.add_argument("--config", required=True, help="YAML experiment file or preset name")
        p.add_argument("--seeds", help="comma list or range, e.g. 0,1,2 or 0-9 (overrides the config)")
    p.add_argument("--out", type=Path, help="output directory (default runs/<name>/<command>)")
    p.add_argument("--parallel", type=int, default=1, metavar="N", help="worker threads for cohort members")
    p.add_argument("--data-root", help=f"dataset root (default ${ex.DATA_ROOT_ENV} or ./data)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gml", description="Mutual learning for graph neural network cohorts.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a cohort once per seed")
    _common(p)
    p.add_argument("--dump-activations", action="store_true", help="save per-layer activations for CKA")

    p = sub.add_parser("distill", help="distill a trained teacher into an MLP")
    _common(p)
    p.add_argument("--teacher", required=True, help="checkpoint directory or a train output directory")
    p.add_argument("--with-baseline", action="store_true", help="also train a plain MLP for comparison")

    p = sub.add_parser("analyze", help="CKA, ensemble and significance analyses")
    kinds = p.add_subparsers(dest="kind", required=True)
    k = kinds.add_parser("cka", help="layer-by-layer CKA between two activation dumps")
    k.add_argument("--a", required=True, type=Path)
    k.add_argument("--b", required=True, type=Path)
    _common(k, config=False)
    k = kinds.add_parser("ensemble", help="deep ensembles vs mutual-learning cohort ensembles")
    _common(k)
    k.add_argument("--sizes", default="1,2,3,5")
    k = kinds.add_parser("wilcoxon", help="one-sided signed-rank test of x > y on paired metric logs")
    k.add_argument("--x", required=True, type=Path)
    k.add_argument("--y", required=True, type=Path)
    k.add_argument("--column", default="test_acc")
    _common(k, config=False)

    p = sub.add_parser("bench", help="sweeps over cohort size, feature noise or graph structure")
    p.add_argument("sweep", choices=("cohort_size", "noise", "structure"))
    _common(p)
    p.add_argument("--with-baseline", action="store_true", help=argparse.SUPPRESS)

    p = sub.add_parser("presets", help="list presets or print one as YAML")
    p.add_argument("name", nargs="?")
    return parser


def _out(args, cfg_name: str, command: str) -> Path:
    return args.out or Path("runs") / cfg_name / command


def _config(args):
    cfg = ex.load_config(args.config, args.data_root)
    seeds = ex.parse_seeds(args.seeds) if args.seeds else None
    if args.parallel < 1:
        raise ConfigError("must be >= 1", "parallel")
    return cfg, seeds


def _print_table(path: Path) -> None:
    print(path.read_text().rstrip())


def dispatch(args) -> int:
    if args.command == "presets":
        if args.name:
            print(yaml.safe_dump(presets.get(args.name), sort_keys=False).rstrip())
        else:
            print("\n".join(presets.names()))
        return EXIT_OK

    if args.command == "analyze" and args.kind == "cka":
        out = args.out or Path("runs") / "cka"
        ex.run_cka(args.a, args.b, out)
        _print_table(out / "cka.csv")
        return EXIT_OK
    if args.command == "analyze" and args.kind == "wilcoxon":
        out = args.out or Path("runs") / "wilcoxon"
        res = ex.run_wilcoxon(args.x, args.y, out, args.column)
        print(f"n={res.n} W+={res.statistic:g} one-sided p={res.p_value:.6g} ({res.method})")
        return EXIT_OK

    cfg, seeds = _config(args)
    if args.command == "train":
        out = _out(args, cfg.name, "train")
        ex.run_train(cfg, out, seeds=seeds, workers=args.parallel, activations=args.dump_activations, root=args.data_root)
        _print_table(out / "summary.csv")
    elif args.command == "distill":
        out = _out(args, cfg.name, "distill")
        res = ex.run_distill(cfg, args.teacher, out, seeds=seeds, with_baseline=args.with_baseline, root=args.data_root)
        _print_table(out / "summary.csv")
        if "delta_vs_baseline" in res.extra:
            print(f"delta vs baseline: {res.extra['delta_vs_baseline']:+.2f}")
    elif args.command == "analyze":
        out = _out(args, cfg.name, "ensemble")
        sizes = [int(x) for x in ex.parse_seeds(args.sizes)]
        ex.run_ensemble(cfg, out, sizes=sizes, seeds=seeds, workers=args.parallel, root=args.data_root)
        _print_table(out / "ensemble_summary.csv")
    elif args.command == "bench":
        out = _out(args, cfg.name, args.sweep)
        if args.sweep == "cohort_size":
            ex.bench_cohort_size(cfg, out, seeds=seeds, workers=args.parallel, root=args.data_root)
            _print_table(out / "cohort_size_summary.csv")
        elif args.sweep == "noise":
            ex.bench_noise(cfg, out, seeds=seeds, workers=args.parallel, root=args.data_root)
            _print_table(out / "noise_table.csv")
        else:
            ex.bench_structure(cfg, out, seeds=seeds, workers=args.parallel, root=args.data_root)
            _print_table(out / "structure_table.csv")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return dispatch(args)
    except ConfigError as e:
        print(f"gml: configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (GMLError, OSError, ValueError, ArithmeticError) as e:
        print(f"gml: error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
