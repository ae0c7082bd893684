"""Shipped experiment presets.

Each preset is a plain dict in the same schema as a YAML experiment file, so
``gml presets NAME > my.yaml`` gives an editable starting point.

Naming: ``<dataset>-<pair>-<variant>``. In a pair name such as
``sage-gcn-s`` the first two tokens are the members in order and the final
letter names the target (``s`` GraphSage, ``c`` GCN). The target always gets
member seed 0, so its ``Ind`` run is the same model across pairs.
"""
from __future__ import annotations

import copy

from .errors import ConfigError

NODE_DATASETS = ("cora", "citeseer", "pubmed")

PAIRS = {
    # pair -> (member architectures in order, target index)
    "sage-gcn-s": (("SAGE", "GCN"), 0),
    "gat-sage-s": (("GAT", "SAGE"), 1),
    "gcn-gat-c": (("GCN", "GAT"), 0),
}

VARIANT_SLUGS = {"ind": "Ind", "gml": "GML", "gmlw": "GML-W", "gmlc": "GML-C", "gmlco": "GML-Co"}

# (gamma, beta) per dataset. Cora's beta is not stated in the source; 1 is used.
PENALTY_WEIGHTS = {"cora": (0.01, 1.0), "citeseer": (1.0, 1.0), "pubmed": (1.0, 1.0), "proteins": (1.0, 1.0)}

NODE_SCHEDULE = {
    "temperature": 1.0,
    "learning_rate": 0.01,
    "weight_decay": 5e-4,
    "max_epochs": 3000,
    "patience": 1500,
    "weight_hidden": 64,
}
GRAPH_SCHEDULE = {
    "temperature": 6.0,
    "learning_rate": 0.01,
    "weight_decay": 5e-4,
    "max_epochs": 1000,
    "patience": 200,
    "weight_hidden": 16,
}
# Desk-scale synthetic stand-in: no published reference, so a shorter schedule.
SYNTHETIC_SCHEDULE = {**NODE_SCHEDULE, "max_epochs": 400, "patience": 100}

PLANTED = {"name": "planted", "options": {"n": 600, "num_classes": 7, "num_features": 300, "p_in": 0.02, "p_out": 0.001, "seed": 0}}

NOISE_SCALES = [0.0, 0.1, 0.3, 0.5, 0.9]
COHORT_SIZES = [1, 2, 3, 5]


def _members(pair: str) -> tuple[list[dict], int]:
    archs, target = PAIRS[pair]
    members = []
    peer_seed = 1
    for i, arch in enumerate(archs):
        if i == target:
            seed = 0
        else:
            seed, peer_seed = peer_seed, peer_seed + 1
        members.append({"architecture": arch, "seed": seed})
    return members, target


def _cohort(pair: str, variant: str, schedule: dict, gamma: float, beta: float, task: str = "node") -> dict:
    members, target = _members(pair)
    return {
        "members": members,
        "target_index": target,
        "variant": variant,
        "gamma": gamma,
        "beta": beta,
        "task": task,
        **schedule,
    }


def _build() -> dict[str, dict]:
    out: dict[str, dict] = {}
    for ds in NODE_DATASETS + ("planted",):
        gamma, beta = PENALTY_WEIGHTS.get(ds, (1.0, 1.0))
        schedule = SYNTHETIC_SCHEDULE if ds == "planted" else NODE_SCHEDULE
        dataset = copy.deepcopy(PLANTED) if ds == "planted" else {"name": ds}
        for pair in PAIRS:
            for slug, variant in VARIANT_SLUGS.items():
                out[f"{ds}-{pair}-{slug}"] = {
                    "dataset": copy.deepcopy(dataset),
                    "task": "node",
                    "seeds": list(range(10)),
                    "cohort": _cohort(pair, variant, schedule, gamma, beta),
                }
    gamma, beta = PENALTY_WEIGHTS["proteins"]
    for pair in PAIRS:
        for slug, variant in VARIANT_SLUGS.items():
            out[f"proteins-{pair}-{slug}"] = {
                "dataset": {"name": "proteins"},
                "task": "graph",
                "seeds": list(range(5)),
                "cohort": _cohort(pair, variant, GRAPH_SCHEDULE, gamma, beta, "graph"),
            }
    for ds in ("cora", "planted"):
        base = out[f"{ds}-gcn-gat-c-gmlc"]
        out[f"{ds}-noise"] = {
            **copy.deepcopy(base),
            "bench": {"noise_scales": list(NOISE_SCALES), "variants": ["GML-C", "GML", "Ind"]},
        }
    for ds in ("citeseer", "planted"):
        base = out[f"{ds}-gcn-gat-c-gml"]
        cfg = copy.deepcopy(base)
        cfg["cohort"]["members"] = [
            {"architecture": "GCN", "seed": 0},
            {"architecture": "GAT", "seed": 1},
            {"architecture": "SAGE", "seed": 2},
        ]
        cfg["bench"] = {"cohort_sizes": list(COHORT_SIZES)}
        out[f"{ds}-cohort-size"] = cfg
    iris = _cohort("gcn-gat-c", "GML", NODE_SCHEDULE, 0.0, 0.0)
    out["iris-structure"] = {
        "dataset": {"name": "iris"},
        "task": "node",
        "seeds": list(range(5)),
        "cohort": iris,
        "bench": {"ba_m": 2, "random_p": "match_ba"},
    }
    out["citeseer-cka"] = {
        "dataset": {"name": "citeseer"},
        "task": "node",
        "seeds": [0, 1],
        "cohort": {
            **_cohort("sage-gcn-s", "Ind", NODE_SCHEDULE, 1.0, 1.0),
            "members": [
                {"architecture": "GCN", "seed": 0, "num_layers": 3},
                {"architecture": "SAGE", "seed": 1, "num_layers": 3},
            ],
            "target_index": 0,
        },
    }
    return out


PRESETS = _build()


def names() -> list[str]:
    return sorted(PRESETS)


def get(name: str) -> dict:
    try:
        return copy.deepcopy(PRESETS[name])
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; run `gml presets` for the list", "config") from None
