"""Multi-target poisoning: host selection, trigger injection, label flipping,
plus the conventional subgraph-replacement baseline."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .core import FeatureKind, Graph, GraphDataset, GraphdoorError
from .rng import substream
from .triggers import Trigger


class OversubscriptionError(GraphdoorError):
    pass


class ReplacementInfeasibleError(GraphdoorError):
    pass


class InjectionStrategy(str, Enum):
    RANDOM = "random"
    HIGHEST_DEGREE = "highest_degree"
    LOWEST_DEGREE = "lowest_degree"
    HIGHEST_SIMILARITY = "highest_similarity"
    LOWEST_SIMILARITY = "lowest_similarity"


@dataclass(frozen=True)
class PoisonPlan:
    triggers: tuple[Trigger, ...]
    poisoning_ratio: float
    k: int
    strategy: InjectionStrategy
    host_indices: tuple[tuple[int, ...], ...]  # per target, train-set indices
    seed: int

    def __post_init__(self):
        seen: set[int] = set()
        for hosts in self.host_indices:
            overlap = seen.intersection(hosts)
            if overlap:
                raise ValueError(f"host index {min(overlap)} assigned to two targets")
            seen.update(hosts)


@dataclass(frozen=True)
class PoisonedDataset:
    dataset: GraphDataset
    plan: PoisonPlan
    origin: tuple[int, ...]  # -1 clean, j >= 0 poisoned for target index j

    def poisoned_counts(self) -> list[int]:
        counts = [0] * len(self.plan.triggers)
        for tag in self.origin:
            if tag >= 0:
                counts[tag] += 1
        return counts


def select_hosts(
    train: GraphDataset, triggers: list[Trigger], r: float, seed: int
) -> list[list[int]]:
    """Sample floor(r * |class i|) hosts per non-target class for each target,
    disjoint across targets."""
    by_class = [train.class_indices(y) for y in range(train.num_classes)]
    used: set[int] = set()
    host_lists: list[list[int]] = []
    for j, trig in enumerate(triggers):
        rng = substream(seed, "hosts", j)
        picks: list[int] = []
        for y in range(train.num_classes):
            if y == trig.target_class:
                continue
            want = math.floor(r * len(by_class[y]))
            if want == 0:
                continue
            avail = [i for i in by_class[y] if i not in used]
            if len(avail) < want:
                raise OversubscriptionError(
                    f"class {y} exhausted for target {trig.target_class}: "
                    f"need {want}, only {len(avail)} unpoisoned graphs left"
                )
            chosen = rng.choice(len(avail), size=want, replace=False)
            picks.extend(avail[i] for i in sorted(chosen.tolist()))
        if not picks:
            warnings.warn(
                f"target {trig.target_class} receives zero host graphs at r={r}",
                stacklevel=2,
            )
        used.update(picks)
        host_lists.append(sorted(picks))
    return host_lists


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0  # zero-norm rows are treated as similarity 0
    return float(np.dot(a, b) / (na * nb))


def choose_injection_node(
    g: Graph, trig: Trigger, strategy: InjectionStrategy, rng: np.random.Generator
) -> int:
    """Pick the host anchor node; deterministic ties go to the lowest index."""
    if strategy is InjectionStrategy.RANDOM:
        return int(rng.integers(g.num_nodes))
    if strategy is InjectionStrategy.HIGHEST_DEGREE:
        return int(np.argmax(g.degrees))
    if strategy is InjectionStrategy.LOWEST_DEGREE:
        return int(np.argmin(g.degrees))
    mean_row = trig.graph.features.mean(axis=0)
    sims = np.array([_cosine(row, mean_row) for row in g.features])
    if strategy is InjectionStrategy.HIGHEST_SIMILARITY:
        return int(np.argmax(sims))
    if strategy is InjectionStrategy.LOWEST_SIMILARITY:
        return int(np.argmin(sims))
    raise ValueError(f"unknown strategy {strategy}")


def inject(
    g: Graph,
    trig: Trigger,
    k: int,
    strategy: InjectionStrategy,
    rng: np.random.Generator,
    degree_features: bool = False,
) -> Graph:
    """Attach the trigger behind k bridge edges from one host anchor node.

    The host's nodes, edges and features are preserved; trigger nodes are
    re-indexed after the host's. With degree features, rows whose degree
    changed (the anchor and the bridged trigger nodes) are recomputed.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    anchor = choose_injection_node(g, trig, strategy, rng)
    tn = trig.num_nodes
    k_eff = min(k, tn)
    bridged = rng.choice(tn, size=k_eff, replace=False)
    bridged = np.sort(bridged)
    offset = g.num_nodes
    edges = list(g.edges)
    edges.extend((offset + a, offset + b) for a, b in trig.graph.edges)
    edges.extend((anchor, offset + int(t)) for t in bridged)
    feats = np.vstack([g.features, trig.graph.features])
    if degree_features:
        feats = feats.copy()
        feats[anchor, 0] += k_eff
        for t in bridged:
            feats[offset + int(t), 0] = trig.graph.degrees[int(t)] + 1
    return Graph(g.num_nodes + tn, tuple(edges), feats, g.label)


def replace_attack(g: Graph, trig: Trigger, rng: np.random.Generator) -> Graph:
    """Conventional baseline: overwrite an induced host subgraph's topology
    and features with the trigger, keeping boundary edges."""
    tn = trig.num_nodes
    if g.num_nodes < tn:
        raise ReplacementInfeasibleError(
            f"host has {g.num_nodes} nodes, trigger needs {tn}"
        )
    chosen = np.sort(rng.choice(g.num_nodes, size=tn, replace=False))
    selected = set(chosen.tolist())
    kept = [e for e in g.edges if not (e[0] in selected and e[1] in selected)]
    node_map = {int(t): int(h) for t, h in enumerate(chosen)}
    new_internal = [
        (min(node_map[a], node_map[b]), max(node_map[a], node_map[b]))
        for a, b in trig.graph.edges
    ]
    feats = g.features.copy()
    for t, h in node_map.items():
        feats[h] = trig.graph.features[t]
    return Graph(g.num_nodes, tuple(kept + new_internal), feats, g.label)


def build_poisoned_dataset(train: GraphDataset, plan: PoisonPlan) -> PoisonedDataset:
    """Replace each host graph by its trigger-injected, label-flipped version."""
    assignment: dict[int, int] = {}
    for j, hosts in enumerate(plan.host_indices):
        for idx in hosts:
            assignment[idx] = j
    degree_feats = train.feature_kind is FeatureKind.DEGREE
    graphs = []
    origin = []
    for idx, g in enumerate(train):
        j = assignment.get(idx)
        if j is None:
            graphs.append(g)
            origin.append(-1)
            continue
        trig = plan.triggers[j]
        rng = substream(plan.seed, "inject", j, idx)
        poisoned = inject(g, trig, plan.k, plan.strategy, rng, degree_feats)
        graphs.append(poisoned.with_label(trig.target_class))
        origin.append(j)
    ds = train.replace_graphs(graphs)
    return PoisonedDataset(ds, plan, tuple(origin))


def build_replaced_dataset(train: GraphDataset, plan: PoisonPlan) -> PoisonedDataset:
    """Baseline variant of build_poisoned_dataset using subgraph replacement."""
    assignment: dict[int, int] = {}
    for j, hosts in enumerate(plan.host_indices):
        for idx in hosts:
            assignment[idx] = j
    graphs = []
    origin = []
    for idx, g in enumerate(train):
        j = assignment.get(idx)
        if j is None:
            graphs.append(g)
            origin.append(-1)
            continue
        trig = plan.triggers[j]
        rng = substream(plan.seed, "replace", j, idx)
        if g.num_nodes < trig.num_nodes:
            graphs.append(g)  # too small to replace; left clean
            origin.append(-1)
            continue
        graphs.append(replace_attack(g, trig, rng).with_label(trig.target_class))
        origin.append(j)
    ds = train.replace_graphs(graphs)
    return PoisonedDataset(ds, plan, tuple(origin))


def poison_test_set(
    test: GraphDataset,
    trig: Trigger,
    k: int,
    strategy: InjectionStrategy,
    seed: int,
    mechanism: str = "injection",
    exclude_target_class: bool = False,
) -> GraphDataset:
    """Inject one trigger into every test graph; labels stay at ground truth."""
    degree_feats = test.feature_kind is FeatureKind.DEGREE
    graphs = []
    for idx, g in enumerate(test):
        if exclude_target_class and g.label == trig.target_class:
            continue
        rng = substream(seed, "test-poison", trig.trigger_id, idx)
        if mechanism == "replacement":
            if g.num_nodes < trig.num_nodes:
                graphs.append(g)
                continue
            graphs.append(replace_attack(g, trig, rng))
        else:
            graphs.append(inject(g, trig, k, strategy, rng, degree_feats))
    return test.replace_graphs(graphs)


def plan_to_dict(plan: PoisonPlan) -> dict:
    from .triggers import trigger_to_dict

    return {
        "poisoning_ratio": plan.poisoning_ratio,
        "k": plan.k,
        "strategy": plan.strategy.value,
        "seed": plan.seed,
        "host_indices": [list(h) for h in plan.host_indices],
        "triggers": [trigger_to_dict(t) for t in plan.triggers],
    }


def plan_from_dict(d: dict) -> PoisonPlan:
    from .triggers import trigger_from_dict

    return PoisonPlan(
        triggers=tuple(trigger_from_dict(t) for t in d["triggers"]),
        poisoning_ratio=d["poisoning_ratio"],
        k=d["k"],
        strategy=InjectionStrategy(d["strategy"]),
        host_indices=tuple(tuple(h) for h in d["host_indices"]),
        seed=d["seed"],
    )


def save_plan(plan: PoisonPlan, path) -> None:
    with open(path, "w") as fh:
        json.dump(plan_to_dict(plan), fh, indent=1)


def load_plan(path) -> PoisonPlan:
    with open(path) as fh:
        return plan_from_dict(json.load(fh))
