"""Seeded Erdős–Rényi trigger subgraphs, one per target class.

Triggers use the exact-edge-count ER variant: for node count n and edge
density rho, exactly round(rho * n * (n-1) / 2) edges are drawn uniformly
without replacement, so density sweeps are reproducible and monotone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .core import DatasetStats, FeatureKind, Graph, GraphdoorError
from .rng import substream

ER_VARIANT = "gnm"
DISTINCTNESS_RETRIES = 64


class DegenerateTriggerError(GraphdoorError):
    pass


class DistinctnessError(GraphdoorError):
    pass


@dataclass(frozen=True)
class TriggerSpec:
    size_fraction: float
    edge_density: float
    feature_mode: str = "uniform"  # "uniform" | "degree"
    x_min: float = 0.0
    x_max: float = 1.0
    seed: int = 0
    per_column_range: bool = False  # reserved: per-column (x_min, x_max) arrays

    def __post_init__(self):
        if self.size_fraction <= 0:
            raise ValueError("size_fraction must be positive")
        if not (0.0 < self.edge_density <= 1.0):
            raise ValueError("edge_density must be in (0, 1]")
        if self.feature_mode not in ("uniform", "degree"):
            raise ValueError(f"unknown feature_mode {self.feature_mode!r}")


@dataclass(frozen=True)
class Trigger:
    target_class: int
    graph: Graph
    trigger_id: int
    seed: int = 0

    @property
    def num_nodes(self) -> int:
        return self.graph.num_nodes

    @property
    def num_edges(self) -> int:
        return self.graph.num_edges


def edge_count_for_density(n: int, rho: float) -> int:
    """Exact edge budget: round(rho * n * (n-1) / 2)."""
    return int(round(rho * n * (n - 1) / 2.0))


def resolve_node_count(spec: TriggerSpec, stats: DatasetStats) -> int:
    """Trigger node count from the size fraction of the dataset's mean size."""
    return max(2, int(round(spec.size_fraction * stats.avg_nodes)))


def _er_edges(n: int, m: int, rng: np.random.Generator) -> tuple[tuple[int, int], ...]:
    iu, ju = np.triu_indices(n, k=1)
    pick = rng.choice(len(iu), size=m, replace=False)
    pick.sort()
    return tuple(zip(iu[pick].tolist(), ju[pick].tolist()))


def generate_trigger(
    spec: TriggerSpec,
    stats: DatasetStats,
    target: int,
    trigger_id: int,
    feature_kind: FeatureKind = FeatureKind.INTRINSIC,
    retry: int = 0,
) -> Trigger:
    """One ER trigger bound to a target class, deterministic in (spec, id)."""
    n = resolve_node_count(spec, stats)
    m = edge_count_for_density(n, spec.edge_density)
    if m == 0:
        raise DegenerateTriggerError(
            f"density {spec.edge_density} on {n} nodes yields 0 edges"
        )
    rng = substream(spec.seed, "trigger", target, trigger_id, retry)
    edges = _er_edges(n, m, rng)
    if feature_kind is FeatureKind.DEGREE or spec.feature_mode == "degree":
        g = Graph(n, edges, np.zeros((n, 1)))
        feats = g.degrees.astype(np.float64).reshape(-1, 1)
    else:
        feats = rng.uniform(spec.x_min, spec.x_max, size=(n, stats.feature_dim))
    return Trigger(target, Graph(n, edges, feats), trigger_id, spec.seed)


def generate_trigger_family(
    spec: TriggerSpec,
    stats: DatasetStats,
    targets: list[int],
    feature_kind: FeatureKind = FeatureKind.INTRINSIC,
) -> list[Trigger]:
    """One structurally distinct trigger per target class."""
    if len(set(targets)) != len(targets):
        raise ValueError("target classes must be distinct")
    triggers: list[Trigger] = []
    seen_edges: set[tuple] = set()
    for j, target in enumerate(targets):
        for retry in range(DISTINCTNESS_RETRIES):
            trig = generate_trigger(spec, stats, target, j, feature_kind, retry)
            if trig.graph.edges not in seen_edges:
                break
        else:
            raise DistinctnessError(
                f"could not generate a distinct trigger for target {target} "
                f"after {DISTINCTNESS_RETRIES} retries"
            )
        seen_edges.add(trig.graph.edges)
        triggers.append(trig)
    return triggers


def trigger_to_dict(trig: Trigger) -> dict:
    return {
        "target_class": trig.target_class,
        "trigger_id": trig.trigger_id,
        "num_nodes": trig.num_nodes,
        "edges": [list(e) for e in trig.graph.edges],
        "features": trig.graph.features.tolist(),
        "seed": trig.seed,
        "er_variant": ER_VARIANT,
    }


def trigger_from_dict(d: dict) -> Trigger:
    g = Graph(
        d["num_nodes"],
        tuple(tuple(e) for e in d["edges"]),
        np.array(d["features"], dtype=np.float64),
    )
    return Trigger(d["target_class"], g, d["trigger_id"], d.get("seed", 0))


def save_triggers(triggers: list[Trigger], path) -> None:
    with open(path, "w") as fh:
        json.dump([trigger_to_dict(t) for t in triggers], fh, indent=1)


def load_triggers(path) -> list[Trigger]:
    with open(path) as fh:
        return [trigger_from_dict(d) for d in json.load(fh)]
