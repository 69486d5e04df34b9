"""Core value types: graphs, datasets, and the structural arithmetic on them.

Graphs are undirected, simple, with dense 0-based node indices. All types are
immutable after construction; every transformation builds new values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np


class GraphdoorError(Exception):
    """Base class for all library errors."""


class EmptyDatasetError(GraphdoorError, ValueError):
    pass


class FeatureKind(str, Enum):
    INTRINSIC = "intrinsic"
    DEGREE = "degree"


def canonical_edges(edges) -> tuple[tuple[int, int], ...]:
    """Normalize to sorted unique (min, max) pairs."""
    return tuple(sorted({(min(a, b), max(a, b)) for a, b in edges}))


@dataclass(frozen=True, eq=False)  # identity eq/hash; value equality via graphs_equal
class Graph:
    """One classification sample: nodes, undirected edges, features, label."""

    num_nodes: int
    edges: tuple[tuple[int, int], ...]
    features: np.ndarray
    label: int = 0

    def __post_init__(self):
        if self.num_nodes < 1:
            raise ValueError("graph must have at least one node")
        edges = canonical_edges(self.edges)
        for a, b in edges:
            if a == b:
                raise ValueError(f"self-loop at node {a}")
            if not (0 <= a < self.num_nodes and 0 <= b < self.num_nodes):
                raise IndexError(f"edge ({a}, {b}) out of range for {self.num_nodes} nodes")
        feats = np.ascontiguousarray(self.features, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[0] != self.num_nodes:
            raise ValueError(
                f"features must be ({self.num_nodes}, d), got {feats.shape}"
            )
        feats.setflags(write=False)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "features", feats)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @cached_property
    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.num_nodes, dtype=np.int64)
        for a, b in self.edges:
            deg[a] += 1
            deg[b] += 1
        deg.setflags(write=False)
        return deg

    def with_label(self, label: int) -> "Graph":
        return Graph(self.num_nodes, self.edges, self.features, label)


def degree(g: Graph, v: int) -> int:
    """Number of edges incident to node v."""
    if not (0 <= v < g.num_nodes):
        raise IndexError(f"node {v} out of range for {g.num_nodes} nodes")
    return int(g.degrees[v])


def graphs_equal(a: Graph, b: Graph) -> bool:
    return (
        a.num_nodes == b.num_nodes
        and a.edges == b.edges
        and a.label == b.label
        and a.features.shape == b.features.shape
        and np.array_equal(a.features, b.features)
    )


@dataclass(frozen=True)
class GraphDataset:
    """Ordered collection of graphs sharing a feature contract."""

    graphs: tuple[Graph, ...]
    num_classes: int
    feature_kind: FeatureKind = FeatureKind.INTRINSIC
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        graphs = tuple(self.graphs)
        object.__setattr__(self, "graphs", graphs)
        if graphs:
            d = graphs[0].feature_dim
            for i, g in enumerate(graphs):
                if g.feature_dim != d:
                    raise ValueError(f"graph {i} has feature dim {g.feature_dim}, expected {d}")
                if not (0 <= g.label < self.num_classes):
                    raise ValueError(f"graph {i} label {g.label} outside [0, {self.num_classes})")
            if self.feature_kind is FeatureKind.DEGREE:
                if d != 1:
                    raise ValueError("degree features require feature_dim 1")
                for i, g in enumerate(graphs):
                    if not np.array_equal(g.features[:, 0], g.degrees.astype(np.float64)):
                        raise ValueError(f"graph {i} degree features do not match degrees")

    def __len__(self) -> int:
        return len(self.graphs)

    def __iter__(self):
        return iter(self.graphs)

    def __getitem__(self, i) -> Graph:
        return self.graphs[i]

    @property
    def feature_dim(self) -> int:
        if not self.graphs:
            raise EmptyDatasetError("empty dataset has no feature dim")
        return self.graphs[0].feature_dim

    def replace_graphs(self, graphs) -> "GraphDataset":
        return GraphDataset(tuple(graphs), self.num_classes, self.feature_kind, dict(self.metadata))

    def class_indices(self, label: int) -> list[int]:
        return [i for i, g in enumerate(self.graphs) if g.label == label]


@dataclass(frozen=True)
class DatasetStats:
    num_graphs: int
    avg_nodes: float
    avg_edges: float
    feature_dim: int
    num_classes: int
    class_counts: tuple[int, ...]


def compute_stats(ds: GraphDataset) -> DatasetStats:
    """Exact dataset averages and per-class counts."""
    if len(ds) == 0:
        raise EmptyDatasetError("cannot compute stats of an empty dataset")
    counts = [0] * ds.num_classes
    total_nodes = 0
    total_edges = 0
    for g in ds:
        counts[g.label] += 1
        total_nodes += g.num_nodes
        total_edges += g.num_edges
    n = len(ds)
    return DatasetStats(
        num_graphs=n,
        avg_nodes=total_nodes / n,
        avg_edges=total_edges / n,
        feature_dim=ds.feature_dim,
        num_classes=ds.num_classes,
        class_counts=tuple(counts),
    )


def degree_feature_graph(g: Graph) -> Graph:
    feats = g.degrees.astype(np.float64).reshape(-1, 1)
    return Graph(g.num_nodes, g.edges, feats, g.label)


def relabel_to_degree_features(ds: GraphDataset) -> GraphDataset:
    """Replace every node's feature row by its degree (d becomes 1)."""
    graphs = tuple(degree_feature_graph(g) for g in ds)
    return GraphDataset(graphs, ds.num_classes, FeatureKind.DEGREE, dict(ds.metadata))


def feature_range(ds: GraphDataset) -> tuple[float, float]:
    """Global (min, max) over every feature entry in the dataset."""
    if len(ds) == 0:
        raise EmptyDatasetError("empty dataset has no feature range")
    lo = min(float(g.features.min()) for g in ds if g.features.size)
    hi = max(float(g.features.max()) for g in ds if g.features.size)
    return lo, hi
