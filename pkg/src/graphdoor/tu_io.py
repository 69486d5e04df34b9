"""TUDataset-format parsing/serialization, synthetic data, and splits."""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (
    FeatureKind,
    Graph,
    GraphDataset,
    GraphdoorError,
    degree_feature_graph,
)
from .rng import substream


class ParseError(GraphdoorError):
    """Malformed TU bundle; carries the offending file and line number."""

    def __init__(self, filename: str, line: int, message: str):
        self.filename = filename
        self.line = line
        super().__init__(f"{filename}:{line}: {message}")


class SplitError(GraphdoorError):
    pass


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float
    seed: int
    stratified: bool = True

    def __post_init__(self):
        if not (0.0 < self.train_fraction < 1.0):
            raise ValueError("train_fraction must be in (0, 1)")


def _read_lines(path: Path) -> list[str]:
    with open(path, "r") as fh:
        lines = fh.read().split("\n")
    # tolerate one trailing blank line
    while lines and lines[-1].strip() == "":
        lines.pop()
    return lines


def _parse_int(tok: str, filename: str, line: int) -> int:
    try:
        return int(tok.strip())
    except ValueError:
        raise ParseError(filename, line, f"expected integer, got {tok!r}") from None


def parse_tu(directory) -> GraphDataset:
    """Parse a TUDataset directory (``<DS>_A.txt`` and friends) into a dataset.

    Both directions of each undirected edge appear in ``_A.txt``; they are
    collapsed to one edge. Asymmetric files still parse, with the count of
    one-directional pairs exposed in ``metadata["asymmetric_pairs"]``.
    """
    directory = Path(directory)
    a_files = sorted(directory.glob("*_A.txt"))
    if not a_files:
        raise FileNotFoundError(f"no *_A.txt file in {directory}")
    name = a_files[0].name[: -len("_A.txt")]

    def fpath(suffix: str) -> Path:
        return directory / f"{name}_{suffix}.txt"

    for required in ("A", "graph_indicator", "graph_labels"):
        if not fpath(required).exists():
            raise FileNotFoundError(f"missing required file {fpath(required)}")

    ind_file = fpath("graph_indicator").name
    indicator_lines = _read_lines(fpath("graph_indicator"))
    node_graph = []  # 0-based graph id per node
    for i, line in enumerate(indicator_lines, start=1):
        gid = _parse_int(line, ind_file, i)
        node_graph.append(gid - 1)
    num_nodes_total = len(node_graph)
    if num_nodes_total == 0:
        raise ParseError(ind_file, 1, "empty graph indicator")
    num_graphs = max(node_graph) + 1
    seen = set(node_graph)
    for gid in range(num_graphs):
        if gid not in seen:
            raise ParseError(ind_file, 1, f"graph ids not contiguous: missing graph {gid + 1}")
    if min(node_graph) < 0:
        raise ParseError(ind_file, node_graph.index(min(node_graph)) + 1, "graph id < 1")

    lab_file = fpath("graph_labels").name
    label_lines = _read_lines(fpath("graph_labels"))
    if len(label_lines) != num_graphs:
        # point at the first missing (or first surplus) row
        raise ParseError(
            lab_file,
            min(len(label_lines), num_graphs) + 1,
            f"expected {num_graphs} label rows, got {len(label_lines)}",
        )
    raw_labels = [_parse_int(line, lab_file, i) for i, line in enumerate(label_lines, start=1)]
    label_values = sorted(set(raw_labels))
    label_map = {orig: new for new, orig in enumerate(label_values)}
    labels = [label_map[v] for v in raw_labels]

    a_file = fpath("A").name
    a_lines = _read_lines(fpath("A"))
    per_graph_edges: list[set[tuple[int, int]]] = [set() for _ in range(num_graphs)]
    directed_pairs: set[tuple[int, int]] = set()
    node_offset = np.zeros(num_graphs, dtype=np.int64)
    sizes = np.bincount(node_graph, minlength=num_graphs)
    node_offset[1:] = np.cumsum(sizes)[:-1]
    for i, line in enumerate(a_lines, start=1):
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(a_file, i, f"expected 'a, b', got {line!r}")
        a = _parse_int(parts[0], a_file, i)
        b = _parse_int(parts[1], a_file, i)
        if not (1 <= a <= num_nodes_total) or not (1 <= b <= num_nodes_total):
            raise ParseError(a_file, i, f"node id out of range: ({a}, {b})")
        ga, gb = node_graph[a - 1], node_graph[b - 1]
        if ga != gb:
            raise ParseError(a_file, i, f"edge ({a}, {b}) crosses graphs {ga + 1} and {gb + 1}")
        if a == b:
            raise ParseError(a_file, i, f"self-loop at node {a}")
        directed_pairs.add((a, b))
        la, lb = a - 1 - node_offset[ga], b - 1 - node_offset[ga]
        per_graph_edges[ga].add((min(la, lb), max(la, lb)))
    asymmetric = sum(1 for (a, b) in directed_pairs if (b, a) not in directed_pairs)

    feature_kind = FeatureKind.INTRINSIC
    features = None
    metadata: dict = {"name": name, "label_map": label_map, "asymmetric_pairs": asymmetric}
    attr_path = fpath("node_attributes")
    nodelab_path = fpath("node_labels")
    if attr_path.exists():
        attr_file = attr_path.name
        attr_lines = _read_lines(attr_path)
        if len(attr_lines) != num_nodes_total:
            raise ParseError(
                attr_file,
                min(len(attr_lines), num_nodes_total) + 1,
                f"expected {num_nodes_total} attribute rows, got {len(attr_lines)}",
            )
        rows = []
        width = None
        for i, line in enumerate(attr_lines, start=1):
            try:
                row = [float(tok.strip()) for tok in line.split(",")]
            except ValueError:
                raise ParseError(attr_file, i, f"malformed attribute row {line!r}") from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ParseError(attr_file, i, f"expected {width} attributes, got {len(row)}")
            rows.append(row)
        features = np.array(rows, dtype=np.float64)
    elif nodelab_path.exists():
        nl_file = nodelab_path.name
        nl_lines = _read_lines(nodelab_path)
        if len(nl_lines) != num_nodes_total:
            raise ParseError(
                nl_file,
                min(len(nl_lines), num_nodes_total) + 1,
                f"expected {num_nodes_total} node label rows",
            )
        node_labels = [_parse_int(line, nl_file, i) for i, line in enumerate(nl_lines, start=1)]
        lo, hi = min(node_labels), max(node_labels)
        width = hi - lo + 1
        features = np.zeros((num_nodes_total, width), dtype=np.float64)
        features[np.arange(num_nodes_total), [v - lo for v in node_labels]] = 1.0
        metadata["node_label_offset"] = lo
    else:
        feature_kind = FeatureKind.DEGREE

    graphs = []
    for gid in range(num_graphs):
        n = int(sizes[gid])
        edges = tuple(sorted(per_graph_edges[gid]))
        if features is not None:
            feats = features[node_offset[gid] : node_offset[gid] + n]
            g = Graph(n, edges, feats, labels[gid])
        else:
            g = Graph(n, edges, np.zeros((n, 1)), labels[gid])
            g = degree_feature_graph(g).with_label(labels[gid])
        graphs.append(g)
    return GraphDataset(tuple(graphs), len(label_values), feature_kind, metadata)


def write_tu(ds: GraphDataset, directory, name: str = "DS") -> None:
    """Serialize a dataset back to TU format (both edge directions listed)."""
    directory = Path(directory)
    os.makedirs(directory, exist_ok=True)
    a_lines = []
    ind_lines = []
    lab_lines = []
    attr_lines = []
    offset = 0
    for gid, g in enumerate(ds, start=1):
        for v in range(g.num_nodes):
            ind_lines.append(str(gid))
        for a, b in g.edges:
            a_lines.append(f"{offset + a + 1}, {offset + b + 1}")
            a_lines.append(f"{offset + b + 1}, {offset + a + 1}")
        lab_lines.append(str(g.label))
        for row in g.features:
            attr_lines.append(", ".join(repr(float(x)) for x in row))
        offset += g.num_nodes
    (directory / f"{name}_A.txt").write_text("\n".join(a_lines) + "\n")
    (directory / f"{name}_graph_indicator.txt").write_text("\n".join(ind_lines) + "\n")
    (directory / f"{name}_graph_labels.txt").write_text("\n".join(lab_lines) + "\n")
    if ds.feature_kind is FeatureKind.INTRINSIC:
        (directory / f"{name}_node_attributes.txt").write_text("\n".join(attr_lines) + "\n")


def generate_synthetic(
    classes: int,
    per_class: int,
    nodes_mean: int,
    feature_dim: int,
    class_sep: float,
    seed: int,
) -> GraphDataset:
    """Seeded synthetic graph-classification dataset.

    Topology is a two-block stochastic block model with class-dependent
    inter-block probability; features are class-mean Gaussians with unit
    variance and mean separation scaled by class_sep.
    """
    if classes < 2:
        raise ValueError("need at least 2 classes")
    if per_class < 1:
        raise ValueError("per_class must be >= 1")
    if feature_dim < 1:
        raise ValueError("feature_dim must be >= 1")
    mean_rng = substream(seed, "sbm-class-means")
    class_means = class_sep * mean_rng.standard_normal((classes, feature_dim))
    graphs = []
    idx = 0
    for y in range(classes):
        p_intra = 0.6
        p_inter = 0.1 * (1 + y % 2)
        for _ in range(per_class):
            topo = substream(seed, "sbm-topology", idx)
            feat = substream(seed, "sbm-features", idx)
            n = int(np.clip(topo.poisson(nodes_mean), 8, 2 * nodes_mean))
            half = n // 2
            block = np.array([0] * half + [1] * (n - half))
            iu, ju = np.triu_indices(n, k=1)
            p = np.where(block[iu] == block[ju], p_intra, p_inter)
            mask = topo.random(len(iu)) < p
            edges = tuple(zip(iu[mask].tolist(), ju[mask].tolist()))
            feats = class_means[y] + feat.standard_normal((n, feature_dim))
            graphs.append(Graph(n, edges, feats, y))
            idx += 1
    return GraphDataset(
        tuple(graphs),
        classes,
        FeatureKind.INTRINSIC,
        {"name": f"synthetic-c{classes}-n{per_class}", "seed": seed},
    )


def split(ds: GraphDataset, spec: SplitSpec) -> tuple[GraphDataset, GraphDataset]:
    """Deterministic train/test split; stratified keeps per-class proportions."""
    if len(ds) == 0:
        raise SplitError("cannot split an empty dataset")
    rng = substream(spec.seed, "split")
    if spec.stratified:
        train_idx: list[int] = []
        test_idx: list[int] = []
        for y in range(ds.num_classes):
            members = ds.class_indices(y)
            if 0 < len(members) < 2:
                raise SplitError(f"class {y} has fewer than 2 graphs; cannot stratify")
            members = np.array(members)
            rng.shuffle(members)
            cut = int(round(spec.train_fraction * len(members)))
            cut = min(max(cut, 1), len(members) - 1)
            train_idx.extend(members[:cut].tolist())
            test_idx.extend(members[cut:].tolist())
        train_idx.sort()
        test_idx.sort()
    else:
        perm = rng.permutation(len(ds))
        cut = int(round(spec.train_fraction * len(ds)))
        cut = min(max(cut, 1), len(ds) - 1)
        train_idx = sorted(perm[:cut].tolist())
        test_idx = sorted(perm[cut:].tolist())
    train = ds.replace_graphs(ds.graphs[i] for i in train_idx)
    test = ds.replace_graphs(ds.graphs[i] for i in test_idx)
    return train, test
