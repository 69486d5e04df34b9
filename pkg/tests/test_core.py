import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import graphdoor as gd
from graphdoor.core import (
    EmptyDatasetError,
    FeatureKind,
    compute_stats,
    degree,
    feature_range,
    graphs_equal,
    relabel_to_degree_features,
)


def triangle():
    return gd.Graph(3, ((0, 1), (1, 2), (0, 2)), np.zeros((3, 2)), 0)


def test_degree_triangle():
    g = triangle()
    for v in range(3):
        assert degree(g, v) == 2


def test_degree_isolated_and_path():
    iso = gd.Graph(1, (), np.zeros((1, 1)))
    assert degree(iso, 0) == 0
    path = gd.Graph(3, ((0, 1), (1, 2)), np.zeros((3, 1)))
    assert degree(path, 1) == 2
    assert degree(path, 0) == 1


def test_degree_out_of_range():
    with pytest.raises(IndexError):
        degree(triangle(), 3)


def test_graph_rejects_self_loop_and_bad_edges():
    with pytest.raises(ValueError):
        gd.Graph(2, ((0, 0),), np.zeros((2, 1)))
    with pytest.raises(IndexError):
        gd.Graph(2, ((0, 5),), np.zeros((2, 1)))
    with pytest.raises(ValueError):
        gd.Graph(3, (), np.zeros((2, 1)))  # feature row mismatch


def test_edges_canonicalized():
    g = gd.Graph(3, ((2, 1), (1, 0), (1, 2)), np.zeros((3, 1)))
    assert g.edges == ((0, 1), (1, 2))


def test_compute_stats_single_triangle():
    ds = gd.GraphDataset((triangle(),), 1)
    s = compute_stats(ds)
    assert s.num_graphs == 1
    assert s.avg_nodes == 3
    assert s.avg_edges == 3


def test_compute_stats_average():
    g2 = gd.Graph(2, ((0, 1),), np.zeros((2, 2)), 0)
    g4 = gd.Graph(4, ((0, 1), (2, 3)), np.zeros((4, 2)), 0)
    s = compute_stats(gd.GraphDataset((g2, g4), 1))
    assert s.avg_nodes == 3.0
    assert sum(s.class_counts) == s.num_graphs


def test_compute_stats_empty():
    with pytest.raises(EmptyDatasetError):
        compute_stats(gd.GraphDataset((), 1))


def test_compute_stats_incremental_update(small_ds):
    # closed-form incremental average matches full recomputation
    s = compute_stats(small_ds)
    extra = gd.Graph(3, ((0, 1), (1, 2), (0, 2)), np.zeros((3, 3)), 0)
    grown = gd.GraphDataset(small_ds.graphs + (extra,), small_ds.num_classes)
    s2 = compute_stats(grown)
    k = s.num_graphs
    assert s2.avg_nodes == pytest.approx((s.avg_nodes * k + extra.num_nodes) / (k + 1))
    assert s2.avg_edges == pytest.approx((s.avg_edges * k + extra.num_edges) / (k + 1))


def test_relabel_to_degree_features_triangle():
    ds = relabel_to_degree_features(gd.GraphDataset((triangle(),), 1))
    assert ds.feature_kind is FeatureKind.DEGREE
    assert np.array_equal(ds[0].features, [[2], [2], [2]])


def test_relabel_star_and_empty():
    star = gd.Graph(5, ((0, 1), (0, 2), (0, 3), (0, 4)), np.zeros((5, 3)))
    out = relabel_to_degree_features(gd.GraphDataset((star,), 1))
    assert out[0].features[0, 0] == 4
    assert all(out[0].features[v, 0] == 1 for v in range(1, 5))
    empty = gd.Graph(3, (), np.zeros((3, 2)))
    out = relabel_to_degree_features(gd.GraphDataset((empty,), 1))
    assert np.array_equal(out[0].features, [[0], [0], [0]])


def test_relabel_idempotent(small_ds):
    once = relabel_to_degree_features(small_ds)
    twice = relabel_to_degree_features(once)
    assert all(graphs_equal(a, b) for a, b in zip(once, twice))


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 12), st.data())
def test_handshake_lemma(n, data):
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    chosen = data.draw(st.sets(st.sampled_from(pairs), max_size=len(pairs)))
    g = gd.Graph(n, tuple(chosen), np.zeros((n, 1)))
    assert sum(degree(g, v) for v in range(n)) == 2 * g.num_edges


def test_feature_range(small_ds):
    lo, hi = feature_range(small_ds)
    assert lo < hi
    assert lo == min(float(g.features.min()) for g in small_ds)


def test_degree_kind_validation():
    g = gd.Graph(2, ((0, 1),), np.array([[1.0], [1.0]]))
    gd.GraphDataset((g,), 1, FeatureKind.DEGREE)  # consistent
    bad = gd.Graph(2, ((0, 1),), np.array([[2.0], [1.0]]))
    with pytest.raises(ValueError):
        gd.GraphDataset((bad,), 1, FeatureKind.DEGREE)
