from itertools import combinations

import networkx as nx
import numpy as np
import pytest

from app.config import CentralityMeasure, settings
from app.engine.centrality import (
    MEASURES,
    betweenness_centrality,
    closeness_centrality,
    degree_centrality,
    load_centrality,
    pagerank_centrality,
)
from app.engine.graph import Dataset, Graph
from app.errors import ConfigError, ConvergenceError, DomainError
from app.services.common.centrality_factory import CentralityFactory, PageRankProvider
from tests.conftest import complete_graph, cycle_graph, path_graph, random_graph, star_graph


def _to_nx(g: Graph) -> nx.Graph:
    h = nx.Graph()
    h.add_nodes_from(range(g.n))
    h.add_edges_from(g.edge_list().tolist())
    return h


def _hops_to(g: Graph, t: int) -> np.ndarray:
    lengths = nx.single_source_shortest_path_length(_to_nx(g), t)
    return np.array([lengths.get(v, -1) for v in range(g.n)])


def _all_shortest_paths(g: Graph, s: int, t: int) -> list[list[int]]:
    dist = _hops_to(g, t)
    if dist[s] < 0:
        return []

    def walk(v: int) -> list[list[int]]:
        if v == t:
            return [[t]]
        return [[v] + rest for w in g.neighbors(v) if dist[w] == dist[v] - 1 for rest in walk(int(w))]

    return walk(s)


def _betweenness_oracle(g: Graph) -> np.ndarray:
    raw = np.zeros(g.n)
    for s, t in combinations(range(g.n), 2):
        paths = _all_shortest_paths(g, s, t)
        for path in paths:
            for v in path[1:-1]:
                raw[v] += 1.0 / len(paths)
    return raw / ((g.n - 1) * (g.n - 2) / 2.0) if g.n >= 3 else raw


def _load_oracle(g: Graph) -> np.ndarray:
    """Route a unit packet for every ordered pair, splitting equally at each hop"""
    raw = np.zeros(g.n)
    for t in range(g.n):
        dist = _hops_to(g, t)

        def route(v: int, amount: float):
            if v == t:
                return
            hops = [int(w) for w in g.neighbors(v) if dist[w] == dist[v] - 1]
            for w in hops:
                if w != t:
                    raw[w] += amount / len(hops)
                route(w, amount / len(hops))

        for s in range(g.n):
            if s != t and dist[s] > 0:
                route(s, 1.0)
    return raw / ((g.n - 1) * (g.n - 2)) if g.n >= 3 else raw


def _pagerank_oracle(g: Graph, d: float = 0.85) -> np.ndarray:
    n = g.n
    deg = g.degrees.astype(float)
    a = g.dense_adjacency()
    m = np.zeros((n, n))
    for v in range(n):
        m[:, v] = a[:, v] / deg[v] if deg[v] else 1.0 / n
    x = np.linalg.solve(np.eye(n) - d * m, np.full(n, (1.0 - d) / n))
    return x / x.sum()


def test_degree_examples():
    np.testing.assert_allclose(degree_centrality(path_graph(3)).scores, [0.5, 1.0, 0.5])
    np.testing.assert_allclose(degree_centrality(star_graph(3)).scores, [1.0, 1 / 3, 1 / 3, 1 / 3])
    with pytest.raises(DomainError):
        degree_centrality(Graph.from_edge_list(1, []))


def test_betweenness_examples():
    np.testing.assert_allclose(betweenness_centrality(star_graph(3)).scores, [1.0, 0.0, 0.0, 0.0])
    c5 = betweenness_centrality(cycle_graph(5)).scores
    np.testing.assert_allclose(c5, np.full(5, c5[0]))


def test_closeness_examples():
    np.testing.assert_allclose(closeness_centrality(path_graph(3)).scores, [2 / 3, 1.0, 2 / 3])
    np.testing.assert_allclose(closeness_centrality(complete_graph(4)).scores, np.ones(4))
    two_edges = Graph.from_edge_list(4, [(0, 1), (2, 3)])
    np.testing.assert_allclose(closeness_centrality(two_edges).scores, np.full(4, 1 / 3))
    isolated = Graph.from_edge_list(3, [(0, 1)])
    assert closeness_centrality(isolated).scores[2] == 0.0


def test_load_equals_betweenness_on_trees(rng):
    np.testing.assert_allclose(load_centrality(star_graph(3)).scores, betweenness_centrality(star_graph(3)).scores)
    for _ in range(5):
        parents = [int(rng.integers(0, i)) for i in range(1, 8)]
        tree = Graph.from_edge_list(8, [(p, i) for i, p in enumerate(parents, start=1)])
        np.testing.assert_allclose(
            load_centrality(tree).scores, betweenness_centrality(tree).scores, atol=1e-9
        )


def test_load_on_cycle_with_chord_matches_packet_simulation():
    g = Graph.from_edge_list(4, [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)])
    np.testing.assert_allclose(load_centrality(g).scores, _load_oracle(g), atol=1e-12)


def test_pagerank_examples():
    np.testing.assert_allclose(pagerank_centrality(cycle_graph(6)).scores, np.full(6, 1 / 6), atol=1e-9)
    np.testing.assert_allclose(pagerank_centrality(Graph.from_edge_list(1, [])).scores, [1.0])
    np.testing.assert_allclose(pagerank_centrality(star_graph(3)).scores, _pagerank_oracle(star_graph(3)), atol=1e-7)


def test_pagerank_non_convergence_carries_residual():
    with pytest.raises(ConvergenceError) as info:
        pagerank_centrality(star_graph(4), max_iter=2)
    assert info.value.residual > 0


def test_all_measures_match_oracles_on_random_graphs():
    rng = np.random.default_rng(2024)
    for _ in range(50):
        n = int(rng.integers(3, 13))
        g = random_graph(n, float(rng.uniform(0.2, 0.6)), rng)
        ref = _to_nx(g)
        np.testing.assert_allclose(degree_centrality(g).scores, g.dense_adjacency().sum(axis=1) / (n - 1), atol=1e-12)
        np.testing.assert_allclose(betweenness_centrality(g).scores, _betweenness_oracle(g), atol=1e-6)
        np.testing.assert_allclose(load_centrality(g).scores, _load_oracle(g), atol=1e-6)
        np.testing.assert_allclose(pagerank_centrality(g).scores, _pagerank_oracle(g), atol=1e-6)

        nx_between = nx.betweenness_centrality(ref, normalized=True)
        nx_close = nx.closeness_centrality(ref, wf_improved=True)
        np.testing.assert_allclose(betweenness_centrality(g).scores, [nx_between[v] for v in range(n)], atol=1e-6)
        np.testing.assert_allclose(closeness_centrality(g).scores, [nx_close[v] for v in range(n)], atol=1e-6)


@pytest.mark.parametrize("measure", list(CentralityMeasure))
def test_relabeling_permutes_scores(measure, rng):
    g = random_graph(9, 0.4, rng, connected=True)
    perm = rng.permutation(9)
    original = MEASURES[measure](g).scores
    relabeled = MEASURES[measure](g.relabel(perm)).scores
    np.testing.assert_allclose(relabeled[perm], original, atol=1e-9)


@pytest.mark.parametrize("measure", list(CentralityMeasure))
def test_vertex_transitive_graphs_give_constant_scores(measure):
    for g in (cycle_graph(7), complete_graph(5)):
        scores = MEASURES[measure](g).scores
        np.testing.assert_allclose(scores, np.full(g.n, scores[0]), atol=1e-9)


def test_factory_resolves_measures_and_rejects_unknown():
    provider = CentralityFactory.create_provider("PageRank", damping=0.5)
    assert isinstance(provider, PageRankProvider)
    assert provider.measure is CentralityMeasure.PAGERANK
    with pytest.raises(ConfigError):
        CentralityFactory.create_provider("eigenvector")


def test_compute_all_caches_and_tolerates_tiny_graphs():
    factory = CentralityFactory()
    graphs = (path_graph(3), Graph.from_edge_list(1, [], graph_id=1))
    ds = Dataset(graphs=graphs, num_classes=1, feature_dim=0, name="TINY", has_node_features=False)
    scores = factory.compute_all(ds, CentralityMeasure.CLOSENESS)
    assert scores is factory.compute_all(ds, "closeness")
    np.testing.assert_allclose(scores[1].scores, [0.0])
    assert [s.graph_id for s in scores] == [0, 1]


@pytest.mark.parametrize("measure", [CentralityMeasure.BETWEENNESS, CentralityMeasure.CLOSENESS, CentralityMeasure.LOAD])
def test_source_block_size_does_not_change_scores(measure, monkeypatch, rng):
    g = random_graph(11, 0.3, rng)
    whole = MEASURES[measure](g).scores
    monkeypatch.setattr(settings, "CENTRALITY_BLOCK_SIZE", 3)
    np.testing.assert_allclose(MEASURES[measure](g).scores, whole, atol=1e-12)


def test_large_sparse_graph_matches_networkx():
    rng = np.random.default_rng(7)
    # two components of roughly REDDIT-thread size and density
    left = random_graph(300, 0.004, rng, connected=True)
    right = random_graph(130, 0.01, rng, connected=True)
    edges = np.vstack([left.edge_list(), right.edge_list() + 300])
    g = Graph.from_edge_list(430, edges)
    ref = _to_nx(g)

    nx_between = nx.betweenness_centrality(ref, normalized=True)
    nx_close = nx.closeness_centrality(ref, wf_improved=True)
    np.testing.assert_allclose(betweenness_centrality(g).scores, [nx_between[v] for v in range(430)], atol=1e-9)
    np.testing.assert_allclose(closeness_centrality(g).scores, [nx_close[v] for v in range(430)], atol=1e-9)
    assert load_centrality(g).scores.shape == (430,)
