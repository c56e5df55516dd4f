"""
Node centrality measures over unweighted undirected graphs.

All measures are exact. Betweenness and load count only pairs inside one
connected component; closeness uses the component-scaled correction.
"""
import logging
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from scipy import sparse

from app.config import CentralityMeasure, settings
from app.engine.graph import Graph
from app.errors import ConvergenceError, DomainError, ParameterError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CentralityScores:
    measure: CentralityMeasure
    scores: np.ndarray
    graph_id: int

    def __post_init__(self):
        self.scores.setflags(write=False)

    def __len__(self) -> int:
        return int(self.scores.shape[0])


def _source_blocks(n: int) -> Iterator[np.ndarray]:
    step = max(1, settings.CENTRALITY_BLOCK_SIZE)
    for start in range(0, n, step):
        yield np.arange(start, min(n, start + step))


def _spread(adj: sparse.csr_matrix, rows: np.ndarray) -> np.ndarray:
    """Sum each row's values over neighbours: out[s, v] = sum_w rows[s, w] A[w, v]"""
    return np.asarray((adj @ rows.T).T)


def _bfs_levels(g: Graph, sources: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Distance rows for a block of sources and one boolean mask per BFS level"""
    dist = g.hop_distance_matrix(sources)
    depth = int(dist.max()) if dist.size else 0
    return dist, [dist == k for k in range(depth + 1)]


def _pair_normalizer(n: int) -> float:
    # raw sums count every unordered pair twice
    return float((n - 1) * (n - 2))


def degree_centrality(g: Graph) -> CentralityScores:
    if g.n < 2:
        raise DomainError(f"Degree centrality needs n >= 2, graph {g.graph_id} has n={g.n}")
    return CentralityScores(CentralityMeasure.DEGREE, g.degrees / (g.n - 1.0), g.graph_id)


def betweenness_centrality(g: Graph) -> CentralityScores:
    """
    Brandes accumulation, normalized by (n-1)(n-2)/2. Path counts and
    dependencies are swept level by level for a whole block of sources.
    """
    raw = np.zeros(g.n, dtype=np.float64)
    if g.n < 3:
        return CentralityScores(CentralityMeasure.BETWEENNESS, raw, g.graph_id)

    adj = g.adjacency()
    for sources in _source_blocks(g.n):
        _, levels = _bfs_levels(g, sources)
        sigma = levels[0].astype(np.float64)
        for k in range(1, len(levels)):
            sigma += _spread(adj, sigma * levels[k - 1]) * levels[k]

        delta = np.zeros_like(sigma)
        for k in range(len(levels) - 2, 0, -1):
            coeff = np.divide(1.0 + delta, sigma, out=np.zeros_like(sigma), where=levels[k + 1])
            delta += sigma * _spread(adj, coeff) * levels[k]
        raw += delta.sum(axis=0)

    return CentralityScores(CentralityMeasure.BETWEENNESS, raw / _pair_normalizer(g.n), g.graph_id)


def closeness_centrality(g: Graph) -> CentralityScores:
    if g.n < 2:
        raise DomainError(f"Closeness centrality needs n >= 2, graph {g.graph_id} has n={g.n}")

    scores = np.zeros(g.n, dtype=np.float64)
    for sources in _source_blocks(g.n):
        dist = g.hop_distance_matrix(sources)
        reached = dist > 0
        r = reached.sum(axis=1).astype(np.float64)
        total = np.where(reached, dist, 0).sum(axis=1).astype(np.float64)
        # (r / total) * (r / (n - 1)); isolated nodes score 0
        scores[sources] = np.divide(r * r, total * (g.n - 1.0), out=np.zeros_like(r), where=total > 0)
    return CentralityScores(CentralityMeasure.CLOSENESS, scores, g.graph_id)


def load_centrality(g: Graph) -> CentralityScores:
    """
    Packet-splitting load. For every destination t a unit packet from each
    reachable node travels toward t and splits equally among the next hops
    on shortest paths; a node's load is the traffic passing through it.
    """
    raw = np.zeros(g.n, dtype=np.float64)
    if g.n < 3:
        return CentralityScores(CentralityMeasure.LOAD, raw, g.graph_id)

    adj = g.adjacency()
    for targets in _source_blocks(g.n):
        dist, levels = _bfs_levels(g, targets)
        flow = (dist >= 0).astype(np.float64)
        for k in range(len(levels) - 1, 0, -1):
            next_hops = _spread(adj, levels[k - 1].astype(np.float64))
            share = np.divide(flow, next_hops, out=np.zeros_like(flow), where=levels[k])
            flow += _spread(adj, share) * levels[k - 1]
        raw += np.where(dist > 0, flow - 1.0, 0.0).sum(axis=0)

    return CentralityScores(CentralityMeasure.LOAD, raw / _pair_normalizer(g.n), g.graph_id)


def pagerank_centrality(
    g: Graph,
    damping: float = settings.PAGERANK_DAMPING,
    tol: float = settings.PAGERANK_TOL,
    max_iter: int = settings.PAGERANK_MAX_ITER,
) -> CentralityScores:
    """Power iteration with uniform teleport; dangling mass is spread uniformly"""
    if not 0.0 < damping < 1.0:
        raise ParameterError(f"PageRank damping must lie in (0, 1), got {damping}")
    if g.n < 1:
        raise DomainError("PageRank needs at least one node")

    n = g.n
    deg = g.degrees.astype(np.float64)
    dangling = deg == 0
    inv_deg = np.divide(1.0, deg, out=np.zeros(n), where=~dangling)
    # column-stochastic: P[u, v] = 1/deg(v) for every edge v -> u
    transition = sparse.csr_matrix(g.adjacency().multiply(inv_deg[None, :]))

    x = np.full(n, 1.0 / n)
    residual = np.inf
    for _ in range(max_iter):
        nxt = damping * (transition @ x + x[dangling].sum() / n) + (1.0 - damping) / n
        residual = float(np.abs(nxt - x).sum())
        x = nxt
        if residual < tol:
            return CentralityScores(CentralityMeasure.PAGERANK, x / x.sum(), g.graph_id)

    raise ConvergenceError(f"PageRank did not converge on graph {g.graph_id} in {max_iter} iterations", residual)


MEASURES = {
    CentralityMeasure.DEGREE: degree_centrality,
    CentralityMeasure.BETWEENNESS: betweenness_centrality,
    CentralityMeasure.CLOSENESS: closeness_centrality,
    CentralityMeasure.LOAD: load_centrality,
    CentralityMeasure.PAGERANK: pagerank_centrality,
}
