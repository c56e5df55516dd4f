"""
Graph representation: immutable undirected graphs in CSR form, datasets,
train/valid/test splits and block-diagonal batching
"""
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from app.errors import DataError, SplitError

logger = logging.getLogger(__name__)


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected simple graph. Each edge is stored in both directions, no self-loops."""

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    features: Optional[np.ndarray] = None
    label: int = 0
    graph_id: int = 0

    @classmethod
    def from_edge_list(
        cls,
        n: int,
        edges: Sequence[tuple[int, int]] | np.ndarray,
        features: Optional[np.ndarray] = None,
        label: int = 0,
        graph_id: int = 0,
    ) -> "Graph":
        """Build a graph from 0-indexed pairs; symmetrizes, deduplicates and drops self-loops"""
        if n < 1:
            raise DataError(f"Graph {graph_id} has no nodes")

        pairs = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if pairs.size and (pairs.min() < 0 or pairs.max() >= n):
            raise DataError(f"Graph {graph_id}: edge endpoint outside [0, {n})")

        pairs = pairs[pairs[:, 0] != pairs[:, 1]]
        both = np.concatenate([pairs, pairs[:, ::-1]], axis=0)
        if both.size:
            both = np.unique(both, axis=0)

        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(both[:, 0], minlength=n), out=indptr[1:])
        indices = both[:, 1].copy() if both.size else np.zeros(0, dtype=np.int64)

        if features is not None:
            features = np.asarray(features, dtype=np.float64)
            if features.ndim == 1:
                features = features[:, None]
            if features.shape[0] != n:
                raise DataError(f"Graph {graph_id}: {features.shape[0]} feature rows for {n} nodes")
            features = _frozen(features.copy())

        return cls(
            n=int(n),
            indptr=_frozen(indptr),
            indices=_frozen(indices),
            features=features,
            label=int(label),
            graph_id=int(graph_id),
        )

    @property
    def num_edges(self) -> int:
        """Undirected edge count |E|"""
        return int(self.indices.shape[0] // 2)

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def feature_dim(self) -> int:
        return 0 if self.features is None else int(self.features.shape[1])

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def directed_edges(self) -> tuple[np.ndarray, np.ndarray]:
        """(row, col) arrays for every stored CSR entry, in CSR order"""
        rows = np.repeat(np.arange(self.n, dtype=np.int64), self.degrees)
        return rows, self.indices

    def edge_list(self) -> np.ndarray:
        """Undirected edges as an (|E|, 2) array with u < v"""
        rows, cols = self.directed_edges()
        keep = rows < cols
        return np.stack([rows[keep], cols[keep]], axis=1)

    def adjacency(self) -> sparse.csr_matrix:
        data = np.ones(self.indices.shape[0], dtype=np.float64)
        return sparse.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    def dense_adjacency(self) -> np.ndarray:
        return self.adjacency().toarray()

    def with_features(self, features: np.ndarray) -> "Graph":
        features = np.asarray(features, dtype=np.float64)
        if features.ndim == 1:
            features = features[:, None]
        if features.shape[0] != self.n:
            raise DataError(f"Graph {self.graph_id}: {features.shape[0]} feature rows for {self.n} nodes")
        return Graph(self.n, self.indptr, self.indices, _frozen(features.copy()), self.label, self.graph_id)

    def relabel(self, perm: np.ndarray) -> "Graph":
        """Graph with node i renamed to perm[i]"""
        perm = np.asarray(perm, dtype=np.int64)
        edges = perm[self.edge_list()]
        features = None
        if self.features is not None:
            features = np.empty_like(self.features)
            features[perm] = self.features
        return Graph.from_edge_list(self.n, edges, features, self.label, self.graph_id)

    def hop_distances(self, source: int) -> np.ndarray:
        """BFS distances from source; -1 for unreachable nodes"""
        return self.hop_distance_matrix(np.array([source]))[0]

    def hop_distance_matrix(self, sources: Optional[np.ndarray] = None) -> np.ndarray:
        """Hop distances with one row per source (all nodes by default); -1 where unreachable"""
        if sources is None:
            sources = np.arange(self.n)
        dist = csgraph.shortest_path(
            self.adjacency(), method="D", directed=False, unweighted=True, indices=np.asarray(sources, dtype=np.int64)
        )
        hops = np.full(dist.shape, -1, dtype=np.int64)
        finite = np.isfinite(dist)
        hops[finite] = dist[finite].astype(np.int64)
        return hops


@dataclass(frozen=True)
class Dataset:
    graphs: tuple[Graph, ...]
    num_classes: int
    feature_dim: int
    name: str
    has_node_features: bool = True

    def __post_init__(self):
        for g in self.graphs:
            if not 0 <= g.label < self.num_classes:
                raise DataError(f"{self.name}: graph {g.graph_id} label {g.label} outside [0, {self.num_classes})")
            if g.feature_dim != self.feature_dim:
                raise DataError(
                    f"{self.name}: graph {g.graph_id} has feature_dim {g.feature_dim}, expected {self.feature_dim}"
                )

    def __len__(self) -> int:
        return len(self.graphs)

    @property
    def labels(self) -> np.ndarray:
        return np.array([g.label for g in self.graphs], dtype=np.int64)


@dataclass(frozen=True)
class SplitSpec:
    train_idx: tuple[int, ...]
    valid_idx: tuple[int, ...]
    test_idx: tuple[int, ...]
    seed: int


@dataclass(frozen=True)
class DatasetStats:
    name: str
    graphs: int
    classes: int
    avg_nodes: float
    avg_edges: float
    node_features: bool
    # both directions counted, as adjacency files list them
    avg_stored_edges: float = 0.0


def fill_featureless(ds: Dataset) -> Dataset:
    """Assign the constant feature [1.0] to every node of a featureless dataset"""
    if ds.has_node_features and ds.feature_dim > 0:
        return ds

    graphs = tuple(g.with_features(np.ones((g.n, 1))) for g in ds.graphs)
    logger.info(f"{ds.name}: no node features, assigned all-ones features to {len(graphs)} graphs")
    return Dataset(graphs=graphs, num_classes=ds.num_classes, feature_dim=1, name=ds.name, has_node_features=False)


def make_split(ds: Dataset, seed: int) -> SplitSpec:
    """Seeded 80/10/10 split; train and valid sizes are floored, test takes the remainder"""
    total = len(ds)
    if total < 10:
        raise SplitError(f"{ds.name}: cannot split {total} graphs, need at least 10")

    perm = np.random.default_rng(seed).permutation(total)
    n_train = int(np.floor(0.8 * total))
    n_valid = int(np.floor(0.1 * total))
    return SplitSpec(
        train_idx=tuple(int(i) for i in perm[:n_train]),
        valid_idx=tuple(int(i) for i in perm[n_train:n_train + n_valid]),
        test_idx=tuple(int(i) for i in perm[n_train + n_valid:]),
        seed=seed,
    )


def describe_dataset(ds: Dataset) -> DatasetStats:
    nodes = np.array([g.n for g in ds.graphs], dtype=np.float64)
    edges = np.array([g.num_edges for g in ds.graphs], dtype=np.float64)
    return DatasetStats(
        name=ds.name,
        graphs=len(ds),
        classes=ds.num_classes,
        avg_nodes=float(nodes.mean()) if len(ds) else 0.0,
        avg_edges=float(edges.mean()) if len(ds) else 0.0,
        node_features=ds.has_node_features,
        avg_stored_edges=float(2.0 * edges.mean()) if len(ds) else 0.0,
    )


@dataclass(frozen=True)
class GraphBatch:
    """Block-diagonal union of several graphs"""

    graph: Graph
    node_graph: np.ndarray
    offsets: np.ndarray
    labels: np.ndarray
    members: tuple[Graph, ...] = field(default_factory=tuple)

    @property
    def num_graphs(self) -> int:
        return len(self.members)


def collate(graphs: Sequence[Graph]) -> GraphBatch:
    if not graphs:
        raise DataError("Cannot collate an empty list of graphs")

    sizes = np.array([g.n for g in graphs], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    total = int(sizes.sum())

    indptr = np.zeros(total + 1, dtype=np.int64)
    indptr[1:] = np.cumsum(np.concatenate([g.degrees for g in graphs]))
    indices = np.concatenate([g.indices + off for g, off in zip(graphs, offsets)])

    features = None
    if all(g.features is not None for g in graphs):
        features = _frozen(np.concatenate([g.features for g in graphs], axis=0))

    merged = Graph(
        n=total,
        indptr=_frozen(indptr),
        indices=_frozen(indices.astype(np.int64)),
        features=features,
        label=0,
        graph_id=-1,
    )
    return GraphBatch(
        graph=merged,
        node_graph=_frozen(np.repeat(np.arange(len(graphs), dtype=np.int64), sizes)),
        offsets=_frozen(offsets),
        labels=_frozen(np.array([g.label for g in graphs], dtype=np.int64)),
        members=tuple(graphs),
    )
