from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from app.config import settings
from app.engine.graph import Dataset, Graph


def path_graph(n: int, features: np.ndarray | None = None) -> Graph:
    edges = np.array([(i, i + 1) for i in range(n - 1)], dtype=np.int64).reshape(-1, 2)
    return Graph.from_edge_list(n, edges, features=features)


def star_graph(leaves: int) -> Graph:
    edges = np.array([(0, i) for i in range(1, leaves + 1)], dtype=np.int64)
    return Graph.from_edge_list(leaves + 1, edges)


def cycle_graph(n: int) -> Graph:
    edges = np.array([(i, (i + 1) % n) for i in range(n)], dtype=np.int64)
    return Graph.from_edge_list(n, edges)


def complete_graph(n: int) -> Graph:
    edges = np.array([(i, j) for i in range(n) for j in range(i + 1, n)], dtype=np.int64).reshape(-1, 2)
    return Graph.from_edge_list(n, edges)


def random_graph(n: int, p: float, rng: np.random.Generator, connected: bool = False, features: int = 0) -> Graph:
    """G(n, p); with connected=True a random spanning path is added first"""
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    if connected:
        perm = rng.permutation(n)
        pairs += [(int(perm[i]), int(perm[i + 1])) for i in range(n - 1)]
    edges = np.array(pairs, dtype=np.int64).reshape(-1, 2)
    x = rng.normal(size=(n, features)) if features else None
    return Graph.from_edge_list(n, edges, features=x)


def toy_dataset(num_graphs: int = 20, seed: int = 0, feature_dim: int = 3) -> Dataset:
    """Two separable classes: label 1 graphs carry a shifted feature mean"""
    rng = np.random.default_rng(seed)
    graphs = []
    for gid in range(num_graphs):
        label = gid % 2
        n = int(rng.integers(4, 8))
        g = random_graph(n, 0.5, rng, connected=True)
        x = rng.normal(size=(n, feature_dim)) * 0.1 + (2.0 if label else -2.0)
        graphs.append(Graph.from_edge_list(n, g.edge_list(), features=x, label=label, graph_id=gid))
    return Dataset(graphs=tuple(graphs), num_classes=2, feature_dim=feature_dim, name="TOY")


def write_tudataset(directory: Path, name: str, graphs: list[tuple[int, list[tuple[int, int]], int]],
                    node_labels: list[int] | None = None) -> Path:
    """
    Write TU-format files. Each graph is (n, local edges, label); edges are
    written in both directions with 1-based global ids, as TU adjacency files do.
    """
    directory.mkdir(parents=True, exist_ok=True)
    a_lines, indicator, labels = [], [], []
    offset = 0
    for gid, (n, edges, label) in enumerate(graphs, start=1):
        for u, v in edges:
            a_lines.append(f"{u + offset + 1}, {v + offset + 1}")
            a_lines.append(f"{v + offset + 1}, {u + offset + 1}")
        indicator += [str(gid)] * n
        labels.append(str(label))
        offset += n
    (directory / f"{name}_A.txt").write_text("\n".join(a_lines) + "\n")
    (directory / f"{name}_graph_indicator.txt").write_text("\n".join(indicator) + "\n")
    (directory / f"{name}_graph_labels.txt").write_text("\n".join(labels) + "\n")
    if node_labels is not None:
        (directory / f"{name}_node_labels.txt").write_text("\n".join(str(x) for x in node_labels) + "\n")
    return directory


def real_dataset(name: str) -> Path:
    """Directory of a downloaded TUDataset under CAMP_DATA_DIR; skips the test when absent"""
    path = Path(settings.DATA_DIR) / name
    if not path.is_dir():
        pytest.skip(f"{name} not available under {settings.DATA_DIR}")
    return path


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def p3() -> Graph:
    return path_graph(3)


@pytest.fixture
def p5() -> Graph:
    return path_graph(5)


@pytest.fixture
def toy() -> Dataset:
    return toy_dataset()


@pytest.fixture
def tu_dir(tmp_path: Path) -> Path:
    """Twelve small graphs, two classes (labels -1/1), node labels present"""
    graphs = []
    node_labels = []
    for i in range(12):
        n = 3 + i % 3
        edges = [(j, j + 1) for j in range(n - 1)]
        graphs.append((n, edges, 1 if i % 2 else -1))
        node_labels += [j % 2 for j in range(n)]
    return write_tudataset(tmp_path / "TOYTU", "TOYTU", graphs, node_labels)


@pytest.fixture(autouse=True)
def _clear_caches():
    from app.services.common.centrality_factory import centrality_factory
    yield
    centrality_factory.clear()
