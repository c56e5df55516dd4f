"""
Dataset Service: TUDataset text-file ingestion into immutable Graph datasets
"""
import logging
import threading
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from app.config import settings
from app.engine.graph import Dataset, Graph, fill_featureless
from app.errors import FormatError, LoadError

logger = logging.getLogger(__name__)


class DatasetService:
    """Reads `{name}_A.txt`, `{name}_graph_indicator.txt`, `{name}_graph_labels.txt` and optional node files"""

    def __init__(self):
        self._cache: dict[tuple[str, str, bool], Dataset] = {}
        self._lock = threading.Lock()

    @staticmethod
    def resolve(dataset: str | Path, name: Optional[str] = None) -> tuple[Path, str]:
        """
        Resolve a dataset argument to (directory, name)

        Args:
            dataset: a directory holding the TU files, or a bare name looked up under CAMP_DATA_DIR
            name: file prefix; defaults to the directory's base name
        """
        path = Path(dataset)
        if not path.is_dir() and (settings.DATA_DIR / path).is_dir():
            path = settings.DATA_DIR / path
        return path, name or path.name

    @staticmethod
    def _read_table(path: Path, dtype, mandatory: bool = True, width: int = 1) -> Optional[pd.DataFrame]:
        if not path.exists():
            if mandatory:
                raise LoadError(f"Missing dataset file: {path}")
            return None
        try:
            table = pd.read_csv(path, header=None, sep=r"\s*,\s*", engine="python", skip_blank_lines=False)
            table = table.dropna(how="all")
            # index = 1-based line number in the source file
            table.index = table.index + 1
            return table.astype(dtype)
        except pd.errors.EmptyDataError:
            return pd.DataFrame(np.zeros((0, width), dtype=dtype))
        except (ValueError, TypeError, pd.errors.ParserError) as e:
            raise FormatError(f"Cannot parse {path.name}: {e}")

    def load_tudataset(self, directory: str | Path, name: Optional[str] = None) -> Dataset:
        """
        Load a TUDataset directory. Node labels are one-hot encoded, node
        attributes appended after them; graph labels are remapped to 0..C-1.
        """
        directory, name = self.resolve(directory, name)
        prefix = directory / name

        edges_df = self._read_table(Path(f"{prefix}_A.txt"), np.int64, width=2)
        indicator_df = self._read_table(Path(f"{prefix}_graph_indicator.txt"), np.int64)
        labels_df = self._read_table(Path(f"{prefix}_graph_labels.txt"), np.int64)
        node_labels_df = self._read_table(Path(f"{prefix}_node_labels.txt"), np.int64, mandatory=False)
        node_attrs_df = self._read_table(Path(f"{prefix}_node_attributes.txt"), np.float64, mandatory=False)

        indicator = indicator_df.iloc[:, 0].to_numpy()
        graph_labels = labels_df.iloc[:, 0].to_numpy()
        num_nodes = indicator.size
        num_graphs = graph_labels.size

        if edges_df.shape[1] != 2:
            raise FormatError(f"{name}_A.txt: expected 2 columns, found {edges_df.shape[1]}")
        edges = edges_df.to_numpy() - 1

        graph_ids = np.unique(indicator)
        if graph_ids.size != num_graphs or graph_ids.min() != 1 or graph_ids.max() != num_graphs:
            raise FormatError(
                f"{name}: graph indicator covers {graph_ids.size} graphs but "
                f"{name}_graph_labels.txt lists {num_graphs}; every graph needs at least one node"
            )

        out_of_range = np.flatnonzero((edges < 0).any(axis=1) | (edges >= num_nodes).any(axis=1))
        if out_of_range.size:
            line = int(edges_df.index[out_of_range[0]])
            raise FormatError(f"{name}_A.txt line {line}: node id outside 1..{num_nodes}")
        crossing = np.flatnonzero(indicator[edges[:, 0]] != indicator[edges[:, 1]])
        if crossing.size:
            line = int(edges_df.index[crossing[0]])
            raise FormatError(f"{name}_A.txt line {line}: edge joins nodes of different graphs")

        features = self._node_features(name, num_nodes, node_labels_df, node_attrs_df)
        _, label_ids = np.unique(graph_labels, return_inverse=True)
        num_classes = int(label_ids.max()) + 1

        # local node index within its graph
        order = np.argsort(indicator, kind="stable")
        local = np.empty(num_nodes, dtype=np.int64)
        counts = np.bincount(indicator, minlength=num_graphs + 1)[1:]
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        local[order] = np.arange(num_nodes) - np.repeat(starts, counts)

        edge_graph = indicator[edges[:, 0]]
        edge_order = np.argsort(edge_graph, kind="stable")
        edge_bounds = np.searchsorted(edge_graph[edge_order], np.arange(1, num_graphs + 2))

        graphs = []
        for gid in range(1, num_graphs + 1):
            nodes = order[starts[gid - 1]:starts[gid - 1] + counts[gid - 1]]
            graph_edges = edges[edge_order[edge_bounds[gid - 1]:edge_bounds[gid]]]
            graphs.append(
                Graph.from_edge_list(
                    n=int(counts[gid - 1]),
                    edges=local[graph_edges],
                    features=None if features is None else features[nodes],
                    label=int(label_ids[gid - 1]),
                    graph_id=gid - 1,
                )
            )

        dataset = Dataset(
            graphs=tuple(graphs),
            num_classes=num_classes,
            feature_dim=0 if features is None else int(features.shape[1]),
            name=name,
            has_node_features=features is not None,
        )
        logger.info(
            f"Loaded {name}: {len(graphs)} graphs, {num_classes} classes, feature_dim={dataset.feature_dim}"
        )
        return dataset

    @staticmethod
    def _node_features(
        name: str,
        num_nodes: int,
        node_labels_df: Optional[pd.DataFrame],
        node_attrs_df: Optional[pd.DataFrame],
    ) -> Optional[np.ndarray]:
        blocks = []
        if node_labels_df is not None:
            raw = node_labels_df.iloc[:, 0].to_numpy()
            if raw.size != num_nodes:
                raise FormatError(f"{name}_node_labels.txt has {raw.size} rows for {num_nodes} nodes")
            _, ids = np.unique(raw, return_inverse=True)
            blocks.append(np.eye(int(ids.max()) + 1)[ids])
        if node_attrs_df is not None:
            attrs = node_attrs_df.to_numpy(dtype=np.float64)
            if attrs.shape[0] != num_nodes:
                raise FormatError(f"{name}_node_attributes.txt has {attrs.shape[0]} rows for {num_nodes} nodes")
            blocks.append(attrs)
        return np.concatenate(blocks, axis=1) if blocks else None

    def get_dataset(self, directory: str | Path, name: Optional[str] = None, fill: bool = True) -> Dataset:
        """Cached load, with featureless datasets filled with constant features when fill=True"""
        directory, name = self.resolve(directory, name)
        key = (str(directory.resolve()), name, fill)
        with self._lock:
            if key not in self._cache:
                ds = self.load_tudataset(directory, name)
                self._cache[key] = fill_featureless(ds) if fill else ds
            return self._cache[key]

    def test_dataset(self, directory: str | Path, name: Optional[str] = None) -> bool:
        """Check that the mandatory files exist"""
        directory, name = self.resolve(directory, name)
        missing = [
            suffix for suffix in ("A", "graph_indicator", "graph_labels")
            if not (directory / f"{name}_{suffix}.txt").exists()
        ]
        if missing:
            logger.error(f"❌ Dataset {name} at {directory} is missing: {missing}")
            return False
        return True


# Singleton instance
dataset_service = DatasetService()
