"""
Per-dataset presets: best (L, centrality) per architecture and the published
test accuracies reported as targets in summary.json
"""
from typing import Optional

from app.config import Arch, CentralityMeasure


class DatasetPresets:
    """Dataset-specific hyperparameters and reference accuracies (percent, mean and scaled s.d.)"""

    _layers = {
        "ENZYMES": {Arch.GCN: (10, CentralityMeasure.CLOSENESS), Arch.GIN: (10, CentralityMeasure.CLOSENESS)},
        "MUTAG": {Arch.GCN: (16, CentralityMeasure.DEGREE), Arch.GIN: (12, CentralityMeasure.DEGREE)},
        "PROTEINS": {Arch.GCN: (16, CentralityMeasure.DEGREE), Arch.GIN: (16, CentralityMeasure.CLOSENESS)},
        "COLLAB": {Arch.GCN: (10, CentralityMeasure.LOAD), Arch.GIN: (12, CentralityMeasure.BETWEENNESS)},
        "IMDB-BINARY": {Arch.GCN: (12, CentralityMeasure.PAGERANK), Arch.GIN: (10, CentralityMeasure.PAGERANK)},
        "REDDIT-BINARY": {Arch.GCN: (16, CentralityMeasure.CLOSENESS), Arch.GIN: (12, CentralityMeasure.CLOSENESS)},
    }

    # (baseline mean, baseline sd, camp mean, camp sd)
    _targets = {
        "ENZYMES": {Arch.GCN: (27.66, 1.16, 31.73, 2.30), Arch.GIN: (33.80, 0.11, 46.60, 2.26)},
        "MUTAG": {Arch.GCN: (72.15, 2.44, 80.80, 3.68), Arch.GIN: (77.70, 0.36, 83.40, 3.95)},
        "PROTEINS": {Arch.GCN: (70.98, 0.73, 74.43, 1.64), Arch.GIN: (70.80, 0.82, 74.07, 1.73)},
        "COLLAB": {Arch.GCN: (33.78, 0.48, 69.86, 0.70), Arch.GIN: (72.99, 0.38, 74.14, 0.65)},
        "IMDB-BINARY": {Arch.GCN: (49.77, 0.81, 62.44, 2.15), Arch.GIN: (70.18, 0.99, 71.48, 1.47)},
        "REDDIT-BINARY": {Arch.GCN: (68.25, 1.09, 84.96, 0.86), Arch.GIN: (86.78, 1.05, 89.24, 1.03)},
    }

    # (train, valid, test, avg nodes, avg stored edges, node features)
    _stats = {
        "ENZYMES": (480, 60, 60, 32.63, 124.27, True),
        "MUTAG": (150, 18, 20, 17.93, 39.58, True),
        "PROTEINS": (890, 111, 112, 39.05, 145.63, True),
        "COLLAB": (4000, 500, 500, 74.49, 4914.43, False),
        "IMDB-BINARY": (800, 100, 100, 19.77, 193.66, False),
        "REDDIT-BINARY": (1600, 200, 200, 429.62, 995.51, False),
    }

    @staticmethod
    def _key(name: str) -> str:
        return name.strip().upper()

    @classmethod
    def get_preset(cls, name: str, arch: Arch) -> Optional[tuple[int, CentralityMeasure]]:
        """(L, centrality measure) for a dataset/arch pair, or None for unknown datasets"""
        return cls._layers.get(cls._key(name), {}).get(Arch(arch))

    @classmethod
    def get_targets(cls, name: str, arch: Arch) -> Optional[dict]:
        row = cls._targets.get(cls._key(name), {}).get(Arch(arch))
        if row is None:
            return None
        return {
            "baseline_mean": row[0],
            "baseline_scaled_std": row[1],
            "camp_mean": row[2],
            "camp_scaled_std": row[3],
        }

    @classmethod
    def get_reference_stats(cls, name: str) -> Optional[dict]:
        row = cls._stats.get(cls._key(name))
        if row is None:
            return None
        return dict(zip(("train", "valid", "test", "avg_nodes", "avg_edges", "node_features"), row))
