"""
Layer schedules: centrality-ordered (or random) disjoint node batches, one per
message-passing layer, and the per-layer masked edge sets they induce
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from app.config import CentralityMeasure, Order, ScheduleMode
from app.engine.centrality import CentralityScores
from app.engine.graph import Graph
from app.errors import ParameterError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class LayerSchedule:
    num_layers: int
    batches: tuple[np.ndarray, ...]
    order: Order
    sampling_p: float
    mode: ScheduleMode
    measure: Optional[CentralityMeasure]
    seed: int
    n: int
    graph_id: int = 0
    full_batches: tuple[np.ndarray, ...] = ()
    warnings: tuple[str, ...] = ()

    def batch(self, l: int) -> np.ndarray:
        """Node ids updated at layer l (1-indexed)"""
        if not 1 <= l <= self.num_layers:
            raise IndexError(f"Layer {l} outside [1, {self.num_layers}]")
        return self.batches[l - 1]

    def node_order(self) -> np.ndarray:
        return np.concatenate(self.full_batches) if self.full_batches else np.zeros(0, dtype=np.int64)

    def resample(self, seed: int) -> "LayerSchedule":
        """Redraw the p-subsample of every batch with a new seed"""
        if self.sampling_p >= 1.0:
            return self
        rng = np.random.default_rng(seed)
        batches = tuple(_subsample(b, self.sampling_p, rng) for b in self.full_batches)
        return LayerSchedule(
            self.num_layers, batches, self.order, self.sampling_p, self.mode, self.measure,
            seed, self.n, self.graph_id, self.full_batches, self.warnings,
        )

    def to_dict(self) -> dict:
        return {
            "graph_id": self.graph_id,
            "measure": self.measure.value if self.measure else None,
            "mode": self.mode.value,
            "L": self.num_layers,
            "order": self.order.value,
            "p": self.sampling_p,
            "seed": self.seed,
            "batches": [[int(v) for v in b] for b in self.batches],
            "warnings": list(self.warnings),
        }


@dataclass(frozen=True, eq=False)
class LayerMask:
    layer: int
    active_nodes: np.ndarray
    # one flag per stored CSR entry of the graph
    active_edges: np.ndarray

    def edge_pairs(self, g: Graph) -> np.ndarray:
        """Active undirected edges as (u, v) rows with u < v"""
        rows, cols = g.directed_edges()
        keep = self.active_edges & (rows < cols)
        return np.stack([rows[keep], cols[keep]], axis=1)


def _subsample(batch: np.ndarray, p: float, rng: np.random.Generator) -> np.ndarray:
    if p >= 1.0 or batch.size == 0:
        return batch
    # rounding drops float noise such as 50 * 0.14 = 7.000000000000001
    k = math.ceil(round(batch.size * p, 9))
    picked = np.sort(rng.choice(batch.size, size=k, replace=False))
    return batch[picked]


def _segment(order: np.ndarray, num_layers: int) -> tuple[np.ndarray, ...]:
    n = order.size
    base, extra = divmod(n, num_layers)
    sizes = [base + 1] * extra + [base] * (num_layers - extra)
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    return tuple(order[bounds[i]:bounds[i + 1]].astype(np.int64) for i in range(num_layers))


def build_schedule(
    scores: CentralityScores | None,
    num_layers: int,
    order: Order = Order.DESCENDING,
    p: float = 1.0,
    seed: int = 0,
    mode: ScheduleMode = ScheduleMode.CAMP,
    n: Optional[int] = None,
) -> LayerSchedule:
    """
    Cut the ordered node list into num_layers consecutive batches

    Args:
        scores: centrality scores (ignored in RAMP mode, which only needs n)
        num_layers: L, one batch per layer
        order: descending or ascending score order; ties go to the lower node id first
        p: fraction kept from each batch, sampled once with seed
        seed: seeds the RAMP permutation and the p-subsample
        mode: CAMP (centrality order) or RAMP (random permutation)
        n: node count, required when scores is None

    Returns:
        LayerSchedule
    """
    if num_layers < 1:
        raise ParameterError(f"Number of layers must be >= 1, got {num_layers}")
    if not 0.0 < p <= 1.0:
        raise ParameterError(f"Sampling rate p must lie in (0, 1], got {p}")

    mode = ScheduleMode(mode)
    order = Order(order)
    if scores is not None:
        n = len(scores)
    if n is None:
        raise ParameterError("build_schedule needs either scores or n")

    rng = np.random.default_rng(seed)
    ids = np.arange(n, dtype=np.int64)
    if mode is ScheduleMode.RAMP:
        ranked = rng.permutation(n).astype(np.int64)
        measure = None
    else:
        if scores is None:
            raise ParameterError("CAMP schedules need centrality scores")
        key = -scores.scores if order is Order.DESCENDING else scores.scores
        ranked = ids[np.lexsort((ids, key))]
        measure = scores.measure

    warnings: list[str] = []
    if num_layers > n:
        msg = f"L={num_layers} exceeds n={n}: layers {n + 1}..{num_layers} have empty batches"
        warnings.append(msg)
        logger.warning(msg)

    full = _segment(ranked, num_layers)
    batches = tuple(_subsample(b, p, rng) for b in full)
    graph_id = scores.graph_id if scores is not None else 0
    return LayerSchedule(
        num_layers=num_layers,
        batches=batches,
        order=order,
        sampling_p=float(p),
        mode=mode,
        measure=measure,
        seed=seed,
        n=n,
        graph_id=graph_id,
        full_batches=full,
        warnings=tuple(warnings),
    )


def sync_schedule(n: int, num_layers: int, graph_id: int = 0) -> LayerSchedule:
    """Baseline schedule: every node is updated at every layer"""
    everyone = np.arange(n, dtype=np.int64)
    batches = tuple(everyone for _ in range(num_layers))
    return LayerSchedule(
        num_layers=num_layers,
        batches=batches,
        order=Order.DESCENDING,
        sampling_p=1.0,
        mode=ScheduleMode.CAMP,
        measure=None,
        seed=0,
        n=n,
        graph_id=graph_id,
        full_batches=batches,
    )


def layer_mask(sched: LayerSchedule, g: Graph, l: int) -> LayerMask:
    """Active nodes of layer l and every edge touching at least one of them"""
    if not 1 <= l <= sched.num_layers:
        raise IndexError(f"Layer {l} outside [1, {sched.num_layers}]")

    active = np.zeros(g.n, dtype=bool)
    active[sched.batches[l - 1]] = True
    rows, cols = g.directed_edges()
    return LayerMask(layer=l, active_nodes=active, active_edges=active[rows] | active[cols])


def merge_schedules(schedules: Sequence[LayerSchedule], offsets: np.ndarray) -> LayerSchedule:
    """Per-graph schedules shifted into the node numbering of a block-diagonal batch"""
    num_layers = schedules[0].num_layers
    if any(s.num_layers != num_layers for s in schedules):
        raise ParameterError("All schedules in a batch must have the same number of layers")

    def shift(parts: Sequence[tuple[np.ndarray, ...]]) -> tuple[np.ndarray, ...]:
        return tuple(
            np.concatenate([p[l] + off for p, off in zip(parts, offsets)]).astype(np.int64)
            for l in range(num_layers)
        )

    first = schedules[0]
    return LayerSchedule(
        num_layers=num_layers,
        batches=shift([s.batches for s in schedules]),
        order=first.order,
        sampling_p=first.sampling_p,
        mode=first.mode,
        measure=first.measure,
        seed=first.seed,
        n=int(sum(s.n for s in schedules)),
        graph_id=-1,
        full_batches=shift([s.full_batches for s in schedules]),
    )
