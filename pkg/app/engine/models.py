"""
Asynchronous CAMP-GCN / CAMP-GIN layers, their synchronous baselines, and the
graph classifier built on them
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from app.config import AggregationScope, Arch, Normalization, settings
from app.engine import tensor as T
from app.engine.graph import Graph, GraphBatch
from app.engine.scheduler import LayerMask, LayerSchedule, layer_mask
from app.engine.tensor import Tensor
from app.errors import ConfigError, DimensionError, ParameterError

logger = logging.getLogger(__name__)


class ModelConfig(BaseModel):
    model_config = ConfigDict(frozen=True, use_enum_values=False)

    arch: Arch = Arch.GCN
    num_layers: int = Field(default=settings.DEFAULT_LAYERS, ge=1)
    hidden_dim: int = Field(default=settings.DEFAULT_HIDDEN_DIM, ge=1)
    dropout: float = Field(default=settings.DEFAULT_DROPOUT, ge=0.0, lt=1.0)
    aggregation_scope: AggregationScope = AggregationScope.ALL_NEIGHBORS
    # None picks the arch default: symmetric degree for GCN, plain sum for GIN
    normalization: Optional[Normalization] = None
    sync: bool = False

    @property
    def effective_normalization(self) -> Normalization:
        if self.normalization is not None:
            return self.normalization
        return Normalization.SYMMETRIC_DEGREE if self.arch is Arch.GCN else Normalization.NONE


@dataclass
class NodeState:
    features: Tensor
    last_updated: np.ndarray


@dataclass
class LayerParams:
    weight: Tensor
    bias: Optional[Tensor] = None
    mlp: Optional[tuple[Tensor, Tensor, Tensor, Tensor]] = None
    eps: Optional[Tensor] = None

    def named(self, prefix: str) -> dict[str, Tensor]:
        out = {f"{prefix}.weight": self.weight}
        if self.bias is not None:
            out[f"{prefix}.bias"] = self.bias
        if self.mlp is not None:
            for name, t in zip(("mlp_w1", "mlp_b1", "mlp_w2", "mlp_b2"), self.mlp):
                out[f"{prefix}.{name}"] = t
        if self.eps is not None:
            out[f"{prefix}.eps"] = self.eps
        return out


def edge_weights(g: Graph, normalization: Normalization) -> np.ndarray:
    """Per CSR entry (v, u): 1/sqrt(d~_v d~_u) with d~ = deg + 1 on the full graph, or 1"""
    rows, cols = g.directed_edges()
    if normalization is Normalization.NONE:
        return np.ones(rows.size)
    inv_sqrt = 1.0 / np.sqrt(g.degrees + 1.0)
    return inv_sqrt[rows] * inv_sqrt[cols]


def _aggregate_into_batch(h: Tensor, g: Graph, active: np.ndarray, batch: np.ndarray, cfg: ModelConfig) -> Tensor:
    rows, cols = g.directed_edges()
    weights = edge_weights(g, cfg.effective_normalization)
    keep = active[rows]
    if cfg.aggregation_scope is AggregationScope.BATCH_NEIGHBORS:
        keep &= active[cols]
    position = np.full(g.n, -1, dtype=np.int64)
    position[batch] = np.arange(batch.size)
    return T.aggregate(h, cols[keep], position[rows[keep]], weights[keep], batch.size)


def _maybe_dropout(x: Tensor, cfg: ModelConfig, training: bool, rng: Optional[np.random.Generator]) -> Tensor:
    if not training or cfg.dropout == 0.0:
        return x
    if rng is None:
        raise ParameterError("Training-mode forward needs a random generator for dropout")
    return T.dropout(x, cfg.dropout, rng)


class LayerInterface(ABC):
    """One message-passing layer type: the per-node update applied to a batch"""

    @abstractmethod
    def init_params(self, rng: np.random.Generator, dim: int, prefix: str) -> LayerParams:
        pass

    @abstractmethod
    def update(self, h_self: Tensor, aggregated: Tensor, params: LayerParams) -> Tensor:
        """New features of the batch rows given their current features and neighbour sums"""
        pass

    @staticmethod
    def check_dims(h: Tensor, params: LayerParams):
        if params.weight.shape[0] != h.shape[1]:
            raise DimensionError("layer", h.shape, params.weight.shape)


class GCNLayer(LayerInterface):
    """h_v <- h_v + relu(sum_u norm(v, u) h_u W + b)"""

    def init_params(self, rng: np.random.Generator, dim: int, prefix: str) -> LayerParams:
        return LayerParams(
            weight=T.glorot_uniform(rng, dim, dim, name=f"{prefix}.weight"),
            bias=T.zeros(1, dim, name=f"{prefix}.bias"),
        )

    def update(self, h_self: Tensor, aggregated: Tensor, params: LayerParams) -> Tensor:
        pre = T.matmul(aggregated, params.weight)
        if params.bias is not None:
            pre = T.add(pre, params.bias)
        return T.relu(pre)

    @staticmethod
    def residual() -> bool:
        return True


class GINLayer(LayerInterface):
    """h_v <- relu(MLP((1 + eps) h_v + sum_u h_u W))"""

    def init_params(self, rng: np.random.Generator, dim: int, prefix: str) -> LayerParams:
        return LayerParams(
            weight=T.glorot_uniform(rng, dim, dim, name=f"{prefix}.weight"),
            mlp=(
                T.glorot_uniform(rng, dim, dim, name=f"{prefix}.mlp_w1"),
                T.zeros(1, dim, name=f"{prefix}.mlp_b1"),
                T.glorot_uniform(rng, dim, dim, name=f"{prefix}.mlp_w2"),
                T.zeros(1, dim, name=f"{prefix}.mlp_b2"),
            ),
            eps=T.zeros(1, 1, name=f"{prefix}.eps"),
        )

    def update(self, h_self: Tensor, aggregated: Tensor, params: LayerParams) -> Tensor:
        if params.mlp is None or params.eps is None:
            raise ConfigError("GIN layer parameters need MLP weights and eps")
        one_plus_eps = T.add(params.eps, Tensor([[1.0]]))
        z = T.add(T.mul(h_self, one_plus_eps), T.matmul(aggregated, params.weight))
        w1, b1, w2, b2 = params.mlp
        hidden = T.relu(T.add(T.matmul(z, w1), b1))
        return T.relu(T.add(T.matmul(hidden, w2), b2))

    @staticmethod
    def residual() -> bool:
        return False


class LayerFactory:
    _layers = {
        Arch.GCN: GCNLayer,
        Arch.GIN: GINLayer,
    }

    @classmethod
    def create(cls, arch: str | Arch) -> LayerInterface:
        try:
            arch_enum = Arch(arch)
        except ValueError:
            raise ConfigError(f"Unsupported architecture: {arch}. Supported: {[a.value for a in Arch]}")
        return cls._layers[arch_enum]()


def camp_layer_forward(
    state: NodeState,
    g: Graph,
    mask: LayerMask,
    params: LayerParams,
    cfg: ModelConfig,
    l: int,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> NodeState:
    """
    Asynchronous update of layer l: nodes in the mask's batch aggregate their
    neighbours' last stored features; all other rows and timestamps carry over.
    """
    if mask.layer != l:
        raise ParameterError(f"Mask belongs to layer {mask.layer}, not {l}")
    batch = np.flatnonzero(mask.active_nodes)
    if batch.size == 0:
        return state

    layer = LayerFactory.create(cfg.arch)
    h = state.features
    layer.check_dims(h, params)

    h_self = T.row_mask_select(h, batch)
    aggregated = _aggregate_into_batch(h, g, mask.active_nodes, batch, cfg)
    update = _maybe_dropout(layer.update(h_self, aggregated, params), cfg, training, rng)
    new_rows = T.add(h_self, update) if layer.residual() else update

    last_updated = state.last_updated.copy()
    last_updated[batch] = l
    return NodeState(T.masked_row_scatter(h, batch, new_rows), last_updated)


def sync_layer_forward(
    state: NodeState,
    g: Graph,
    params: LayerParams,
    cfg: ModelConfig,
    l: int,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> NodeState:
    """Standard synchronous layer: every node updates from all of its neighbours"""
    layer = LayerFactory.create(cfg.arch)
    h = state.features
    layer.check_dims(h, params)

    rows, cols = g.directed_edges()
    aggregated = T.aggregate(h, cols, rows, edge_weights(g, cfg.effective_normalization), g.n)
    update = _maybe_dropout(layer.update(h, aggregated, params), cfg, training, rng)
    features = T.add(h, update) if layer.residual() else update
    return NodeState(features, np.full(g.n, l, dtype=np.int64))


class CampModel:
    """Input encoder, L message-passing layers, mean-pool readout and a linear classifier"""

    def __init__(self, cfg: ModelConfig, in_dim: int, num_classes: int, seed: int = 0):
        if in_dim < 1 or num_classes < 1:
            raise ConfigError(f"Model needs in_dim >= 1 and num_classes >= 1, got {in_dim}, {num_classes}")
        self.cfg = cfg
        self.in_dim = in_dim
        self.num_classes = num_classes
        rng = np.random.default_rng(seed)
        layer = LayerFactory.create(cfg.arch)

        self.encoder_w = T.glorot_uniform(rng, in_dim, cfg.hidden_dim, name="encoder.weight")
        self.encoder_b = T.zeros(1, cfg.hidden_dim, name="encoder.bias")
        self.layers = [layer.init_params(rng, cfg.hidden_dim, f"layers.{i}") for i in range(cfg.num_layers)]
        self.classifier_w = T.glorot_uniform(rng, cfg.hidden_dim, num_classes, name="classifier.weight")
        self.classifier_b = T.zeros(1, num_classes, name="classifier.bias")

    def parameters(self) -> dict[str, Tensor]:
        params = {"encoder.weight": self.encoder_w, "encoder.bias": self.encoder_b}
        for i, lp in enumerate(self.layers):
            params.update(lp.named(f"layers.{i}"))
        params["classifier.weight"] = self.classifier_w
        params["classifier.bias"] = self.classifier_b
        return params

    def max_abs_weight(self) -> float:
        """Largest |entry| over the message-passing weight matrices"""
        mats = [lp.weight for lp in self.layers]
        mats += [w for lp in self.layers if lp.mlp is not None for w in (lp.mlp[0], lp.mlp[2])]
        return float(max(np.abs(t.data).max() for t in mats))

    def encode(self, x: np.ndarray | Tensor) -> Tensor:
        x = x if isinstance(x, Tensor) else Tensor(x)
        return T.add(T.matmul(x, self.encoder_w), self.encoder_b)

    def propagate(
        self,
        h0: Tensor,
        g: Graph,
        sched: Optional[LayerSchedule],
        upto: Optional[int] = None,
        training: bool = False,
        rng: Optional[np.random.Generator] = None,
        trace: Optional[list[np.ndarray]] = None,
    ) -> NodeState:
        """Run layers 1..upto (default all) from h0; optionally record features after each layer"""
        upto = self.cfg.num_layers if upto is None else upto
        if not 0 <= upto <= self.cfg.num_layers:
            raise ParameterError(f"upto={upto} outside [0, {self.cfg.num_layers}]")
        if not self.cfg.sync:
            if sched is None:
                raise ParameterError("Asynchronous forward needs a layer schedule")
            if sched.num_layers != self.cfg.num_layers:
                raise ParameterError(
                    f"Schedule has {sched.num_layers} layers, model has {self.cfg.num_layers}"
                )
            if sched.n != g.n:
                raise ParameterError(f"Schedule covers {sched.n} nodes, graph has {g.n}")

        state = NodeState(h0, np.zeros(g.n, dtype=np.int64))
        if trace is not None:
            trace.append(h0.data.copy())
        for l in range(1, upto + 1):
            params = self.layers[l - 1]
            if self.cfg.sync:
                state = sync_layer_forward(state, g, params, self.cfg, l, training, rng)
            else:
                state = camp_layer_forward(state, g, layer_mask(sched, g, l), params, self.cfg, l, training, rng)
            if trace is not None:
                trace.append(state.features.data.copy())
        return state

    def readout(self, h: Tensor, node_graph: np.ndarray, num_graphs: int) -> Tensor:
        pooled = T.segment_mean(h, node_graph, num_graphs)
        return T.add(T.matmul(pooled, self.classifier_w), self.classifier_b)

    def forward(
        self,
        g: Graph | GraphBatch,
        sched: Optional[LayerSchedule],
        training: bool = False,
        rng: Optional[np.random.Generator] = None,
    ) -> Tensor:
        """Class logits, one row per graph"""
        if isinstance(g, GraphBatch):
            graph, node_graph, num_graphs = g.graph, g.node_graph, g.num_graphs
        else:
            graph, node_graph, num_graphs = g, np.zeros(g.n, dtype=np.int64), 1
        if graph.features is None:
            raise ConfigError(f"Graph {graph.graph_id} has no node features; fill them before the forward pass")

        state = self.propagate(self.encode(graph.features), graph, sched, training=training, rng=rng)
        return self.readout(state.features, node_graph, num_graphs)

    def forward_trace(self, g: Graph, sched: Optional[LayerSchedule]) -> list[np.ndarray]:
        """Node features after the encoder and after every layer (evaluation mode)"""
        trace: list[np.ndarray] = []
        self.propagate(self.encode(g.features), g, sched, trace=trace)
        return trace


def model_forward(
    g: Graph | GraphBatch,
    sched: Optional[LayerSchedule],
    model: CampModel,
    training: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    return model.forward(g, sched, training, rng)
