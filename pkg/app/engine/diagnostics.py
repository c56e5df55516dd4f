"""
Oversquashing / oversmoothing instruments: Dirichlet energy, feature
sensitivity Jacobians with their topology bound, layer-wise adjacency
products, total effective resistance and signal propagation.
"""
import logging
from typing import Optional

import numpy as np
from scipy import linalg
from scipy.sparse.csgraph import connected_components

from app.config import settings
from app.engine import tensor as T
from app.engine.graph import Graph
from app.engine.models import CampModel
from app.engine.scheduler import LayerSchedule, layer_mask
from app.engine.tensor import Tape, Tensor
from app.errors import DimensionError, DomainError, NumericalError, ParameterError
from app.view_models.DiagnosticReports import DirichletReport, SensitivityPair, SensitivityReport, SignalPropEntry

logger = logging.getLogger(__name__)


def dirichlet_energy(features: np.ndarray | Tensor, g: Graph) -> float:
    """1/2 * sum over ordered edges (i, j) of ||X_i/sqrt(d~_i) - X_j/sqrt(d~_j)||^2, d~ = deg + 1"""
    x = features.data if isinstance(features, Tensor) else np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] != g.n:
        raise DimensionError("dirichlet_energy", x.shape, (g.n, "d"))

    scaled = x / np.sqrt(g.degrees + 1.0)[:, None]
    rows, cols = g.directed_edges()
    diff = scaled[rows] - scaled[cols]
    return float(0.5 * np.sum(diff * diff))


def normalized_laplacian(g: Graph) -> np.ndarray:
    """I - D~^{-1/2} (A + I) D~^{-1/2}"""
    return np.eye(g.n) - normalized_adjacency(g)


def normalized_adjacency(g: Graph, active_edges: Optional[np.ndarray] = None) -> np.ndarray:
    """
    D~^{-1/2} (A' + I) D~^{-1/2} with full-graph degrees, where A' keeps only the
    flagged CSR entries (all of them when active_edges is None). The identity
    stands for features carried forward by nodes outside the batch.
    """
    rows, cols = g.directed_edges()
    if active_edges is not None:
        rows, cols = rows[active_edges], cols[active_edges]
    inv_sqrt = 1.0 / np.sqrt(g.degrees + 1.0)
    s = np.diag(inv_sqrt * inv_sqrt)
    s[rows, cols] = inv_sqrt[rows] * inv_sqrt[cols]
    return s


def product_vs_power(g: Graph, sched: LayerSchedule, l: int) -> tuple[np.ndarray, np.ndarray]:
    """(prod_{j=1..l} S~^(j), S~^l): layer-masked adjacency product against the plain power"""
    if not 0 <= l <= sched.num_layers:
        raise ParameterError(f"l={l} outside [0, {sched.num_layers}]")

    product = np.eye(g.n)
    for j in range(1, l + 1):
        product = product @ normalized_adjacency(g, layer_mask(sched, g, j).active_edges)
    power = np.linalg.matrix_power(normalized_adjacency(g), l)
    return product, power


def _combinatorial_laplacian(g: Graph) -> np.ndarray:
    return np.diag(g.degrees.astype(np.float64)) - g.dense_adjacency()


def effective_resistance_matrix(g: Graph) -> np.ndarray:
    """R_uv = L+_uu + L+_vv - 2 L+_uv, pseudoinverse from a full eigendecomposition"""
    evals, evecs = linalg.eigh(_combinatorial_laplacian(g))
    tol = max(g.n, 1) * np.finfo(np.float64).eps * max(evals.max(initial=0.0), 1.0)
    inv = np.divide(1.0, evals, out=np.zeros_like(evals), where=evals > tol)
    pinv = (evecs * inv) @ evecs.T
    diag = np.diag(pinv)
    return diag[:, None] + diag[None, :] - 2.0 * pinv


def total_effective_resistance(g: Graph, method: str = "pinv") -> float:
    """
    Sum of effective resistances over node pairs in the same component.

    method="pinv" sums pseudoinverse entries; method="spectral" uses
    n_c * sum(1/lambda) over the nonzero Laplacian eigenvalues of each component.
    """
    if g.n < 2:
        return 0.0
    _, comp = connected_components(g.adjacency(), directed=False)

    if method == "pinv":
        resistance = effective_resistance_matrix(g)
        same = comp[:, None] == comp[None, :]
        return float(np.triu(np.where(same, resistance, 0.0), k=1).sum())

    if method == "spectral":
        lap = _combinatorial_laplacian(g)
        total = 0.0
        for c in np.unique(comp):
            nodes = np.flatnonzero(comp == c)
            if nodes.size < 2:
                continue
            evals = linalg.eigvalsh(lap[np.ix_(nodes, nodes)])
            # a connected component has exactly one zero eigenvalue
            total += nodes.size * float(np.sum(1.0 / evals[1:]))
        return total

    raise ParameterError(f"Unknown effective resistance method: {method}")


def jacobian_block(
    model: CampModel, g: Graph, sched: Optional[LayerSchedule], h0: np.ndarray, u: int, v: int, l: int
) -> np.ndarray:
    """d h_v^(l) / d h_u^(0) as a (width x width) matrix, one reverse sweep per output coordinate"""
    width = h0.shape[1]
    jac = np.zeros((width, width))
    for k in range(width):
        pick = np.zeros((g.n, width))
        pick[v, k] = 1.0
        x = Tensor(h0, requires_grad=True)
        with Tape() as tape:
            state = model.propagate(x, g, sched, upto=l)
            out = T.sum_all(T.mul(state.features, Tensor(pick)))
        T.backward(tape, out)
        if x.grad is not None:
            jac[k] = x.grad[u]
    return jac


def sensitivity_jacobian(
    model: CampModel,
    g: Graph,
    u: int,
    v: int,
    l: int,
    sched: Optional[LayerSchedule] = None,
    h0: Optional[np.ndarray] = None,
) -> float:
    """
    Entrywise L1 norm of d h_v^(l) / d h_u^(0). Pairs more than l hops apart
    must give exactly zero; a nonzero value there raises NumericalError.
    """
    if h0 is None:
        h0 = model.encode(g.features).data
    jac = jacobian_block(model, g, sched, h0, u, v, l)
    value = float(np.abs(jac).sum())

    dist = g.hop_distances(v)[u]
    if (dist < 0 or dist > l) and value != 0.0:
        raise NumericalError(f"Nodes {u} and {v} are {dist} hops apart but the layer-{l} Jacobian is nonzero")
    return value


def sensitivity_bound(model: CampModel, g: Graph, sched: Optional[LayerSchedule], u: int, v: int, l: int) -> dict:
    """Model factor (c w p)^l and topology factor (prod S~^(j))_uv of the sensitivity bound"""
    c = settings.LIPSCHITZ_CONSTANT
    w = model.max_abs_weight()
    p = model.cfg.hidden_dim
    model_factor = (c * w * p) ** l
    if sched is None or model.cfg.sync:
        topology = np.linalg.matrix_power(normalized_adjacency(g), l)
    else:
        topology, _ = product_vs_power(g, sched, l)
    return {
        "c": c,
        "w": w,
        "width": p,
        "model_factor": float(model_factor),
        "topology_factor": float(topology[u, v]),
        "bound": float(model_factor * topology[u, v]),
    }


def signal_propagation(
    model: CampModel,
    g: Graph,
    sched: Optional[LayerSchedule],
    m: int,
    num_sources: int = settings.SIGNAL_SOURCES,
    seed: int = 0,
) -> SignalPropEntry:
    """
    Average propagated signal over random source nodes, paired with the total
    effective resistance normalized by the pair count n(n-1)/2
    """
    if g.n < 2:
        raise DomainError(f"Signal propagation needs at least 2 nodes, graph {g.graph_id} has {g.n}")

    rng = np.random.default_rng(seed)
    width = model.cfg.hidden_dim
    sources = rng.choice(g.n, size=min(num_sources, g.n), replace=False)
    signals = []
    for v in sources:
        dist = g.hop_distances(int(v)).astype(np.float64)
        others = (dist > 0)
        if not others.any():
            signals.append(0.0)
            continue
        h0 = np.zeros((g.n, width))
        h0[v] = rng.uniform(0.0, 1.0, size=width)
        h = model.propagate(Tensor(h0), g, sched, upto=m).features.data

        norms = np.linalg.norm(h, axis=0)
        normalized = np.divide(np.abs(h), norms[None, :], out=np.zeros_like(h), where=norms[None, :] > 0)
        weighted = normalized[others] * dist[others][:, None]
        signals.append(float(weighted.sum() / (width * dist[others].max())))

    pairs = g.n * (g.n - 1) / 2.0
    return SignalPropEntry(
        graph_id=g.graph_id,
        layers=m,
        num_sources=len(sources),
        r_total_normalized=total_effective_resistance(g) / pairs,
        signal=float(np.mean(signals)),
    )


def dirichlet_trace(model: CampModel, g: Graph, sched: Optional[LayerSchedule]) -> DirichletReport:
    """Dirichlet energy of the node features after the encoder and after every layer"""
    energies = [dirichlet_energy(h, g) for h in model.forward_trace(g, sched)]
    return DirichletReport(graph_id=g.graph_id, energies=energies)


def sensitivity_report(
    model: CampModel,
    g: Graph,
    sched: Optional[LayerSchedule],
    pairs: list[tuple[int, int]],
    l: int,
) -> SensitivityReport:
    """Measured Jacobian norms next to the bound (c w p)^l (prod S~^(j))_uv for each (u, v)"""
    h0 = model.encode(g.features).data
    rows = []
    bound = {"c": settings.LIPSCHITZ_CONSTANT, "w": model.max_abs_weight(), "width": model.cfg.hidden_dim}
    for u, v in pairs:
        bound = sensitivity_bound(model, g, sched, u, v, l)
        rows.append(
            SensitivityPair(
                u=u,
                v=v,
                distance=int(g.hop_distances(v)[u]),
                layer=l,
                jacobian_l1=sensitivity_jacobian(model, g, u, v, l, sched, h0),
                model_factor=bound["model_factor"],
                topology_factor=bound["topology_factor"],
                bound=bound["bound"],
            )
        )
    return SensitivityReport(graph_id=g.graph_id, c=bound["c"], w=bound["w"], width=bound["width"], pairs=rows)
