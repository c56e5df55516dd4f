"""
Diagnostics service - runs one oversquashing/oversmoothing metric over a
dataset and writes it as a CSV with a fixed per-metric schema
"""
import logging
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from app.config import CentralityMeasure, DiagnosticMetric, Order, ScheduleMode, settings
from app.engine import diagnostics
from app.engine.graph import Dataset, Graph
from app.engine.models import CampModel
from app.engine.scheduler import LayerSchedule, build_schedule
from app.errors import CampError, ParameterError
from app.services.common.centrality_factory import centrality_factory

logger = logging.getLogger(__name__)

SCHEMAS = {
    DiagnosticMetric.DIRICHLET: ["graph_id", "layer", "energy"],
    DiagnosticMetric.SENSITIVITY: [
        "graph_id", "u", "v", "distance", "layer", "jacobian_l1", "model_factor", "topology_factor", "bound",
    ],
    DiagnosticMetric.PROP1: ["graph_id", "u", "v", "layer", "product", "power"],
    DiagnosticMetric.RESISTANCE: ["graph_id", "n", "num_edges", "r_total", "r_total_normalized"],
    DiagnosticMetric.SIGNAL: ["graph_id", "n", "layers", "r_total_normalized", "signal"],
}


DEFAULT_MAX_PAIRS = 10


class DiagnosticsService:

    @staticmethod
    def schedules_for(
        ds: Dataset,
        num_layers: int,
        measure: Optional[CentralityMeasure],
        order: Order = Order.DESCENDING,
        p: float = 1.0,
        seed: int = 0,
        mode: ScheduleMode = ScheduleMode.CAMP,
    ) -> list[LayerSchedule]:
        if mode is ScheduleMode.RAMP:
            return [build_schedule(None, num_layers, order, p, seed, mode, n=g.n) for g in ds.graphs]
        if measure is None:
            raise ParameterError("CAMP schedules for diagnostics need a centrality measure")
        scores = centrality_factory.compute_all(ds, measure)
        return [build_schedule(s, num_layers, order, p, seed, mode) for s in scores]

    @staticmethod
    def _pairs(g: Graph, rng: np.random.Generator, max_pairs: int) -> list[tuple[int, int]]:
        all_pairs = [(u, v) for u in range(g.n) for v in range(g.n) if u != v]
        if len(all_pairs) <= max_pairs:
            return all_pairs
        picked = rng.choice(len(all_pairs), size=max_pairs, replace=False)
        return [all_pairs[i] for i in sorted(picked)]

    def _rows(
        self,
        metric: DiagnosticMetric,
        g: Graph,
        model: Optional[CampModel],
        sched: Optional[LayerSchedule],
        layer: int,
        rng: np.random.Generator,
        seed: int,
        max_pairs: int,
    ) -> list[list]:
        if metric is DiagnosticMetric.RESISTANCE:
            r_total = diagnostics.total_effective_resistance(g)
            pairs = g.n * (g.n - 1) / 2.0
            return [[g.graph_id, g.n, g.num_edges, r_total, r_total / pairs if pairs else 0.0]]

        if metric is DiagnosticMetric.PROP1:
            if sched is None:
                raise ParameterError("prop1 compares against a layer schedule; use a CAMP or RAMP model")
            product, power = diagnostics.product_vs_power(g, sched, layer)
            return [
                [g.graph_id, u, v, layer, product[u, v], power[u, v]]
                for u in range(g.n) for v in range(g.n)
            ]

        if model is None:
            raise ParameterError(f"Metric {metric.value} needs a model")

        if metric is DiagnosticMetric.DIRICHLET:
            report = diagnostics.dirichlet_trace(model, g, sched)
            return [[g.graph_id, i, e] for i, e in enumerate(report.energies)]

        if metric is DiagnosticMetric.SENSITIVITY:
            report = diagnostics.sensitivity_report(model, g, sched, self._pairs(g, rng, max_pairs), layer)
            return [
                [g.graph_id, p.u, p.v, p.distance, p.layer, p.jacobian_l1, p.model_factor, p.topology_factor, p.bound]
                for p in report.pairs
            ]

        entry = diagnostics.signal_propagation(model, g, sched, layer, settings.SIGNAL_SOURCES, seed)
        return [[g.graph_id, g.n, entry.layers, entry.r_total_normalized, entry.signal]]

    def run(
        self,
        metric: DiagnosticMetric | str,
        ds: Dataset,
        model: Optional[CampModel],
        schedules: Optional[list[LayerSchedule]],
        out: Optional[Path] = None,
        layer: Optional[int] = None,
        max_graphs: Optional[int] = None,
        seed: int = 0,
        max_pairs: int = DEFAULT_MAX_PAIRS,
    ) -> pd.DataFrame:
        """
        Evaluate a metric on the first max_graphs graphs (all by default).
        Graphs the metric cannot handle are logged and skipped. Sensitivity
        samples at most max_pairs ordered node pairs per graph.
        """
        metric = DiagnosticMetric(metric)
        if layer is None:
            layer = model.cfg.num_layers if model is not None else (schedules[0].num_layers if schedules else 1)
        graphs = ds.graphs[:max_graphs] if max_graphs else ds.graphs
        rng = np.random.default_rng(seed)

        rows, skipped = [], 0
        for i, g in enumerate(graphs):
            sched = None if schedules is None else schedules[i]
            try:
                rows.extend(self._rows(metric, g, model, sched, layer, rng, seed, max_pairs))
            except ParameterError:
                raise
            except CampError as e:
                skipped += 1
                logger.warning(f"⚠️ {metric.value}: skipping graph {g.graph_id}: {e}")

        table = pd.DataFrame(rows, columns=SCHEMAS[metric])
        logger.info(f"{metric.value}: {len(table)} rows from {len(graphs) - skipped} graphs ({skipped} skipped)")
        if out is not None:
            out = Path(out)
            out.parent.mkdir(parents=True, exist_ok=True)
            table.to_csv(out, index=False)
        return table


# Singleton instance
diagnostics_service = DiagnosticsService()
