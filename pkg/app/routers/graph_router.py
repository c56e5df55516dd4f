"""
Graph commands: centrality, schedule-dump, stats and diagnose
"""
import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path
from typing import Optional

import pandas as pd

from app.config import Arch, CentralityMeasure, DiagnosticMetric, Order, RunMode, ScheduleMode, settings
from app.engine.graph import describe_dataset
from app.engine.models import CampModel, ModelConfig
from app.errors import ConfigError
from app.routers.command_router import CommandRouter, arg
from app.services.common.centrality_factory import centrality_factory
from app.services.common.checkpoint_service import checkpoint_service
from app.services.common.dataset_presets import DatasetPresets
from app.services.common.dataset_service import dataset_service
from app.services.diagnostics_service import diagnostics_service
from app.view_models.CommandResponse import CommandResponse

logger = logging.getLogger(__name__)

router = CommandRouter(tags=["Graphs"])

_dataset_args = (
    arg("--dataset", required=True, help="TUDataset directory, or a name under CAMP_DATA_DIR"),
    arg("--name", default=None, help="file prefix; defaults to the directory name"),
)
_schedule_args = (
    arg("--measure", type=CentralityMeasure, choices=list(CentralityMeasure), default=None),
    arg("--num-layers", type=int, default=settings.DEFAULT_LAYERS),
    arg("--order", type=Order, choices=list(Order), default=Order.DESCENDING),
    arg("--p", type=float, default=1.0),
    arg("--seed", type=int, default=0),
)


def _write_text(text: str, out: Optional[str]) -> str:
    if out in (None, "-"):
        sys.stdout.write(text)
        return "-"
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    return str(path)


@router.command(
    "centrality",
    "Per-node centrality scores for every graph (graph_id, node_id, score)",
    *_dataset_args,
    arg("--measure", type=CentralityMeasure, choices=list(CentralityMeasure), required=True),
    arg("--out", default="-", help="CSV path, '-' for stdout"),
)
def centrality(args: argparse.Namespace) -> CommandResponse:
    ds = dataset_service.get_dataset(args.dataset, args.name)
    scores = centrality_factory.compute_all(ds, args.measure)
    table = pd.DataFrame(
        [(s.graph_id, node, float(value)) for s in scores for node, value in enumerate(s.scores)],
        columns=["graph_id", "node_id", "score"],
    )
    written = _write_text(table.to_csv(index=False, float_format="%.6f"), args.out)
    return CommandResponse(
        success=True, command="centrality", message=f"{len(table)} scores for {len(ds)} graphs", outputs=[written]
    )


@router.command(
    "schedule-dump",
    "Layer batches of one graph (or all graphs) as JSON",
    *_dataset_args,
    *_schedule_args,
    arg("--mode", type=ScheduleMode, choices=list(ScheduleMode), default=ScheduleMode.CAMP),
    arg("--graph", type=int, default=None, help="graph index; all graphs when omitted"),
    arg("--out", default="-", help="JSON path, '-' for stdout"),
)
def schedule_dump(args: argparse.Namespace) -> CommandResponse:
    ds = dataset_service.get_dataset(args.dataset, args.name)
    schedules = diagnostics_service.schedules_for(
        ds, args.num_layers, args.measure, args.order, args.p, args.seed, args.mode
    )
    if args.graph is not None:
        if not 0 <= args.graph < len(ds):
            raise ConfigError(f"--graph {args.graph} outside [0, {len(ds) - 1}]")
        payload = schedules[args.graph].to_dict()
    else:
        payload = [s.to_dict() for s in schedules]
    written = _write_text(json.dumps(payload, indent=2) + "\n", args.out)
    return CommandResponse(success=True, command="schedule-dump", outputs=[written])


@router.command(
    "stats",
    "Dataset statistics next to the published reference values",
    *_dataset_args,
    arg("--out", default=None, help="optional JSON path"),
)
def stats(args: argparse.Namespace) -> CommandResponse:
    ds = dataset_service.get_dataset(args.dataset, args.name, fill=False)
    data = {"measured": asdict(describe_dataset(ds)), "reference": DatasetPresets.get_reference_stats(ds.name)}
    outputs = []
    if args.out:
        outputs.append(_write_text(json.dumps(data, indent=2) + "\n", args.out))
    return CommandResponse(success=True, command="stats", message=ds.name, outputs=outputs, data=data)


@router.command(
    "diagnose",
    "Oversquashing / oversmoothing metrics per graph as CSV",
    *_dataset_args,
    *_schedule_args,
    arg("--metric", type=DiagnosticMetric, choices=list(DiagnosticMetric), required=True),
    arg("--model-ckpt", default=None, help="checkpoint written by train; random init when omitted"),
    arg("--mode", type=RunMode, choices=list(RunMode), default=RunMode.CAMP),
    arg("--arch", type=Arch, choices=list(Arch), default=Arch.GCN),
    arg("--hidden-dim", type=int, default=settings.DEFAULT_HIDDEN_DIM),
    arg("--layer", type=int, default=None, help="layer l; defaults to the model depth"),
    arg("--max-graphs", type=int, default=None),
    arg("--pairs", type=int, default=10, help="sensitivity pairs per graph"),
    arg("--out", required=True, help="CSV path"),
)
def diagnose(args: argparse.Namespace) -> CommandResponse:
    ds = dataset_service.get_dataset(args.dataset, args.name)
    metric = DiagnosticMetric(args.metric)

    model = None
    if args.model_ckpt:
        model = checkpoint_service.load(args.model_ckpt)
    elif metric is not DiagnosticMetric.RESISTANCE:
        cfg = ModelConfig(
            arch=args.arch,
            num_layers=args.num_layers,
            hidden_dim=args.hidden_dim,
            dropout=0.0,
            sync=args.mode is RunMode.SYNC,
        )
        model = CampModel(cfg, ds.feature_dim, ds.num_classes, seed=args.seed)

    schedules = None
    num_layers = model.cfg.num_layers if model is not None else args.num_layers
    needs_schedule = metric is DiagnosticMetric.PROP1 or (model is not None and not model.cfg.sync)
    if needs_schedule and metric is not DiagnosticMetric.RESISTANCE:
        mode = ScheduleMode.RAMP if args.mode is RunMode.RAMP else ScheduleMode.CAMP
        schedules = diagnostics_service.schedules_for(
            ds, num_layers, args.measure, args.order, args.p, args.seed, mode
        )

    table = diagnostics_service.run(
        metric, ds, model, schedules, args.out, args.layer, args.max_graphs, args.seed, max_pairs=args.pairs
    )
    return CommandResponse(
        success=True, command="diagnose", message=f"{metric.value}: {len(table)} rows", outputs=[args.out]
    )
