"""
Experiment commands: train and sweep
"""
import argparse
import logging
from pathlib import Path

from app.config import CentralityMeasure, Order
from app.routers.command_router import CommandRouter, arg
from app.services.experiment_service import experiment_service
from app.view_models.CommandResponse import CommandResponse
from app.view_models.ExperimentRequest import load_config

logger = logging.getLogger(__name__)

router = CommandRouter(tags=["Experiments"])

_config_args = (
    arg("--config", required=True, help="flat key = value experiment file"),
    arg("--override", action="append", default=[], metavar="KEY=VALUE", help="replace one config key"),
    arg("--results-dir", type=Path, default=None, help="defaults to CAMP_RESULTS_DIR"),
)


def _csv_list(kind):
    def parse(text: str):
        try:
            return [kind(item.strip()) for item in text.split(",") if item.strip()]
        except ValueError as e:
            raise argparse.ArgumentTypeError(str(e))
    return parse


@router.command("train", "Run the repeated-split evaluation for one configuration", *_config_args)
def train(args: argparse.Namespace) -> CommandResponse:
    cfg = load_config(args.config, args.override)
    summary = experiment_service.run_experiment(cfg, args.results_dir)
    return CommandResponse(
        success=True,
        command="train",
        message=f"{summary.run_id}: {summary.result.mean:.4f} ± {summary.result.scaled_std:.4f}",
        data=summary.model_dump(mode="json", exclude={"config"}),
    )


@router.command(
    "sweep",
    "Aggregate one configuration over a grid of order, p, L and centrality measure",
    *_config_args,
    arg("--orders", type=_csv_list(Order), default=None, help="e.g. descending,ascending"),
    arg("--p", dest="ps", type=_csv_list(float), default=None, help="e.g. 0.25,0.5,0.75,1.0"),
    arg("--layers", type=_csv_list(int), default=None, help="e.g. 4,10"),
    arg("--measures", type=_csv_list(CentralityMeasure), default=None, help="e.g. degree,pagerank"),
)
def sweep(args: argparse.Namespace) -> CommandResponse:
    cfg = load_config(args.config, args.override)
    table = experiment_service.sweep(cfg, args.orders, args.ps, args.layers, args.measures, args.results_dir)
    return CommandResponse(
        success=True,
        command="sweep",
        message=f"{len(table)} grid points",
        data={"rows": table.to_dict(orient="records")},
    )
