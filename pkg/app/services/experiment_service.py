"""
Experiment service - seeded multi-trial runs, aggregation with the 2/sqrt(T)
s.d. scaling, parameter sweeps and result emission
"""
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from app.config import CentralityMeasure, Order, RunMode, ScheduleMode, settings
from app.engine.graph import Dataset, make_split
from app.engine.models import CampModel
from app.engine.scheduler import LayerSchedule, build_schedule
from app.errors import AggregationError
from app.services.common.centrality_factory import centrality_factory
from app.services.common.checkpoint_service import checkpoint_service
from app.services.common.dataset_presets import DatasetPresets
from app.services.common.dataset_service import dataset_service
from app.services.common.run_logger_service import run_logger_service
from app.services.trainer_service import trainer_service
from app.view_models.ExperimentRequest import ExperimentConfig
from app.view_models.ExperimentResults import AggregateResult, ExperimentSummary, TrialResult

logger = logging.getLogger(__name__)

TRIAL_COLUMNS = [
    "trial", "seed", "status", "test_accuracy", "best_valid_accuracy", "best_epoch", "failed_epoch", "error",
]
CURVE_COLUMNS = ["trial", "epoch", "train_loss", "train_accuracy", "valid_accuracy"]
SWEEP_COLUMNS = [
    "order", "p", "L", "measure", "mean", "std", "scaled_std", "num_trials", "num_failed", "run_id",
]


def graph_seed(seed: int, index: int) -> int:
    """Independent, reproducible seed for graph `index` under a trial seed"""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


class ExperimentService:
    """Runs the repeated-split evaluation protocol for an ExperimentConfig"""

    __slots__ = ("dataset_service", "save_checkpoints")

    def __init__(self, save_checkpoints: bool = True):
        self.dataset_service = dataset_service
        self.save_checkpoints = save_checkpoints

    def load_dataset(self, cfg: ExperimentConfig) -> Dataset:
        return self.dataset_service.get_dataset(cfg.dataset, cfg.name)

    @staticmethod
    def prepare_schedules(cfg: ExperimentConfig, ds: Dataset, seed: int) -> Optional[list[LayerSchedule]]:
        """Per-graph schedules for CAMP/RAMP runs; None for the synchronous baseline"""
        if cfg.mode is RunMode.SYNC:
            return None

        if cfg.mode is RunMode.CAMP:
            scores = centrality_factory.compute_all(ds, cfg.measure)
            return [
                build_schedule(s, cfg.num_layers, cfg.order, cfg.sampling_p, graph_seed(seed, i), ScheduleMode.CAMP)
                for i, s in enumerate(scores)
            ]

        return [
            build_schedule(
                None, cfg.num_layers, cfg.order, cfg.sampling_p, graph_seed(seed, i), ScheduleMode.RAMP, n=g.n
            )
            for i, g in enumerate(ds.graphs)
        ]

    def run_trial(
        self,
        cfg: ExperimentConfig,
        trial: int,
        ds: Optional[Dataset] = None,
        run_dir: Optional[Path] = None,
    ) -> TrialResult:
        """One seeded split: seed = base_seed + trial drives split, schedules, init and shuffling"""
        ds = ds or self.load_dataset(cfg)
        seed = cfg.base_seed + trial
        split = make_split(ds, seed)
        schedules = self.prepare_schedules(cfg, ds, seed)
        model = CampModel(cfg.to_model_config(), ds.feature_dim, ds.num_classes, seed=seed)

        logger.info(f"🚀 Trial {trial} (seed {seed}) on {ds.name}: {cfg.arch.value}/{cfg.mode.value}, L={cfg.num_layers}")
        result, best_state = trainer_service.train(
            model,
            ds,
            split,
            schedules,
            trial=trial,
            seed=seed,
            epochs=cfg.epochs,
            lr=cfg.lr,
            weight_decay=cfg.weight_decay,
            batch_size=cfg.batch_size,
            resample_per_epoch=cfg.resample_per_epoch,
        )

        if run_dir is not None and best_state is not None and self.save_checkpoints:
            params = model.parameters()
            for name, values in best_state.items():
                params[name].data[...] = values
            checkpoint_service.save(model, Path(run_dir) / "checkpoints" / f"trial_{trial}")
        return result

    @staticmethod
    def aggregate(results: Sequence[TrialResult], T: Optional[int] = None) -> AggregateResult:
        """
        Mean and sample s.d. of the successful trials' test accuracies, with
        scaled_std = sd * 2 / sqrt(T). T defaults to the number of successful trials.
        """
        ok = [r for r in results if r.ok]
        failed = [r.trial for r in results if not r.ok]
        if not ok:
            raise AggregationError(f"No successful trials to aggregate ({len(failed)} failed)")

        acc = np.array([r.test_accuracy for r in ok], dtype=np.float64)
        T = len(ok) if T is None else T
        std = float(acc.std(ddof=1)) if acc.size > 1 else 0.0
        return AggregateResult(
            mean=float(acc.mean()),
            std=std,
            scaled_std=std * 2.0 / math.sqrt(T),
            num_trials=len(ok),
            num_failed=len(failed),
            failed_trials=failed,
            accuracies=acc.tolist(),
        )

    @staticmethod
    def default_run_id(cfg: ExperimentConfig, kind: str = "train") -> str:
        stamp = datetime.now().strftime("%Y%m%d-%H%M%S")
        return f"{kind}-{cfg.dataset_name}-{cfg.arch.value}-{cfg.mode.value}-{stamp}"

    @staticmethod
    def write_trials(results: Sequence[TrialResult], run_dir: Path) -> tuple[Path, Path]:
        trials = pd.DataFrame(
            [r.model_dump(include=set(TRIAL_COLUMNS)) for r in results], columns=TRIAL_COLUMNS
        )
        curves = pd.DataFrame(
            [
                (r.trial, epoch, loss, tr, va)
                for r in results
                for epoch, (loss, tr, va) in enumerate(zip(r.train_loss, r.train_accuracy, r.valid_accuracy))
            ],
            columns=CURVE_COLUMNS,
        )
        trials_path = run_dir / "trials.csv"
        curves_path = run_dir / "figure_data" / "curves.csv"
        curves_path.parent.mkdir(parents=True, exist_ok=True)
        trials.to_csv(trials_path, index=False)
        curves.to_csv(curves_path, index=False)
        return trials_path, curves_path

    def run_experiment(self, cfg: ExperimentConfig, results_dir: Optional[Path] = None) -> ExperimentSummary:
        """
        Run cfg.trials independent trials in a worker pool and write trials.csv,
        figure_data/curves.csv, summary.json and the emitted config into
        <results_dir>/<run_id>/
        """
        run_id = cfg.run_id or self.default_run_id(cfg)
        run_dir = Path(results_dir or settings.RESULTS_DIR) / run_id
        run_dir.mkdir(parents=True, exist_ok=True)
        cfg.save(run_dir / "config.txt")

        with run_logger_service.attached(run_dir):
            try:
                ds = self.load_dataset(cfg)
                logger.info(
                    f"Starting run {run_id}: {cfg.trials} trials on {ds.name} "
                    f"({len(ds)} graphs) with {cfg.num_workers} worker(s)"
                )

                # warm the centrality cache before the workers start
                if cfg.mode is RunMode.CAMP:
                    centrality_factory.compute_all(ds, cfg.measure)
                    warned = {
                        w for s in self.prepare_schedules(cfg, ds, cfg.base_seed) for w in s.warnings
                    }
                    for w in sorted(warned):
                        run_logger_service.log_message(run_dir, "WARNING", w)

                with ThreadPoolExecutor(max_workers=cfg.num_workers) as pool:
                    results = list(pool.map(lambda t: self.run_trial(cfg, t, ds, run_dir), range(cfg.trials)))

                for r in results:
                    if not r.ok:
                        run_logger_service.log_message(
                            run_dir, "ERROR", f"Trial {r.trial} failed at epoch {r.failed_epoch}: {r.error}"
                        )

                self.write_trials(results, run_dir)
                aggregate = self.aggregate(results)
                targets = DatasetPresets.get_targets(cfg.dataset_name, cfg.arch)
                summary = ExperimentSummary(
                    run_id=run_id,
                    dataset=cfg.dataset_name,
                    arch=cfg.arch.value,
                    mode=cfg.mode.value,
                    measure=cfg.measure.value if cfg.measure else None,
                    num_layers=cfg.num_layers,
                    sampling_p=cfg.sampling_p,
                    order=cfg.order.value,
                    result=aggregate,
                    targets=targets,
                    config=cfg.emit(),
                )
                (run_dir / "summary.json").write_text(summary.model_dump_json(indent=2), encoding="utf-8")
                logger.info(
                    f"✅ Run {run_id}: mean {aggregate.mean:.4f} ± {aggregate.scaled_std:.4f} "
                    f"over {aggregate.num_trials} trials ({aggregate.num_failed} failed)"
                )
                return summary

            except Exception as e:
                logger.error(f"Error in run_experiment ({run_id}): {e}")
                run_logger_service.log_exception(run_dir, "ERROR", f"Run {run_id} aborted", e)
                raise

    def sweep(
        self,
        cfg: ExperimentConfig,
        orders: Optional[Sequence[Order]] = None,
        ps: Optional[Sequence[float]] = None,
        layers: Optional[Sequence[int]] = None,
        measures: Optional[Sequence[CentralityMeasure]] = None,
        results_dir: Optional[Path] = None,
    ) -> pd.DataFrame:
        """One aggregate row per grid point of order x p x L x measure; written to figure_data/sweep.csv"""
        orders = list(orders or [cfg.order])
        ps = list(ps or [cfg.sampling_p])
        layers = list(layers or [cfg.num_layers])
        if cfg.mode is RunMode.CAMP:
            measures = list(measures or [cfg.measure])
        else:
            measures = [None]

        sweep_id = cfg.run_id or self.default_run_id(cfg, kind="sweep")
        sweep_dir = Path(results_dir or settings.RESULTS_DIR) / sweep_id
        sweep_dir.mkdir(parents=True, exist_ok=True)

        rows = []
        with run_logger_service.attached(sweep_dir):
            grid = list(itertools.product(orders, ps, layers, measures))
            logger.info(f"Sweep {sweep_id}: {len(grid)} grid points")
            for k, (order, p, num_layers, measure) in enumerate(grid):
                point = cfg.with_overrides(
                    order=order,
                    sampling_p=p,
                    num_layers=num_layers,
                    measure=measure,
                    run_id=f"point_{k:03d}",
                )
                summary = self.run_experiment(point, results_dir=sweep_dir)
                rows.append({
                    "order": Order(order).value,
                    "p": float(p),
                    "L": int(num_layers),
                    "measure": CentralityMeasure(measure).value if measure else "",
                    "mean": summary.result.mean,
                    "std": summary.result.std,
                    "scaled_std": summary.result.scaled_std,
                    "num_trials": summary.result.num_trials,
                    "num_failed": summary.result.num_failed,
                    "run_id": summary.run_id,
                })

        table = pd.DataFrame(rows, columns=SWEEP_COLUMNS)
        out = sweep_dir / "figure_data" / "sweep.csv"
        out.parent.mkdir(parents=True, exist_ok=True)
        table.to_csv(out, index=False)
        logger.info(f"Sweep {sweep_id} written to {out}")
        return table


# Singleton instance
experiment_service = ExperimentService()
