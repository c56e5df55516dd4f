"""
Trainer service - mini-batch training of a CampModel on one seeded split
with best-validation model selection
"""
import logging
from typing import Optional, Sequence

import numpy as np

from app.engine import tensor as T
from app.engine.graph import Dataset, SplitSpec, collate
from app.engine.models import CampModel
from app.engine.optim import AdamState, adam_step
from app.engine.scheduler import LayerSchedule, merge_schedules
from app.engine.tensor import Tape
from app.errors import NumericalError
from app.view_models.ExperimentResults import TrialResult

logger = logging.getLogger(__name__)


class TrainerService:
    """Epoch loop, evaluation and failure capture for a single trial"""

    @staticmethod
    def _chunks(idx: np.ndarray, size: int) -> list[np.ndarray]:
        return [idx[i:i + size] for i in range(0, idx.size, size)]

    @staticmethod
    def _batch_schedule(
        schedules: Optional[Sequence[LayerSchedule]], idx: np.ndarray, offsets: np.ndarray
    ) -> Optional[LayerSchedule]:
        if schedules is None:
            return None
        return merge_schedules([schedules[i] for i in idx], offsets)

    def evaluate(
        self,
        model: CampModel,
        ds: Dataset,
        idx: Sequence[int],
        schedules: Optional[Sequence[LayerSchedule]],
        batch_size: int,
    ) -> float:
        """Accuracy over the graphs in idx, evaluation mode"""
        idx = np.asarray(idx, dtype=np.int64)
        if idx.size == 0:
            return 0.0
        correct = 0
        for chunk in self._chunks(idx, batch_size):
            batch = collate([ds.graphs[i] for i in chunk])
            logits = model.forward(batch, self._batch_schedule(schedules, chunk, batch.offsets))
            correct += int(np.sum(logits.data.argmax(axis=1) == batch.labels))
        return correct / idx.size

    def train(
        self,
        model: CampModel,
        ds: Dataset,
        split: SplitSpec,
        schedules: Optional[Sequence[LayerSchedule]],
        *,
        trial: int,
        seed: int,
        epochs: int,
        lr: float,
        weight_decay: float,
        batch_size: int,
        resample_per_epoch: bool = False,
    ) -> tuple[TrialResult, Optional[dict[str, np.ndarray]]]:
        """
        Train for a fixed number of epochs and report the test accuracy at the
        epoch with the best validation accuracy (earliest on ties).

        Returns:
            (TrialResult, best-epoch parameter snapshot or None for failed trials)
        """
        rng = np.random.default_rng([seed, 1])
        state = AdamState(lr=lr, weight_decay=weight_decay)
        params = model.parameters()
        train_idx = np.asarray(split.train_idx, dtype=np.int64)

        losses: list[float] = []
        train_acc: list[float] = []
        valid_acc: list[float] = []
        best_valid, best_test, best_epoch = -1.0, None, None
        best_state: Optional[dict[str, np.ndarray]] = None

        epoch = 0
        try:
            for epoch in range(epochs):
                epoch_schedules = schedules
                if resample_per_epoch and schedules is not None:
                    epoch_schedules = [s.resample(s.seed + epoch) for s in schedules]

                total_loss = 0.0
                for chunk in self._chunks(rng.permutation(train_idx), batch_size):
                    batch = collate([ds.graphs[i] for i in chunk])
                    sched = self._batch_schedule(epoch_schedules, chunk, batch.offsets)
                    for p in params.values():
                        p.grad = None
                    with Tape() as tape:
                        logits = model.forward(batch, sched, training=True, rng=rng)
                        loss = T.nll_loss(T.log_softmax(logits), batch.labels)
                    T.backward(tape, loss)
                    grads = {name: p.grad for name, p in params.items() if p.grad is not None}
                    adam_step(state, params, grads)
                    total_loss += loss.item() * chunk.size

                losses.append(total_loss / max(train_idx.size, 1))
                train_acc.append(self.evaluate(model, ds, split.train_idx, epoch_schedules, batch_size))
                valid = self.evaluate(model, ds, split.valid_idx, epoch_schedules, batch_size)
                valid_acc.append(valid)

                if valid > best_valid:
                    best_valid, best_epoch = valid, epoch
                    best_test = self.evaluate(model, ds, split.test_idx, epoch_schedules, batch_size)
                    best_state = {name: p.data.copy() for name, p in params.items()}

                logger.debug(
                    f"trial {trial} epoch {epoch}: loss={losses[-1]:.4f} "
                    f"train={train_acc[-1]:.4f} valid={valid:.4f}"
                )
        except NumericalError as e:
            logger.error(f"❌ Trial {trial} failed at epoch {epoch}: {e}")
            return TrialResult(
                trial=trial,
                seed=seed,
                status="failed",
                failed_epoch=epoch,
                error=str(e),
                train_loss=losses,
                train_accuracy=train_acc,
                valid_accuracy=valid_acc,
            ), None

        logger.info(
            f"✅ Trial {trial} done: best valid {best_valid:.4f} at epoch {best_epoch}, test {best_test:.4f}"
        )
        return TrialResult(
            trial=trial,
            seed=seed,
            test_accuracy=best_test,
            best_valid_accuracy=best_valid,
            best_epoch=best_epoch,
            train_loss=losses,
            train_accuracy=train_acc,
            valid_accuracy=valid_acc,
        ), best_state


# Singleton instance
trainer_service = TrainerService()
