"""
End-to-end runs on real TUDatasets. Every test here is marked slow and
skips unless the dataset directory exists under CAMP_DATA_DIR.
"""
import time

import numpy as np
import pytest

from app.config import Arch, CentralityMeasure
from app.engine import tensor as T
from app.engine.graph import collate
from app.engine.models import CampModel, ModelConfig
from app.engine.scheduler import build_schedule, merge_schedules
from app.engine.tensor import Tape
from app.services.common.centrality_factory import CentralityFactory
from app.services.common.checkpoint_service import checkpoint_service
from app.services.common.dataset_presets import DatasetPresets
from app.services.common.dataset_service import dataset_service
from app.services.diagnostics_service import diagnostics_service
from app.services.experiment_service import experiment_service
from app.view_models.ExperimentRequest import parse_config_text
from tests.conftest import real_dataset

pytestmark = pytest.mark.slow


def _run(tmp_path, text: str):
    return experiment_service.run_experiment(parse_config_text(text), results_dir=tmp_path)


def test_mutag_camp_gcn_matches_or_beats_the_synchronous_baseline(tmp_path):
    path = real_dataset("MUTAG")
    baseline = _run(tmp_path, f"dataset = {path}\narch = gcn\nmode = sync\nnum_layers = 4\ntrials = 25\nrun_id = base\n")
    camp = _run(tmp_path, f"dataset = {path}\narch = gcn\nuse_presets = true\ntrials = 25\nrun_id = camp\n")

    published_mean = DatasetPresets.get_targets("MUTAG", Arch.GCN)["baseline_mean"]
    assert baseline.result.num_failed == 0 and camp.result.num_failed == 0
    assert 100.0 * baseline.result.mean == pytest.approx(published_mean, abs=6.0)
    assert camp.num_layers == 16 and camp.measure == CentralityMeasure.DEGREE.value
    assert camp.result.mean >= baseline.result.mean


@pytest.mark.parametrize("name", ["ENZYMES", "PROTEINS"])
def test_small_datasets_train_without_numerical_failure(name, tmp_path):
    path = real_dataset(name)
    summary = _run(tmp_path, f"dataset = {path}\narch = gcn\nuse_presets = true\ntrials = 2\nrun_id = {name}\n")
    assert summary.result.num_failed == 0
    assert summary.targets is not None


def _median_final_energy(run_dir, ds, schedules, trials: int) -> float:
    per_trial = []
    for k in range(trials):
        model = checkpoint_service.load(run_dir / "checkpoints" / f"trial_{k}")
        table = diagnostics_service.run("dirichlet", ds, model, schedules)
        per_trial.append(table[table["layer"] == model.cfg.num_layers]["energy"].mean())
    return float(np.median(per_trial))


def test_ten_layer_camp_gcn_keeps_more_dirichlet_energy_than_sync(tmp_path):
    path = real_dataset("MUTAG")
    common = f"dataset = {path}\narch = gcn\nnum_layers = 10\ntrials = 5\n"
    _run(tmp_path, common + "mode = camp\nmeasure = degree\nrun_id = de_camp\n")
    _run(tmp_path, common + "mode = sync\nrun_id = de_sync\n")

    ds = dataset_service.get_dataset(path)
    schedules = diagnostics_service.schedules_for(ds, 10, CentralityMeasure.DEGREE)
    camp = _median_final_energy(tmp_path / "de_camp", ds, schedules, 5)
    sync = _median_final_energy(tmp_path / "de_sync", ds, None, 5)
    assert camp > sync


def test_reddit_binary_runs_one_training_batch_in_time():
    path = real_dataset("REDDIT-BINARY")
    started = time.perf_counter()
    ds = dataset_service.get_dataset(path)
    assert len(ds) == 2000

    layers, measure = DatasetPresets.get_preset("REDDIT-BINARY", Arch.GCN)
    provider = CentralityFactory.create_provider(measure)
    idx = np.arange(64)
    schedules = [build_schedule(provider.compute_or_zero(ds.graphs[i]), layers) for i in idx]
    batch = collate([ds.graphs[i] for i in idx])

    model = CampModel(ModelConfig(num_layers=layers, hidden_dim=64), ds.feature_dim, ds.num_classes)
    with Tape() as tape:
        logits = model.forward(batch, merge_schedules(schedules, batch.offsets), training=True,
                               rng=np.random.default_rng(0))
        loss = T.nll_loss(T.log_softmax(logits), batch.labels)
    T.backward(tape, loss)

    assert np.isfinite(loss.item())
    assert all(np.isfinite(p.grad).all() for p in model.parameters().values() if p.grad is not None)
    assert time.perf_counter() - started < 120.0
