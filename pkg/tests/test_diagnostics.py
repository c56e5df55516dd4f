import numpy as np
import pytest
from pydantic import ValidationError

from app.config import Arch, CentralityMeasure, DiagnosticMetric
from app.engine.centrality import CentralityScores
from app.engine.diagnostics import (
    dirichlet_energy,
    dirichlet_trace,
    jacobian_block,
    normalized_adjacency,
    normalized_laplacian,
    product_vs_power,
    sensitivity_bound,
    sensitivity_jacobian,
    sensitivity_report,
    signal_propagation,
    total_effective_resistance,
)
from app.engine.graph import Dataset, Graph
from app.engine.models import CampModel, ModelConfig
from app.engine.scheduler import build_schedule, sync_schedule
from app.engine.tensor import Tensor
from app.errors import DimensionError, DomainError, ParameterError
from app.services.diagnostics_service import SCHEMAS, diagnostics_service
from app.view_models.DiagnosticReports import DirichletReport
from tests.conftest import complete_graph, path_graph, random_graph


def _scores(values) -> CentralityScores:
    return CentralityScores(CentralityMeasure.DEGREE, np.asarray(values, dtype=np.float64), 0)


def _positive_model(num_layers: int, width: int = 2, sync: bool = False, arch: Arch = Arch.GCN) -> CampModel:
    """Positive weights keep every ReLU active for positive inputs"""
    cfg = ModelConfig(arch=arch, num_layers=num_layers, hidden_dim=width, sync=sync)
    model = CampModel(cfg, in_dim=width, num_classes=2, seed=1)
    for name, t in model.parameters().items():
        if name.startswith("layers."):
            t.data[...] = np.abs(t.data) + 0.1
    return model


def test_dirichlet_energy_of_constant_features_on_regular_graph():
    assert dirichlet_energy(np.ones((4, 3)), complete_graph(4)) == pytest.approx(0.0, abs=1e-15)


def test_dirichlet_energy_matches_trace_form(rng):
    for _ in range(10):
        g = random_graph(9, 0.4, rng)
        x = rng.normal(size=(9, 3))
        expected = np.trace(x.T @ normalized_laplacian(g) @ x)
        assert dirichlet_energy(x, g) == pytest.approx(expected, rel=1e-10, abs=1e-12)
        assert dirichlet_energy(Tensor(x), g) == pytest.approx(expected, rel=1e-10, abs=1e-12)


def test_dirichlet_energy_shape_check(p3):
    with pytest.raises(DimensionError):
        dirichlet_energy(np.ones((4, 2)), p3)


def test_dirichlet_trace_has_one_entry_per_layer_plus_input(rng):
    g = random_graph(8, 0.4, rng, connected=True, features=3)
    model = CampModel(ModelConfig(num_layers=3, hidden_dim=4), in_dim=3, num_classes=2)
    report = dirichlet_trace(model, g, build_schedule(_scores(rng.random(8)), 3))
    assert len(report.energies) == 4
    assert all(e >= 0 for e in report.energies)
    assert report.final == report.energies[-1]


def test_dirichlet_report_rejects_negative_energy():
    with pytest.raises(ValidationError):
        DirichletReport(graph_id=0, energies=[1.0, -0.5])


def test_total_effective_resistance_examples():
    assert total_effective_resistance(path_graph(2)) == pytest.approx(1.0)
    assert total_effective_resistance(path_graph(3)) == pytest.approx(4.0)
    assert total_effective_resistance(path_graph(3), method="spectral") == pytest.approx(4.0)
    assert total_effective_resistance(Graph.from_edge_list(1, [])) == 0.0
    with pytest.raises(ParameterError):
        total_effective_resistance(path_graph(3), method="cholesky")


def test_resistance_methods_agree(rng):
    for _ in range(20):
        g = random_graph(int(rng.integers(2, 12)), 0.35, rng)
        assert total_effective_resistance(g, "pinv") == pytest.approx(
            total_effective_resistance(g, "spectral"), rel=1e-8, abs=1e-10
        )


def test_adding_an_edge_never_raises_resistance(rng):
    for _ in range(20):
        g = random_graph(8, 0.3, rng, connected=True)
        missing = [(i, j) for i in range(8) for j in range(i + 1, 8) if j not in g.neighbors(i)]
        if not missing:
            continue
        extra = missing[int(rng.integers(len(missing)))]
        denser = Graph.from_edge_list(8, np.vstack([g.edge_list(), [extra]]))
        assert total_effective_resistance(denser) <= total_effective_resistance(g) + 1e-9


def test_product_equals_power_for_full_batches(rng):
    g = random_graph(7, 0.4, rng)
    sched = sync_schedule(7, 4)
    for l in range(5):
        product, power = product_vs_power(g, sched, l)
        np.testing.assert_allclose(product, power, atol=1e-12)


def test_product_on_path_by_hand(p3):
    sched = build_schedule(_scores([0, 1, 0]), 3)
    inv = 1.0 / np.sqrt(np.array([2.0, 3.0, 2.0]))
    s1 = np.diag(inv * inv)
    for u, v in [(0, 1), (1, 0), (1, 2), (2, 1)]:
        s1[u, v] = inv[u] * inv[v]
    s2 = np.diag(inv * inv)
    s2[0, 1] = s2[1, 0] = inv[0] * inv[1]

    np.testing.assert_allclose(normalized_adjacency(p3), s1)
    product, power = product_vs_power(p3, sched, 2)
    np.testing.assert_allclose(product, s1 @ s2)
    np.testing.assert_allclose(power, s1 @ s1)
    with pytest.raises(ParameterError):
        product_vs_power(p3, sched, 4)


def test_sensitivity_of_a_node_to_itself_at_layer_zero(rng):
    g = random_graph(6, 0.5, rng, connected=True, features=3)
    model = CampModel(ModelConfig(num_layers=2, hidden_dim=5), in_dim=3, num_classes=2)
    sched = build_schedule(_scores(rng.random(6)), 2)
    assert sensitivity_jacobian(model, g, 2, 2, 0, sched) == pytest.approx(5.0)

    bound = sensitivity_bound(model, g, sched, 2, 2, 0)
    assert bound["model_factor"] == 1.0
    assert bound["topology_factor"] == pytest.approx(1.0)


def test_ordered_schedule_carries_information_one_way(p5):
    model = _positive_model(5)
    sched = build_schedule(_scores([4, 3, 2, 1, 0]), 5)
    h0 = np.full((5, 2), 0.5)

    assert sensitivity_jacobian(model, p5, 0, 4, 5, sched, h0) > 0.0
    assert sensitivity_jacobian(model, p5, 4, 0, 5, sched, h0) == 0.0

    synced = _positive_model(5, sync=True)
    assert sensitivity_jacobian(synced, p5, 4, 0, 5, None, h0) > 0.0
    assert sensitivity_jacobian(synced, p5, 0, 4, 3, None, h0) == 0.0


def test_four_layer_path_reaches_the_tail_only_in_schedule_order(p5):
    model = _positive_model(4)
    h0 = np.full((5, 2), 0.5)
    head_first = build_schedule(_scores([4, 3, 2, 1, 0]), 4)
    tail_first = build_schedule(_scores([0, 1, 2, 3, 4]), 4)
    assert [b.tolist() for b in head_first.batches] == [[0, 1], [2], [3], [4]]
    assert [b.tolist() for b in tail_first.batches] == [[4, 3], [2], [1], [0]]

    assert sensitivity_jacobian(model, p5, 0, 4, 4, head_first, h0) > 0.0
    assert sensitivity_jacobian(model, p5, 0, 4, 4, tail_first, h0) == 0.0


@pytest.mark.parametrize("arch", [Arch.GCN, Arch.GIN])
def test_jacobian_matches_finite_differences(arch, rng):
    g = random_graph(7, 0.4, rng, connected=True)
    model = CampModel(ModelConfig(arch=arch, num_layers=3, hidden_dim=3), in_dim=3, num_classes=2, seed=4)
    sched = build_schedule(_scores(rng.random(7)), 3)
    h0 = rng.normal(size=(7, 3))
    u, v, l, h = 1, 4, 3, 1e-6

    jac = jacobian_block(model, g, sched, h0, u, v, l)
    numeric = np.zeros((3, 3))
    for j in range(3):
        up, down = h0.copy(), h0.copy()
        up[u, j] += h
        down[u, j] -= h
        f_up = model.propagate(Tensor(up), g, sched, upto=l).features.data[v]
        f_down = model.propagate(Tensor(down), g, sched, upto=l).features.data[v]
        numeric[:, j] = (f_up - f_down) / (2 * h)
    np.testing.assert_allclose(jac, numeric, atol=1e-6)


def test_sensitivity_report_lists_each_pair(rng):
    g = random_graph(6, 0.5, rng, connected=True, features=2)
    model = CampModel(ModelConfig(num_layers=2, hidden_dim=3), in_dim=2, num_classes=2)
    sched = build_schedule(_scores(rng.random(6)), 2)
    report = sensitivity_report(model, g, sched, [(0, 1), (2, 5)], 2)

    assert [(p.u, p.v) for p in report.pairs] == [(0, 1), (2, 5)]
    assert report.width == 3
    assert report.w == pytest.approx(model.max_abs_weight())
    for pair in report.pairs:
        assert pair.model_factor == pytest.approx((report.c * report.w * report.width) ** 2)
        assert pair.bound == pytest.approx(pair.model_factor * pair.topology_factor)
        assert pair.distance == g.hop_distances(pair.v)[pair.u]


def test_signal_is_zero_without_propagation():
    model = _positive_model(2, width=3, sync=True)
    entry = signal_propagation(model, path_graph(4), None, m=0, seed=1)
    assert entry.signal == 0.0
    assert entry.num_sources == 4


def test_signal_crosses_a_single_edge():
    model = _positive_model(1, width=3, sync=True)
    entry = signal_propagation(model, path_graph(2), None, m=1, seed=1)
    assert entry.r_total_normalized == pytest.approx(1.0)
    assert entry.signal > 0.0
    assert entry.layers == 1


def test_signal_needs_two_nodes():
    model = _positive_model(1, width=2, sync=True)
    with pytest.raises(DomainError):
        signal_propagation(model, Graph.from_edge_list(1, []), None, m=1)


def test_dirichlet_energy_vanishes_only_on_the_degree_mode(rng):
    g = random_graph(8, 0.4, rng, connected=True)
    mode = np.sqrt(g.degrees + 1.0)[:, None]
    assert dirichlet_energy(3.0 * mode, g) == pytest.approx(0.0, abs=1e-12)

    evals, evecs = np.linalg.eigh(normalized_laplacian(g))
    assert np.sum(evals < 1e-10) == 1
    np.testing.assert_allclose(np.abs(evecs[:, 0]), (mode / np.linalg.norm(mode))[:, 0], atol=1e-8)
    assert dirichlet_energy(rng.normal(size=(8, 2)), g) > 0.0


def test_jacobian_is_zero_wherever_the_layer_product_is_zero(rng):
    g = random_graph(9, 0.25, rng, connected=True)
    model = CampModel(ModelConfig(num_layers=3, hidden_dim=2), in_dim=2, num_classes=2, seed=6)
    sched = build_schedule(_scores(rng.random(9)), 3)
    h0 = rng.normal(size=(9, 2))
    product, _ = product_vs_power(g, sched, 3)
    zeros = [(u, v) for u in range(9) for v in range(9) if u != v and product[u, v] == 0.0]
    assert zeros
    for u, v in zeros:
        assert np.abs(jacobian_block(model, g, sched, h0, u, v, 3)).sum() == 0.0


def test_diagnostics_service_skips_graphs_it_cannot_measure(tmp_path):
    graphs = (path_graph(3), Graph.from_edge_list(1, [], graph_id=1))
    ds = Dataset(graphs=graphs, num_classes=1, feature_dim=0, name="TINY", has_node_features=False)
    model = _positive_model(1, width=2, sync=True)

    table = diagnostics_service.run("signal", ds, model, None, tmp_path / "signal.csv", seed=0)
    assert list(table.columns) == SCHEMAS[DiagnosticMetric.SIGNAL]
    assert table["graph_id"].tolist() == [0]
    assert (tmp_path / "signal.csv").exists()

    with pytest.raises(ParameterError):
        diagnostics_service.run("prop1", ds, None, None)


def test_diagnostics_service_prop1_rows(p3):
    ds = Dataset(graphs=(p3,), num_classes=1, feature_dim=0, name="P3", has_node_features=False)
    schedules = diagnostics_service.schedules_for(ds, 3, CentralityMeasure.DEGREE)
    table = diagnostics_service.run(DiagnosticMetric.PROP1, ds, None, schedules, layer=2)
    assert len(table) == 9
    assert list(table.columns) == SCHEMAS[DiagnosticMetric.PROP1]


def test_diagnostics_service_pair_budget_is_per_call(rng):
    g = random_graph(6, 0.5, rng, connected=True, features=2)
    ds = Dataset(graphs=(g,), num_classes=1, feature_dim=2, name="ONE")
    model = CampModel(ModelConfig(num_layers=2, hidden_dim=3, sync=True), in_dim=2, num_classes=1)

    few = diagnostics_service.run("sensitivity", ds, model, None, max_pairs=3)
    default = diagnostics_service.run("sensitivity", ds, model, None)
    assert len(few) == 3
    assert len(default) == 10
    assert list(default.columns) == SCHEMAS[DiagnosticMetric.SENSITIVITY]
