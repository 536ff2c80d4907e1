import inspect
from dataclasses import replace

import numpy as np
import pytest

from qkevolve import evolve as ev
from qkevolve.circuit import Chromosome, GateKind, Gene, random_chromosome, random_gene
from qkevolve.data import Dataset, make_xor, preprocess

SEPARATOR = Chromosome((Gene(GateKind.SQRT_X, 0), Gene(GateKind.RZ, 0, feature=0)), 1)
CONSTANT = Chromosome((Gene(GateKind.PAULI_X, 0),), 1)


@pytest.fixture(scope="module")
def small_splits():
    return preprocess(make_xor(60, 0.1, seed=0), seed=0).splits


def _tiny(**kw):
    base = dict(population_size=4, max_generations=5, seed=1)
    base.update(kw)
    return ev.EvolveConfig(**base)


def test_mutate_zero_prob_is_identity():
    rng = np.random.default_rng(0)
    c = random_chromosome(12, 3, 2, rng)
    assert ev.mutate(c, 0.0, 2, rng) == c


def test_mutate_full_prob_resamples_every_gene():
    c = random_chromosome(6, 2, 2, np.random.default_rng(0))
    child = ev.mutate(c, 1.0, 2, np.random.default_rng(9))
    rng = np.random.default_rng(9)
    rng.random(6)
    assert child.genes == tuple(random_gene(2, 2, rng) for _ in range(6))


def test_mutate_leaves_parent_untouched():
    c = random_chromosome(8, 2, 2, np.random.default_rng(0))
    before = c.to_json()
    ev.mutate(c, 0.5, 2, np.random.default_rng(1))
    assert c.to_json() == before


def test_mutation_mask_binomial():
    n, p = 20000, 0.3
    hits = ev.mutation_mask(n, p, np.random.default_rng(4)).sum()
    assert abs(hits - n * p) < 4 * np.sqrt(n * p * (1 - p))


def test_constant_kernel_scores_half():
    X = np.linspace(-1, 1, 8)[:, None]
    train = Dataset(X, np.array([0, 1] * 4), "toy")
    assert ev.fitness_supervised(CONSTANT, train) == pytest.approx(0.5)


def test_separable_pair_scores_one():
    train = Dataset(np.array([[-np.pi / 2], [np.pi / 2]]), np.array([0, 1]), "toy")
    assert ev.fitness_supervised(SEPARATOR, train) == 1.0


def test_unsupervised_fitness_bounds():
    assert ev.fitness_unsupervised(CONSTANT, np.zeros((5, 1))) == pytest.approx(1.0)
    X = np.array([[-np.pi / 2], [np.pi / 2]])
    assert ev.fitness_unsupervised(SEPARATOR, X) == pytest.approx(0.5)


def test_unsupervised_fitness_takes_no_labels():
    assert list(inspect.signature(ev.fitness_unsupervised).parameters) == ["chromosome", "X"]


def test_fitness_failure_is_zero():
    bad = Chromosome((Gene(GateKind.RZ, 0, feature=5),), 1)
    train = Dataset(np.zeros((4, 1)), np.array([0, 1, 0, 1]), "toy")
    assert ev.fitness_supervised(bad, train) == 0.0


def test_zero_target_stops_after_one_generation(small_splits):
    res = ev.evolve_fixed_length(_tiny(target_fitness=0.0), 4, small_splits)
    assert res.generations_used == 1 and res.converged


def test_single_clone_without_mutation_is_static(small_splits):
    res = ev.evolve_fixed_length(_tiny(population_size=1, mutation_prob=0.0, target_fitness=1.01), 4, small_splits)
    assert res.generations_used == 5
    assert len(set(res.fitness_trace)) == 1


def test_trace_is_monotone(small_splits):
    res = ev.evolve_fixed_length(_tiny(max_generations=8, target_fitness=1.01), 3, small_splits)
    assert all(b >= a for a, b in zip(res.fitness_trace, res.fitness_trace[1:]))
    assert res.validation_fitness == res.fitness_trace[-1]


def test_deterministic(small_splits):
    cfg = _tiny(max_generations=4)
    assert ev.evolve(cfg, small_splits).to_json() == ev.evolve(cfg, small_splits).to_json()


def test_threads_do_not_change_result(small_splits):
    cfg = _tiny(max_generations=4)
    a = ev.evolve(cfg, small_splits).to_dict()
    b = ev.evolve(replace(cfg, workers=3), small_splits).to_dict()
    a.pop("config"), b.pop("config")
    assert a == b


def test_unreachable_target_reports_failure(small_splits):
    cfg = _tiny(max_generations=2, target_fitness=1.01, max_genes=8, initial_genes=2)
    res = ev.evolve(cfg, small_splits)
    assert not res.converged
    assert [t["genes"] for t in res.lengths_tried] == [2, 4, 8]
    assert res.validation_fitness == max(t["validation_fitness"] for t in res.lengths_tried)


def test_bracket_returns_shortest_success(small_splits):
    res = ev.evolve(_tiny(max_generations=6, target_fitness=0.9), small_splits)
    tried = res.lengths_tried
    ok = [t["genes"] for t in tried if t["success"]]
    if ok:
        assert res.converged and len(res.best) == min(ok)
    fails = [t["genes"] for t in tried if not t["success"]]
    assert all(f < min(ok) for f in fails) if ok and fails else True


def test_bracket_sequence_doubles_then_bisects(monkeypatch, small_splits):
    # pretend circuits of at least 11 genes succeed
    def fake(config, n_genes, splits, attempt=0):
        c = random_chromosome(n_genes, 2, 2, np.random.default_rng(attempt))
        ok = n_genes >= 11
        return ev.EvolveResult(c, 1.0, float(ok), 1.0, 0.0, n_genes, 1, [1.0], ok, 0, config)

    monkeypatch.setattr(ev, "evolve_fixed_length", fake)
    res = ev.evolve(ev.EvolveConfig(), small_splits)
    assert [t["genes"] for t in res.lengths_tried] == [4, 8, 16, 12, 10, 11]
    assert res.gate_count == 11


def test_config_validation():
    with pytest.raises(ValueError):
        ev.EvolveConfig(population_size=0)
    with pytest.raises(ValueError):
        ev.EvolveConfig(mutation_prob=1.5)
    assert ev.EvolveConfig().target == 0.95
    assert ev.EvolveConfig(technique="unsupervised").target is None


def test_unsupervised_run_stops_on_stationarity(small_splits):
    cfg = _tiny(technique="unsupervised", patience=3, max_generations=50)
    res = ev.evolve_fixed_length(cfg, 4, small_splits)
    assert res.converged and res.generations_used < 50


def test_result_roundtrip(small_splits):
    res = ev.evolve(_tiny(max_generations=3), small_splits)
    back = ev.EvolveResult.from_dict(__import__("json").loads(res.to_json()))
    assert back.to_json() == res.to_json()


def test_single_repeat_benchmark():
    s = ev.run_benchmark(_tiny(max_generations=3), make_xor(40, 0.1, seed=2), repeats=1)
    assert len(s.results) == 1
    assert s.std_accuracy == 0.0
    assert s.mean_accuracy == s.results[0].test_accuracy


def test_final_evaluation_uses_held_out_split(small_splits):
    res = ev.evolve(_tiny(max_generations=3), small_splits)
    model, states = ev.train_qsvm(res.best, small_splits.train)
    assert res.test_accuracy == ev.qsvm_accuracy(res.best, model, states, small_splits.test)
