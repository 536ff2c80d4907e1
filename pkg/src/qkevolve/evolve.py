"""(1+k) elitist, mutation-only evolution of encoding circuits.

One incumbent circuit spawns ``k`` mutants per generation. The mutant with
the best training fitness is scored on the validation split and replaces the
incumbent when its validation fitness is at least as good. Around this loop a
bracketing search over gene count looks for the shortest circuit that reaches
the target fitness.
"""
from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from enum import Enum

import numpy as np

from . import kernels, svm
from .circuit import Chromosome, encode_batch, gate_count, random_chromosome, random_gene
from .data import Dataset, Splits

log = logging.getLogger(__name__)


class Technique(str, Enum):
    SUPERVISED = "supervised"
    UNSUPERVISED = "unsupervised"


@dataclass(frozen=True)
class EvolveConfig:
    population_size: int = 10
    mutation_prob: float = 0.5
    max_generations: int = 100
    # None selects the technique default: 0.95 supervised, stationarity unsupervised
    target_fitness: float | None = None
    initial_genes: int | None = None
    technique: Technique = Technique.SUPERVISED
    svm_c: float = 1.0
    seed: int = 0
    n_qubits: int | None = None
    patience: int = 20
    max_genes: int = 1024
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "technique", Technique(self.technique))
        if self.population_size < 1:
            raise ValueError("population_size must be >= 1")
        if not 0 <= self.mutation_prob <= 1:
            raise ValueError("mutation_prob must lie in [0, 1.01]")
        if self.max_generations < 1:
            raise ValueError("max_generations must be >= 1")
        if self.svm_c <= 0:
            raise ValueError("svm_c must be positive")
        t = self.target_fitness
        if t is not None and self.technique is Technique.SUPERVISED and not 0 <= t <= 1.01:
            raise ValueError("supervised target_fitness must lie in [0, 1.01]")

    @property
    def target(self) -> float | None:
        if self.target_fitness is not None:
            return self.target_fitness
        return 0.95 if self.technique is Technique.SUPERVISED else None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["technique"] = self.technique.value
        return d


@dataclass
class EvolveResult:
    best: Chromosome
    train_fitness: float
    validation_fitness: float
    test_accuracy: float
    entropy: float
    gate_count: int
    generations_used: int
    fitness_trace: list[float]
    converged: bool
    seed: int
    config: EvolveConfig | None = None
    lengths_tried: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "chromosome": json.loads(self.best.to_json()),
            "train_fitness": self.train_fitness,
            "validation_fitness": self.validation_fitness,
            "test_accuracy": self.test_accuracy,
            "entropy": self.entropy,
            "gate_count": self.gate_count,
            "generations_used": self.generations_used,
            "fitness_trace": self.fitness_trace,
            "converged": self.converged,
            "seed": self.seed,
            "config": None if self.config is None else self.config.to_dict(),
            "lengths_tried": self.lengths_tried,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, d: dict) -> "EvolveResult":
        cfg = d.get("config")
        return cls(
            best=Chromosome.from_json(d["chromosome"]),
            train_fitness=d["train_fitness"],
            validation_fitness=d["validation_fitness"],
            test_accuracy=d["test_accuracy"],
            entropy=d["entropy"],
            gate_count=d["gate_count"],
            generations_used=d["generations_used"],
            fitness_trace=list(d["fitness_trace"]),
            converged=d["converged"],
            seed=d["seed"],
            config=None if cfg is None else EvolveConfig(**cfg),
            lengths_tried=list(d.get("lengths_tried", [])),
        )


def _rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


def mutation_mask(length: int, mutation_prob: float, rng: np.random.Generator) -> np.ndarray:
    return rng.random(length) < mutation_prob


def mutate(parent: Chromosome, mutation_prob: float, n_features: int, rng: np.random.Generator) -> Chromosome:
    """Resample each gene independently with probability ``mutation_prob``; the parent is untouched."""
    mask = mutation_mask(len(parent), mutation_prob, rng)
    genes = tuple(
        random_gene(parent.n_qubits, n_features, rng) if hit else g for g, hit in zip(parent.genes, mask)
    )
    return Chromosome(genes, parent.n_qubits)


# -- fitness -------------------------------------------------------------------

def train_qsvm(chromosome: Chromosome, train: Dataset, svm_c: float = 1.0):
    """Train a one-vs-rest QSVM on the circuit's fidelity kernel; returns the model and training states."""
    states = encode_batch(chromosome, train.X)
    model = svm.train_multiclass(kernels.fidelity_gram(states), train.y, svm_c)
    return model, states


def qsvm_accuracy(chromosome: Chromosome, model, train_states: np.ndarray, data: Dataset) -> float:
    K = kernels.fidelity_gram(encode_batch(chromosome, data.X), train_states)
    return svm.accuracy(svm.predict(model, K), data.y)


def fitness_supervised(chromosome: Chromosome, train: Dataset, svm_c: float = 1.0) -> float:
    """Training-set accuracy of a QSVM on the circuit's kernel; 0 when evaluation fails."""
    try:
        model, states = train_qsvm(chromosome, train, svm_c)
        K = kernels.fidelity_gram(states)
        return svm.accuracy(svm.predict(model, K), train.y)
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        log.debug("fitness evaluation failed: %s", exc)
        return 0.0


def fitness_unsupervised(chromosome: Chromosome, X) -> float:
    """Largest normalized eigenvalue of the training Gram matrix; takes features only."""
    try:
        return kernels.max_normalized_eigenvalue(kernels.quantum_kernel(chromosome, X))
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        log.debug("fitness evaluation failed: %s", exc)
        return 0.0


class _Scorer:
    def __init__(self, config: EvolveConfig, splits: Splits):
        self.config = config
        self.splits = splits
        self.supervised = config.technique is Technique.SUPERVISED

    def train(self, c: Chromosome) -> float:
        if self.supervised:
            return fitness_supervised(c, self.splits.train, self.config.svm_c)
        return fitness_unsupervised(c, self.splits.train.X)

    def validation(self, c: Chromosome) -> float:
        if not self.supervised:
            return fitness_unsupervised(c, self.splits.validation.X)
        try:
            model, states = train_qsvm(c, self.splits.train, self.config.svm_c)
            return qsvm_accuracy(c, model, states, self.splits.validation)
        except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            log.debug("validation evaluation failed: %s", exc)
            return 0.0


def evaluate_final(chromosome: Chromosome, splits: Splits, svm_c: float = 1.0) -> tuple[float, float]:
    """Test accuracy of a QSVM trained on the training split, and the training-split entropy."""
    try:
        model, states = train_qsvm(chromosome, splits.train, svm_c)
        acc = qsvm_accuracy(chromosome, model, states, splits.test)
    except (ValueError, ArithmeticError, np.linalg.LinAlgError):
        acc = 0.0
    return acc, kernels.entanglement_entropy(chromosome, splits.train.X)


def _dims(config: EvolveConfig, splits: Splits) -> tuple[int, int]:
    n_features = splits.train.n_features
    return (config.n_qubits or n_features), n_features


def evolve_fixed_length(config: EvolveConfig, n_genes: int, splits: Splits, attempt: int = 0) -> EvolveResult:
    """Run the elitist loop at a fixed gene count.

    Always runs at least one generation. Stops once the incumbent's validation
    fitness reaches the target (or, without a target, after ``patience``
    generations without strict improvement), or after ``max_generations``.
    """
    n_qubits, n_features = _dims(config, splits)
    scorer = _Scorer(config, splits)
    target = config.target
    incumbent = random_chromosome(n_genes, n_qubits, n_features, _rng(config.seed, attempt, 0, 0))
    best_val = 0.0
    trace: list[float] = []
    stale = 0
    converged = False
    pool = ThreadPoolExecutor(config.workers) if config.workers > 1 else None
    try:
        for gen in range(1, config.max_generations + 1):
            mutants = [
                mutate(incumbent, config.mutation_prob, n_features, _rng(config.seed, attempt, gen, i))
                for i in range(config.population_size)
            ]
            scores = list(pool.map(scorer.train, mutants) if pool else map(scorer.train, mutants))
            champion = mutants[int(np.argmax(scores))]
            val = scorer.validation(champion)
            if val > best_val:
                stale = 0
            else:
                stale += 1
            if val >= best_val:
                incumbent, best_val = champion, val
            trace.append(best_val)
            if target is not None and best_val >= target:
                converged = True
                break
            if target is None and stale >= config.patience:
                converged = True
                break
    finally:
        if pool:
            pool.shutdown()
    test_acc, entropy = evaluate_final(incumbent, splits, config.svm_c)
    return EvolveResult(
        best=incumbent,
        train_fitness=scorer.train(incumbent),
        validation_fitness=best_val,
        test_accuracy=test_acc,
        entropy=entropy,
        gate_count=gate_count(incumbent),
        generations_used=len(trace),
        fitness_trace=trace,
        converged=converged,
        seed=config.seed,
        config=config,
    )


def evolve(config: EvolveConfig, splits: Splits) -> EvolveResult:
    """Search for the shortest circuit reaching the target fitness.

    The bracket starts at ``[0, inf)``; a success at length ``L`` sets the upper
    end to ``L`` and a failure sets the lower end. While the upper end is open
    the length doubles (up to ``max_genes``); afterwards it bisects until the
    bracket is narrower than the qubit count. Returns the shortest success, or
    the best-validation attempt flagged ``converged=False``.
    """
    n_qubits, _ = _dims(config, splits)
    length = config.initial_genes or 2 * n_qubits
    lo, hi = 0, None
    tried: list[dict] = []
    successes: dict[int, EvolveResult] = {}
    fallback: EvolveResult | None = None
    while True:
        res = evolve_fixed_length(config, length, splits, attempt=len(tried))
        tried.append({"genes": length, "success": res.converged, "validation_fitness": res.validation_fitness,
                      "generations": res.generations_used})
        log.info("genes=%d success=%s validation=%.4f", length, res.converged, res.validation_fitness)
        if res.converged:
            successes[length] = res
            hi = length
        else:
            lo = length
            if fallback is None or res.validation_fitness > fallback.validation_fitness:
                fallback = res
        if hi is None:
            nxt = 2 * length
            if nxt > config.max_genes:
                break
        else:
            if hi - lo < n_qubits:
                break
            nxt = (lo + hi) // 2
            if nxt <= lo or nxt >= hi:
                break
        length = nxt
    out = successes[min(successes)] if successes else fallback
    out = replace(out, lengths_tried=tried, generations_used=sum(t["generations"] for t in tried))
    return out


@dataclass
class BenchmarkSummary:
    results: list[EvolveResult]
    mean_accuracy: float
    std_accuracy: float
    mean_entropy: float
    std_entropy: float
    mean_gates: float


def summarize(accs, ents, gates=None) -> dict:
    accs, ents = np.asarray(accs, dtype=float), np.asarray(ents, dtype=float)
    out = {
        "n": int(len(accs)),
        "mean_accuracy": float(accs.mean()),
        "std_accuracy": float(accs.std()),
        "mean_entropy": float(ents.mean()),
        "std_entropy": float(ents.std()),
    }
    if gates is not None:
        out["mean_gates"] = float(np.mean(gates))
    return out


def run_benchmark(config: EvolveConfig, data: Dataset, repeats: int = 10, **preprocess_kwargs) -> BenchmarkSummary:
    """Independent runs with seeds ``config.seed + i``; each re-splits the data with its own seed."""
    from .data import preprocess

    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    results = []
    for i in range(repeats):
        cfg = replace(config, seed=config.seed + i)
        pre = preprocess(data, seed=cfg.seed, **preprocess_kwargs)
        results.append(evolve(cfg, pre.splits))
    s = summarize([r.test_accuracy for r in results], [r.entropy for r in results], [r.gate_count for r in results])
    return BenchmarkSummary(results, s["mean_accuracy"], s["std_accuracy"], s["mean_entropy"], s["std_entropy"],
                            s["mean_gates"])
