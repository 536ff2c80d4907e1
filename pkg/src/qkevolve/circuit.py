"""Encoding circuits over the gate set {X, sqrt(X), Rz, CX} and their exact simulation.

Qubit 0 is the least significant bit of the amplitude index, so the basis
state ``|q_{n-1} ... q_1 q_0>`` sits at index ``sum(q_k << k)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Sequence

import numpy as np

from . import _backend


class ChromosomeError(ValueError):
    """A gene or chromosome violates its structural invariants."""


class GateKind(str, Enum):
    PAULI_X = "PauliX"
    SQRT_X = "SqrtX"
    RZ = "Rz"
    CX = "CX"


# integer codes shared with the compiled core
KIND_CODES = {GateKind.PAULI_X: 0, GateKind.SQRT_X: 1, GateKind.RZ: 2, GateKind.CX: 3}
_KINDS = tuple(KIND_CODES)


@dataclass(frozen=True)
class Gene:
    kind: GateKind
    target: int
    control: int | None = None
    feature: int | None = None
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", GateKind(self.kind))
        if self.target < 0:
            raise ChromosomeError(f"negative target qubit {self.target}")
        if (self.kind is GateKind.CX) != (self.control is not None):
            raise ChromosomeError("control qubit is required for CX and forbidden otherwise")
        if (self.kind is GateKind.RZ) != (self.feature is not None):
            raise ChromosomeError("feature index is required for Rz and forbidden otherwise")
        if self.control is not None and (self.control < 0 or self.control == self.target):
            raise ChromosomeError(f"invalid control qubit {self.control} for target {self.target}")
        if self.feature is not None and self.feature < 0:
            raise ChromosomeError(f"negative feature index {self.feature}")

    def max_qubit(self) -> int:
        return max(self.target, -1 if self.control is None else self.control)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "target": self.target,
            "control": self.control,
            "feature": self.feature,
            "scale": self.scale,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Gene":
        return cls(
            kind=GateKind(d["kind"]),
            target=int(d["target"]),
            control=None if d.get("control") is None else int(d["control"]),
            feature=None if d.get("feature") is None else int(d["feature"]),
            scale=float(d.get("scale", 1.0)),
        )


@dataclass(frozen=True)
class Chromosome:
    """An ordered, immutable gene list acting on ``n_qubits`` qubits."""

    genes: tuple[Gene, ...]
    n_qubits: int

    def __post_init__(self):
        object.__setattr__(self, "genes", tuple(self.genes))
        if self.n_qubits < 1:
            raise ChromosomeError("n_qubits must be positive")
        if not self.genes:
            raise ChromosomeError("a chromosome needs at least one gene")
        for g in self.genes:
            if g.max_qubit() >= self.n_qubits:
                raise ChromosomeError(f"gene {g} addresses a qubit outside [0, {self.n_qubits})")

    def __len__(self) -> int:
        return len(self.genes)

    def __add__(self, other: "Chromosome") -> "Chromosome":
        if other.n_qubits != self.n_qubits:
            raise ChromosomeError("cannot concatenate chromosomes of different width")
        return Chromosome(self.genes + other.genes, self.n_qubits)

    @property
    def n_features_required(self) -> int:
        feats = [g.feature for g in self.genes if g.feature is not None]
        return max(feats) + 1 if feats else 0

    @cached_property
    def arrays(self) -> tuple[np.ndarray, ...]:
        """Flat (kind, target, control, feature, scale) arrays for the simulation core."""
        kinds = np.array([KIND_CODES[g.kind] for g in self.genes], dtype=np.int64)
        targets = np.array([g.target for g in self.genes], dtype=np.int64)
        controls = np.array([-1 if g.control is None else g.control for g in self.genes], dtype=np.int64)
        features = np.array([-1 if g.feature is None else g.feature for g in self.genes], dtype=np.int64)
        scales = np.array([g.scale for g in self.genes], dtype=np.float64)
        return kinds, targets, controls, features, scales

    def to_json(self) -> str:
        return json.dumps({"n_qubits": self.n_qubits, "genes": [g.to_dict() for g in self.genes]})

    @classmethod
    def from_json(cls, text: str | dict) -> "Chromosome":
        d = json.loads(text) if isinstance(text, str) else text
        return cls(tuple(Gene.from_dict(g) for g in d["genes"]), int(d["n_qubits"]))


def gate_count(chromosome: Chromosome) -> int:
    return len(chromosome.genes)


def random_gene(n_qubits: int, n_features: int, rng: np.random.Generator) -> Gene:
    """Draw one gene uniformly: kind, then target, then control or feature."""
    if n_qubits < 1 or n_features < 1:
        raise ValueError("n_qubits and n_features must be >= 1")
    kinds = _KINDS if n_qubits > 1 else _KINDS[:3]
    kind = kinds[int(rng.integers(len(kinds)))]
    target = int(rng.integers(n_qubits))
    if kind is GateKind.CX:
        control = int(rng.integers(n_qubits - 1))
        if control >= target:
            control += 1
        return Gene(kind, target, control=control)
    if kind is GateKind.RZ:
        return Gene(kind, target, feature=int(rng.integers(n_features)))
    return Gene(kind, target)


def random_chromosome(n_genes: int, n_qubits: int, n_features: int, rng: np.random.Generator) -> Chromosome:
    return Chromosome(tuple(random_gene(n_qubits, n_features, rng) for _ in range(n_genes)), n_qubits)


def _check_features(chromosome: Chromosome, X: np.ndarray) -> np.ndarray:
    X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=np.float64)))
    if X.ndim != 2:
        raise ValueError("features must be a vector or a 2-D matrix")
    if X.shape[1] < chromosome.n_features_required:
        raise ValueError(
            f"chromosome reads feature {chromosome.n_features_required - 1} "
            f"but only {X.shape[1]} features were given"
        )
    if not np.all(np.isfinite(X)):
        raise ValueError("features must be finite")
    return X


def encode_batch(chromosome: Chromosome, X: np.ndarray) -> np.ndarray:
    """Statevectors ``U(x)|0...0>`` for every row of ``X``, shape ``(n_rows, 2**n_qubits)``."""
    X = _check_features(chromosome, X)
    states = np.zeros((X.shape[0], 1 << chromosome.n_qubits), dtype=np.complex128)
    states[:, 0] = 1.0
    _backend.apply_circuit(states, *chromosome.arrays, X)
    return states


def encode(chromosome: Chromosome, features: Sequence[float]) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 1:
        raise ValueError("encode takes a single feature vector; use encode_batch for matrices")
    return encode_batch(chromosome, features[None, :])[0]
