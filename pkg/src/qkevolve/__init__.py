"""Genetic search over quantum-kernel encoding circuits for kernel SVMs."""
from ._backend import NAME as BACKEND
from .circuit import Chromosome, ChromosomeError, GateKind, Gene, encode, encode_batch, gate_count, random_gene

__all__ = [
    "BACKEND",
    "Chromosome",
    "ChromosomeError",
    "GateKind",
    "Gene",
    "encode",
    "encode_batch",
    "gate_count",
    "random_gene",
]
__version__ = "0.1.0"
