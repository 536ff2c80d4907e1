"""Fidelity, PauliZZ and RBF kernels plus the two kernel diagnostics."""
from __future__ import annotations

from functools import reduce

import numpy as np

from .circuit import Chromosome, encode_batch

_H = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)


def _as_matrix(X) -> np.ndarray:
    return np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=np.float64)))


def _pair(A, B):
    A = _as_matrix(A)
    same = B is None or B is A
    B = A if same else _as_matrix(B)
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"feature dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    return A, B, same


def fidelity_gram(states_a: np.ndarray, states_b: np.ndarray | None = None) -> np.ndarray:
    """``|<a_i|b_j>|^2`` for two stacks of statevectors (rows)."""
    if states_b is None:
        overlap = states_a.conj() @ states_a.T
        K = overlap.real**2 + overlap.imag**2
        return 0.5 * (K + K.T)
    overlap = states_a.conj() @ states_b.T
    return overlap.real**2 + overlap.imag**2


def quantum_kernel(chromosome: Chromosome, A, B=None) -> np.ndarray:
    """Fidelity kernel of the circuit; rows index ``A``, columns index ``B``."""
    A, B, same = _pair(A, B)
    sa = encode_batch(chromosome, A)
    if same:
        return fidelity_gram(sa)
    return fidelity_gram(sa, encode_batch(chromosome, B))


def pauli_zz_states(X, reps: int = 2) -> np.ndarray:
    """Statevectors of the second-order ZZ feature map, one qubit per feature.

    Each repetition applies H on every qubit, then the diagonal phase
    ``exp(i * (sum_j 2 x_j b_j + sum_j 2 (pi - x_j)(pi - x_{j+1}) (b_j xor b_{j+1})))``
    over basis bits ``b``, i.e. P(2x_j) on each qubit followed by CX-P-CX on
    the linear chain of neighbouring pairs.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    X = _as_matrix(X)
    n_rows, n = X.shape
    dim = 1 << n
    bits = (np.arange(dim)[:, None] >> np.arange(n)[None, :]) & 1  # (dim, n)
    phase = 2.0 * X @ bits.T  # (rows, dim)
    for j in range(n - 1):
        parity = bits[:, j] ^ bits[:, j + 1]
        coeff = 2.0 * (np.pi - X[:, j]) * (np.pi - X[:, j + 1])
        phase += coeff[:, None] * parity[None, :]
    diag = np.exp(1j * phase)
    hadamard = reduce(np.kron, [_H] * n)
    states = np.zeros((n_rows, dim), dtype=np.complex128)
    states[:, 0] = 1.0
    for _ in range(reps):
        states = diag * (states @ hadamard)
    return states


def pauli_zz_kernel(A, B=None, reps: int = 2) -> np.ndarray:
    A, B, same = _pair(A, B)
    sa = pauli_zz_states(A, reps)
    if same:
        return fidelity_gram(sa)
    return fidelity_gram(sa, pauli_zz_states(B, reps))


def default_rbf_gamma(X_train) -> float:
    """``1 / (m * Var(X))``, falling back to 1.0 for constant data."""
    X = _as_matrix(X_train)
    var = X.var()
    return 1.0 / (X.shape[1] * var) if var > 0 else 1.0


def rbf_kernel(A, B=None, gamma: float | None = None) -> np.ndarray:
    A, B, same = _pair(A, B)
    if gamma is None:
        gamma = default_rbf_gamma(A)
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    K = np.exp(-gamma * np.maximum(sq, 0.0))
    if same:
        K = 0.5 * (K + K.T)
        np.fill_diagonal(K, 1.0)
    return K


def max_normalized_eigenvalue(K, atol: float = 1e-8) -> float:
    """Largest eigenvalue of a square symmetric kernel matrix divided by its size."""
    K = np.asarray(K, dtype=np.float64)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError("kernel matrix must be square")
    if not np.allclose(K, K.T, rtol=0.0, atol=atol):
        raise ValueError("kernel matrix is not symmetric")
    w = np.linalg.eigvalsh(0.5 * (K + K.T))
    return float(w[-1] / K.shape[0])


def single_qubit_entropies(states: np.ndarray, n_qubits: int) -> np.ndarray:
    """Von Neumann entropy (nats) of every single-qubit reduced state, shape ``(rows, n_qubits)``."""
    states = np.atleast_2d(states)
    n_rows, dim = states.shape
    out = np.empty((n_rows, n_qubits))
    for q in range(n_qubits):
        v = states.reshape(n_rows, dim >> (q + 1), 2, 1 << q)
        a0 = v[:, :, 0, :].reshape(n_rows, -1)
        a1 = v[:, :, 1, :].reshape(n_rows, -1)
        p0 = (np.abs(a0) ** 2).sum(1)
        p1 = (np.abs(a1) ** 2).sum(1)
        coh = (a0 * a1.conj()).sum(1)
        # eigenvalues of [[p0, coh], [coh*, p1]]
        mean = 0.5 * (p0 + p1)
        rad = np.sqrt(0.25 * (p0 - p1) ** 2 + np.abs(coh) ** 2)
        lam = np.clip(np.stack([mean + rad, mean - rad], axis=1), 0.0, None)
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(lam > 0, -lam * np.log(lam), 0.0)
        out[:, q] = terms.sum(1)
    return out


def state_entropy(states: np.ndarray, n_qubits: int) -> float:
    """Per-qubit mean entropy averaged over the given states."""
    return float(single_qubit_entropies(states, n_qubits).mean())


def entanglement_entropy(chromosome: Chromosome, X) -> float:
    X = _as_matrix(X)
    if X.shape[0] == 0:
        raise ValueError("need at least one datapoint")
    return state_entropy(encode_batch(chromosome, X), chromosome.n_qubits)


def pauli_zz_entropy(X, reps: int = 2) -> float:
    X = _as_matrix(X)
    return state_entropy(pauli_zz_states(X, reps), X.shape[1])


def save_kernel_csv(path, K) -> None:
    """Full matrix, row-major, 17 significant digits."""
    np.savetxt(path, np.asarray(K, dtype=np.float64), delimiter=",", fmt="%.17g")


def load_kernel_csv(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=np.float64))
