"""Time the compiled core against the numpy fallback.

    python3 benchmarks/bench_backends.py [--repeat 5]

Both hot paths are measured on GA-sized inputs: batched circuit simulation
(192 rows) and the SMO solver on a 192-point fidelity Gram matrix. The script
also checks that both backends agree before reporting speedups.
"""
import argparse
import timeit

import numpy as np

from qkevolve import _backend, kernels, svm
from qkevolve.circuit import encode_batch, random_chromosome


def _cases(rng):
    X = rng.uniform(-np.pi / 2, np.pi / 2, (192, 2))
    y = np.where(X[:, 0] * X[:, 1] > 0, 1.0, -1.0)
    circuits = {
        "circuit 2q x 8 gates": random_chromosome(8, 2, 2, rng),
        "circuit 4q x 64 gates": random_chromosome(64, 4, 2, rng),
        "circuit 8q x 256 gates": random_chromosome(256, 8, 2, rng),
    }
    K = kernels.quantum_kernel(random_chromosome(12, 2, 2, rng), X)
    return X, y, circuits, K


def _time(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _backend.NAME != "compiled":
        raise SystemExit("compiled core not built; run `pip install -e . --no-build-isolation` first")
    X, y, circuits, K = _cases(np.random.default_rng(0))
    jobs = {name: (lambda c=c: encode_batch(c, X)) for name, c in circuits.items()}
    jobs["SMO 192 points, C=1"] = lambda: svm.train_binary(K, y, 1.0, check_psd=False)
    jobs["SMO 192 points, C=100"] = lambda: svm.train_binary(K, y, 100.0, check_psd=False)

    print(f"{'case':<26}{'compiled':>12}{'numpy':>12}{'speedup':>10}")
    for name, fn in jobs.items():
        timings, outputs = {}, {}
        for backend in ("compiled", "numpy"):
            _backend.use(backend)
            outputs[backend] = fn()
            timings[backend] = _time(fn, args.repeat)
        _backend.use("compiled")
        a, b = outputs["compiled"], outputs["numpy"]
        same = np.allclose(a, b, atol=1e-12) if isinstance(a, np.ndarray) else np.allclose(a.alphas, b.alphas)
        if not same:
            raise SystemExit(f"{name}: backends disagree")
        c, n = timings["compiled"], timings["numpy"]
        print(f"{name:<26}{c * 1e3:>10.2f}ms{n * 1e3:>10.2f}ms{n / c:>9.1f}x")


if __name__ == "__main__":
    main()
