import numpy as np
import pytest

from qkevolve import _backend, kernels, svm
from qkevolve.data import make_xor

from oracles import brute_argmax, qp_dual


def _random_instance(rng, n=None):
    n = n or int(rng.integers(4, 13))
    X = rng.normal(size=(n, 2))
    y = np.where(X[:, 0] + 0.5 * rng.normal(size=n) > 0, 1.0, -1.0)
    y[0], y[1] = 1.0, -1.0
    kind = rng.integers(3)
    if kind == 0:
        K = X @ X.T
    elif kind == 1:
        K = kernels.rbf_kernel(X, gamma=float(rng.uniform(0.2, 2.0)))
    else:
        K = (1 + X @ X.T) ** 2
    return K, y, float(rng.choice([0.5, 1.0, 10.0]))


def test_two_point_closed_form():
    m = svm.train_binary(np.eye(2), [1, -1], C=10)
    assert np.allclose(m.alphas, [1.0, 1.0], atol=1e-9)
    assert m.bias == pytest.approx(0.0, abs=1e-9)
    assert np.allclose(svm.decision_function(m, np.eye(2)), [1.0, -1.0], atol=1e-9)
    assert svm.decision_function(m, np.eye(2)[:1])[0] == pytest.approx(1.0)


def test_linear_toy_matches_oracle():
    X = np.array([[2.0, 2.0], [3.0, 1.5], [-1.0, -2.0], [-2.0, -0.5]])
    y = np.array([1.0, 1.0, -1.0, -1.0])
    K = X @ X.T
    m = svm.train_binary(K, y, C=100.0)
    a_ref, obj_ref = qp_dual(K, y, 100.0)
    assert np.allclose(m.alphas, a_ref, atol=1e-3)
    assert svm.dual_objective(m, K) == pytest.approx(obj_ref, abs=1e-4)


def test_duplicate_rows():
    X = np.array([[1.0, 0.0], [1.0, 0.0], [-1.0, 0.2], [-1.0, 0.2], [0.2, 1.0]])
    y = np.array([1.0, 1.0, -1.0, -1.0, 1.0])
    K = kernels.rbf_kernel(X, gamma=1.0)
    m = svm.train_binary(K, y, C=1.0)
    assert abs(m.alphas @ y) <= 1e-6
    assert svm.dual_objective(m, K) == pytest.approx(qp_dual(K, y, 1.0)[1], abs=1e-4)


@pytest.mark.parametrize("backend", ["numpy", "compiled"])
def test_oracle_equivalence_and_kkt(backend):
    if backend == "compiled" and _backend.NAME != "compiled":
        pytest.skip("compiled core not built")
    old = _backend.NAME
    _backend.use(backend)
    try:
        rng = np.random.default_rng(99)
        for _ in range(25):
            K, y, C = _random_instance(rng)
            m = svm.train_binary(K, y, C)
            assert np.all(m.alphas >= 0) and np.all(m.alphas <= C)
            assert abs(m.alphas @ y) <= 1e-6
            assert svm.kkt_violation(m, K) <= 1e-3
            assert svm.dual_objective(m, K) == pytest.approx(qp_dual(K, y, C)[1], abs=1e-4)
    finally:
        _backend.use(old)


def test_support_vector_decision_is_label():
    rng = np.random.default_rng(3)
    K, y, _ = _random_instance(rng, 10)
    m = svm.train_binary(K, y, C=1e3)
    f = svm.decision_function(m, K)
    free = (m.alphas > 1e-6) & (m.alphas < m.C - 1e-6)
    assert free.any()
    assert np.allclose(f[free], y[free], atol=1e-3)


def test_zero_alphas_give_bias():
    m = svm.SvmModel(alphas=np.zeros(3), bias=0.25, labels=np.array([1.0, -1.0, 1.0]), C=1.0)
    assert np.allclose(svm.decision_function(m, np.ones((4, 3))), 0.25)


def test_errors():
    with pytest.raises(ValueError):
        svm.train_binary(np.eye(3), [1, 1, 1])
    with pytest.raises(ValueError):
        svm.train_binary(np.eye(2), [1, -1], C=0)
    m = svm.train_binary(np.eye(2), [1, -1])
    with pytest.raises(ValueError):
        svm.decision_function(m, np.ones((1, 3)))
    with pytest.raises(ValueError):
        svm.train_multiclass(np.eye(2), [0, 0])
    with pytest.raises(ValueError):
        svm.accuracy([1, 2], [1])


def test_non_psd_kernel_warns_and_trains():
    K = np.array([[1.0, 2.0], [2.0, 1.0]])
    with pytest.warns(UserWarning, match="not PSD"):
        m = svm.train_binary(K, [1, -1])
    assert np.all(m.alphas >= 0)


def test_two_class_multiclass_matches_binary_sign():
    rng = np.random.default_rng(12)
    for _ in range(20):
        K, y, C = _random_instance(rng)
        labels = (y > 0).astype(int)
        multi = svm.train_multiclass(K, labels, C)
        binary = svm.train_binary(K, np.where(labels == 1, 1.0, -1.0), C)
        Kq = K[: len(y) // 2]
        f = svm.decision_function(binary, Kq)
        pred = svm.predict(multi, Kq)
        decided = np.abs(f) > 1e-6
        assert np.array_equal(pred[decided], (f[decided] > 0).astype(int))


def test_three_blobs_rbf():
    rng = np.random.default_rng(0)
    centers = np.array([[0, 0], [4, 0], [2, 3.5]])
    X = np.vstack([c + 0.7 * rng.normal(size=(40, 2)) for c in centers])
    y = np.repeat([0, 1, 2], 40)
    perm = rng.permutation(120)
    X, y = X[perm], y[perm]
    tr, te = slice(0, 80), slice(80, 120)
    m = svm.train_multiclass(kernels.rbf_kernel(X[tr], gamma=0.5), y[tr], 1.0)
    acc = svm.accuracy(svm.predict(m, kernels.rbf_kernel(X[te], X[tr], 0.5)), y[te])
    assert acc >= 0.9


def test_fusion_rule_all_negative():
    models = tuple(svm.SvmModel(np.zeros(1), b, np.array([1.0]), 1.0) for b in (-3.0, -0.5, -2.0))
    mc = svm.MulticlassModel((0, 1, 2), models)
    assert svm.predict(mc, np.zeros((2, 1))).tolist() == [1, 1]


def test_fusion_tie_goes_to_smallest_label():
    models = tuple(svm.SvmModel(np.zeros(1), 0.0, np.array([1.0]), 1.0) for _ in range(2))
    mc = svm.MulticlassModel((4, 7), models)
    assert svm.predict(mc, np.zeros((1, 1))).tolist() == [4]


def test_predict_matches_exhaustive_argmax():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(30, 2))
    y = rng.integers(0, 3, 30)
    K = kernels.rbf_kernel(X, gamma=1.0)
    m = svm.train_multiclass(K, y, 1.0)
    Kq = kernels.rbf_kernel(rng.normal(size=(15, 2)), X, 1.0)
    scores = svm.decision_matrix(m, Kq)
    assert np.array_equal(svm.predict(m, Kq), brute_argmax(scores, m.classes))


def test_accuracy():
    assert svm.accuracy([0, 1, 1], [0, 1, 1]) == 1.0
    assert svm.accuracy([0, 1, 1], [1, 0, 0]) == 0.0


def test_permutation_equivariance():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(12, 2))
    y = np.where(X[:, 1] > 0, 1.0, -1.0)
    q = rng.normal(size=(5, 2))
    K = kernels.rbf_kernel(X, gamma=1.0)
    f = svm.decision_function(svm.train_binary(K, y, 1.0, tol=1e-10), kernels.rbf_kernel(q, X, 1.0))
    p = rng.permutation(12)
    Kp = kernels.rbf_kernel(X[p], gamma=1.0)
    fp = svm.decision_function(svm.train_binary(Kp, y[p], 1.0, tol=1e-10), kernels.rbf_kernel(q, X[p], 1.0))
    assert np.allclose(f, fp, atol=1e-8)


def test_model_json_roundtrip():
    d = make_xor(40, 0.2, seed=1)
    K = kernels.rbf_kernel(d.X, gamma=1.0)
    m = svm.train_multiclass(K, d.y, 1.0)
    back = svm.MulticlassModel.from_json(m.to_json())
    Kq = kernels.rbf_kernel(d.X[:7] + 0.1, d.X, 1.0)
    assert np.abs(svm.decision_matrix(m, Kq) - svm.decision_matrix(back, Kq)).max() <= 1e-12
    item = __import__("json").loads(m.to_json())[0]
    assert {"class", "alphas", "bias", "support_indices", "C"} <= set(item)
