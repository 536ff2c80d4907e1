"""Soft-margin kernel SVM trained in the dual on precomputed kernels.

Binary models solve

    max_a  sum(a) - 1/2 sum_ij a_i a_j y_i y_j K_ij
    s.t.   0 <= a_i <= C,  sum_i a_i y_i = 0

by SMO; multiclass models are one-vs-rest and predict by the fusion rule
(argmax of per-class decision values, even when all are negative).
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np

from . import _backend

KKT_TOL = 1e-3
MAX_ITER = 100_000
PSD_TOL = 1e-8


@dataclass(frozen=True)
class SvmModel:
    alphas: np.ndarray
    bias: float
    labels: np.ndarray
    C: float
    iterations: int = 0

    @property
    def support_indices(self) -> np.ndarray:
        return np.flatnonzero(self.alphas > 0)

    @property
    def coef(self) -> np.ndarray:
        return self.alphas * self.labels

    def to_dict(self, class_label=None) -> dict:
        return {
            "class": class_label,
            "alphas": self.alphas.tolist(),
            "labels": self.labels.astype(int).tolist(),
            "bias": self.bias,
            "support_indices": self.support_indices.tolist(),
            "C": self.C,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SvmModel":
        return cls(
            alphas=np.asarray(d["alphas"], dtype=np.float64),
            bias=float(d["bias"]),
            labels=np.asarray(d["labels"], dtype=np.float64),
            C=float(d["C"]),
        )


@dataclass(frozen=True)
class MulticlassModel:
    classes: tuple[int, ...]
    models: tuple[SvmModel, ...]

    @property
    def per_class(self) -> list[tuple[int, SvmModel]]:
        return list(zip(self.classes, self.models))

    def to_json(self) -> str:
        return json.dumps([m.to_dict(int(c)) for c, m in self.per_class])

    @classmethod
    def from_json(cls, text: str) -> "MulticlassModel":
        items = json.loads(text)
        return cls(tuple(int(d["class"]) for d in items), tuple(SvmModel.from_dict(d) for d in items))


def _clip_psd(K: np.ndarray) -> np.ndarray:
    try:
        # succeeds whenever the smallest eigenvalue exceeds -PSD_TOL, up to roundoff
        np.linalg.cholesky(K + PSD_TOL * np.eye(K.shape[0]))
        return K
    except np.linalg.LinAlgError:
        pass
    w, V = np.linalg.eigh(K)
    if w[0] >= -PSD_TOL:
        return K
    warnings.warn(f"kernel matrix is not PSD (min eigenvalue {w[0]:.3g}); clipping negative eigenvalues")
    K = (V * np.clip(w, 0.0, None)) @ V.T
    return 0.5 * (K + K.T)


def _bias(alpha, G, y, C) -> float:
    # y_i G_i = f(x_i) - b - y_i, so b = -y_i G_i on any free support vector
    yG = y * G
    free = (alpha > 0) & (alpha < C)
    if free.any():
        return float(-yG[free].mean()) + 0.0
    at_upper = alpha >= C
    lower = np.where(y > 0, at_upper, ~at_upper)  # entries bounding -b from below
    lb = yG[lower].max() if lower.any() else -np.inf
    ub = yG[~lower].min() if (~lower).any() else np.inf
    if not np.isfinite(lb):
        lb = ub
    if not np.isfinite(ub):
        ub = lb
    return float(-(lb + ub) / 2.0) + 0.0


def train_binary(
    K, y, C: float = 1.0, tol: float = KKT_TOL, max_iter: int = MAX_ITER, check_psd: bool = True
) -> SvmModel:
    """Fit a binary soft-margin SVM on the training self-Gram matrix ``K``.

    ``y`` holds labels in {-1, +1} with both classes present. A kernel with an
    eigenvalue below -1e-8 triggers a warning and is projected onto the PSD cone.
    """
    K = np.ascontiguousarray(K, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n = len(y)
    if K.shape != (n, n):
        raise ValueError(f"kernel shape {K.shape} does not match {n} labels")
    if not np.all((y == 1.0) | (y == -1.0)):
        raise ValueError("binary labels must be -1 or +1")
    if not ((y > 0).any() and (y < 0).any()):
        raise ValueError("training labels contain a single class")
    if C <= 0:
        raise ValueError("C must be positive")
    K = 0.5 * (K + K.T)
    if check_psd:
        K = _clip_psd(K)
    alpha, G, it = _backend.smo_solve(np.ascontiguousarray(K), y, C, tol, max_iter)
    alpha = np.asarray(alpha)
    return SvmModel(alphas=alpha, bias=_bias(alpha, np.asarray(G), y, C), labels=y.copy(), C=float(C), iterations=int(it))


def decision_function(model: SvmModel, K_test) -> np.ndarray:
    """``f(x) = sum_i a_i y_i K(x_i, x) + b``; rows of ``K_test`` are queries, columns training points."""
    K_test = np.atleast_2d(np.asarray(K_test, dtype=np.float64))
    if K_test.shape[1] != len(model.alphas):
        raise ValueError(f"kernel has {K_test.shape[1]} columns, model was trained on {len(model.alphas)} points")
    return K_test @ model.coef + model.bias


def dual_objective(model: SvmModel, K) -> float:
    c = model.coef
    return float(model.alphas.sum() - 0.5 * c @ np.asarray(K) @ c)


def kkt_violation(model: SvmModel, K) -> float:
    """Largest violation of the soft-margin KKT conditions, in decision-value units."""
    margin = model.labels * decision_function(model, K)
    a, C = model.alphas, model.C
    viol = np.where(a <= 0, np.maximum(0.0, 1.0 - margin),
                    np.where(a >= C, np.maximum(0.0, margin - 1.0), np.abs(margin - 1.0)))
    return float(viol.max())


def train_multiclass(K, y, C: float = 1.0, **kwargs) -> MulticlassModel:
    """One binary model per class, class ``c`` against the rest."""
    y = np.asarray(y)
    classes = tuple(int(c) for c in np.unique(y))
    if len(classes) < 2:
        raise ValueError("need at least two classes")
    K = np.asarray(K, dtype=np.float64)
    if K.shape != (len(y), len(y)):
        raise ValueError(f"kernel shape {K.shape} does not match {len(y)} labels")
    K = _clip_psd(0.5 * (K + K.T))
    models = tuple(train_binary(K, np.where(y == c, 1.0, -1.0), C, check_psd=False, **kwargs) for c in classes)
    return MulticlassModel(classes, models)


def decision_matrix(model: MulticlassModel, K_test) -> np.ndarray:
    return np.stack([decision_function(m, K_test) for m in model.models], axis=1)


def predict(model: MulticlassModel, K_test) -> np.ndarray:
    # argmax returns the first maximum, so ties go to the smallest class label
    scores = decision_matrix(model, K_test)
    return np.asarray(model.classes)[np.argmax(scores, axis=1)]


def accuracy(predicted, truth) -> float:
    predicted, truth = np.asarray(predicted), np.asarray(truth)
    if predicted.shape != truth.shape:
        raise ValueError("length mismatch")
    if predicted.size == 0:
        raise ValueError("empty label vectors")
    return float(np.mean(predicted == truth))
