"""Numpy implementations of the hot kernels, used when ``_core`` is not built."""
import numpy as np

_SQRT_X = 0.5 * np.array([[1 + 1j, 1 - 1j], [1 - 1j, 1 + 1j]])
_TAU = 1e-12


def apply_circuit(states, kinds, targets, controls, features, scales, X):
    """Apply the gene arrays to a batch of statevectors, in place."""
    n_rows, dim = states.shape
    for kind, t, c, f, s in zip(kinds, targets, controls, features, scales):
        # view as (row, high bits, target bit, low bits)
        v = states.reshape(n_rows, dim >> (t + 1), 2, 1 << t)
        if kind == 0:
            v[:, :, [0, 1], :] = v[:, :, [1, 0], :]
        elif kind == 1:
            a0 = v[:, :, 0, :].copy()
            a1 = v[:, :, 1, :]
            v[:, :, 0, :] = _SQRT_X[0, 0] * a0 + _SQRT_X[0, 1] * a1
            v[:, :, 1, :] = _SQRT_X[1, 0] * a0 + _SQRT_X[1, 1] * a1
        elif kind == 2:
            half = 0.5 * s * X[:, f]
            v[:, :, 0, :] *= np.exp(-1j * half)[:, None, None]
            v[:, :, 1, :] *= np.exp(1j * half)[:, None, None]
        else:
            idx = np.arange(dim)
            sel = idx[((idx >> c) & 1 == 1) & ((idx >> t) & 1 == 0)]
            partner = sel | (1 << t)
            states[:, sel], states[:, partner] = states[:, partner], states[:, sel].copy()
    return states


def smo_solve(K, y, C, tol, max_iter):
    """Dual soft-margin SVM by SMO with second-order working-set selection.

    Minimizes ``0.5 a^T Q a - sum(a)`` with ``Q = yy^T * K`` subject to
    ``0 <= a <= C`` and ``y^T a = 0``. Returns ``(alpha, gradient, iterations)``.
    """
    n = len(y)
    Q = (y[:, None] * y[None, :]) * K
    QD = np.diag(Q).copy()
    alpha = np.zeros(n)
    G = -np.ones(n)
    pos = y > 0
    it = 0
    while it < max_iter:
        up = np.where(pos, alpha < C, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < C)
        if not up.any() or not low.any():
            break
        score = -y * G
        i = _last_argmax(score, up)
        gmax = score[i]
        gmin = score[low].min()
        if gmax - gmin < tol:
            break
        grad_diff = gmax - score
        cand = low & (grad_diff > 0)
        if not cand.any():
            break
        quad = QD[i] + QD - 2.0 * y[i] * y * Q[i]
        quad = np.where(quad > 0, quad, _TAU)
        obj = np.where(cand, -(grad_diff * grad_diff) / quad, np.inf)
        j = _last_argmin(obj, cand)
        ai, aj = _pair_update(alpha[i], alpha[j], y[i], y[j], G[i], G[j], QD[i], QD[j], Q[i, j], C)
        dai, daj = ai - alpha[i], aj - alpha[j]
        alpha[i], alpha[j] = ai, aj
        G += Q[i] * dai + Q[j] * daj
        it += 1
    return alpha, G, it


def _last_argmax(score, mask):
    # ties go to the highest index, matching the compiled core's ">=" scan
    idx = np.flatnonzero(mask)
    vals = score[idx]
    return int(idx[len(vals) - 1 - np.argmax(vals[::-1])])


def _last_argmin(obj, mask):
    idx = np.flatnonzero(mask)
    vals = obj[idx]
    return int(idx[len(vals) - 1 - np.argmin(vals[::-1])])


def _pair_update(ai, aj, yi, yj, Gi, Gj, Qii, Qjj, Qij, C):
    if yi != yj:
        quad = Qii + Qjj + 2.0 * Qij
        if quad <= 0:
            quad = _TAU
        delta = (-Gi - Gj) / quad
        diff = ai - aj
        ai += delta
        aj += delta
        if diff > 0:
            if aj < 0:
                aj = 0.0
                ai = diff
        elif ai < 0:
            ai = 0.0
            aj = -diff
        if diff > 0:
            if ai > C:
                ai = C
                aj = C - diff
        elif aj > C:
            aj = C
            ai = C + diff
    else:
        quad = Qii + Qjj - 2.0 * Qij
        if quad <= 0:
            quad = _TAU
        delta = (Gi - Gj) / quad
        total = ai + aj
        ai -= delta
        aj += delta
        if total > C:
            if ai > C:
                ai = C
                aj = total - C
        elif aj < 0:
            aj = 0.0
            ai = total
        if total > C:
            if aj > C:
                aj = C
                ai = total - C
        elif ai < 0:
            ai = 0.0
            aj = total
    return ai, aj
