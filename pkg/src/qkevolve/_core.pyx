# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: batched circuit application and the SMO dual solver.

Semantics mirror ``qkevolve._fallback`` exactly; the test suite checks both.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, INFINITY

cnp.import_array()

cdef double TAU = 1e-12


def apply_circuit(double complex[:, ::1] states,
                  const long[::1] kinds,
                  const long[::1] targets,
                  const long[::1] controls,
                  const long[::1] features,
                  const double[::1] scales,
                  const double[:, ::1] X):
    cdef Py_ssize_t n_rows = states.shape[0]
    cdef Py_ssize_t dim = states.shape[1]
    cdef Py_ssize_t g, r, k, i0, i1, bit, cbit
    cdef double complex a0, a1, p0, p1
    cdef double complex h0 = 0.5 + 0.5j
    cdef double complex h1 = 0.5 - 0.5j
    cdef double half
    with nogil:
        for g in range(kinds.shape[0]):
            bit = (<Py_ssize_t> 1) << targets[g]
            if kinds[g] == 0:
                for r in range(n_rows):
                    for k in range(dim):
                        if k & bit == 0:
                            i1 = k | bit
                            a0 = states[r, k]
                            states[r, k] = states[r, i1]
                            states[r, i1] = a0
            elif kinds[g] == 1:
                for r in range(n_rows):
                    for k in range(dim):
                        if k & bit == 0:
                            i1 = k | bit
                            a0 = states[r, k]
                            a1 = states[r, i1]
                            states[r, k] = h0 * a0 + h1 * a1
                            states[r, i1] = h1 * a0 + h0 * a1
            elif kinds[g] == 2:
                for r in range(n_rows):
                    half = 0.5 * scales[g] * X[r, features[g]]
                    p0 = cos(half) - 1j * sin(half)
                    p1 = cos(half) + 1j * sin(half)
                    for k in range(dim):
                        if k & bit == 0:
                            states[r, k] = states[r, k] * p0
                        else:
                            states[r, k] = states[r, k] * p1
            else:
                cbit = (<Py_ssize_t> 1) << controls[g]
                for r in range(n_rows):
                    for k in range(dim):
                        if (k & cbit) != 0 and (k & bit) == 0:
                            i1 = k | bit
                            a0 = states[r, k]
                            states[r, k] = states[r, i1]
                            states[r, i1] = a0
    return np.asarray(states)


def smo_solve(const double[:, ::1] K, const double[::1] y, double C, double tol, long max_iter):
    """Same contract as ``qkevolve._fallback.smo_solve``."""
    cdef Py_ssize_t n = y.shape[0]
    alpha_arr = np.zeros(n)
    G_arr = -np.ones(n)
    cdef double[::1] alpha = alpha_arr
    cdef double[::1] G = G_arr
    cdef Py_ssize_t t, i, j
    cdef long it = 0
    cdef double gmax, gmin, score, grad_diff, quad, obj, obj_min
    cdef double yi, yj, Qij, ai, aj, old_i, old_j, delta, diff, total, dai, daj
    cdef bint up, low
    with nogil:
        while it < max_iter:
            gmax = -INFINITY
            i = -1
            for t in range(n):
                up = alpha[t] < C if y[t] > 0 else alpha[t] > 0
                if up:
                    score = -y[t] * G[t]
                    if score >= gmax:
                        gmax = score
                        i = t
            if i < 0:
                break
            gmin = INFINITY
            j = -1
            obj_min = INFINITY
            for t in range(n):
                low = alpha[t] > 0 if y[t] > 0 else alpha[t] < C
                if low:
                    score = -y[t] * G[t]
                    if score < gmin:
                        gmin = score
                    grad_diff = gmax - score
                    if grad_diff > 0:
                        quad = K[i, i] + K[t, t] - 2.0 * K[i, t]
                        if quad <= 0:
                            quad = TAU
                        obj = -(grad_diff * grad_diff) / quad
                        if obj <= obj_min:
                            obj_min = obj
                            j = t
            if gmin == INFINITY or gmax - gmin < tol or j < 0:
                break
            yi = y[i]
            yj = y[j]
            Qij = yi * yj * K[i, j]
            ai = alpha[i]
            aj = alpha[j]
            old_i = ai
            old_j = aj
            if yi != yj:
                quad = K[i, i] + K[j, j] + 2.0 * Qij
                if quad <= 0:
                    quad = TAU
                delta = (-G[i] - G[j]) / quad
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
                quad = K[i, i] + K[j, j] - 2.0 * Qij
                if quad <= 0:
                    quad = TAU
                delta = (G[i] - G[j]) / quad
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
            alpha[i] = ai
            alpha[j] = aj
            dai = ai - old_i
            daj = aj - old_j
            for t in range(n):
                G[t] += yi * y[t] * K[i, t] * dai + yj * y[t] * K[j, t] * daj
            it += 1
    return alpha_arr, G_arr, it
