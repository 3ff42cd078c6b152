"""Compiled kernel-matrix loops.

Each matrix entry is computed independently (patch correlations followed by
the node recursion in topological order), so results do not depend on the
thread count.  With numba disabled these functions still run, but slowly;
:mod:`dagkernels.kernel` uses vectorized numpy paths instead.
"""
import math

import numpy as np

from ._accel import njit, prange


@njit(cache=True, inline="always")
def _act2(code, g, pc, row, t):
    """Dual value and derivative at ``t`` (one transcendental call)."""
    if code == 0:
        return t, 1.0
    if code == 1:
        e = math.exp(g * (t - 1.0))
        return e, g * e
    if code == 2:
        c = math.expm1(g)
        e = math.expm1(g * t)
        return e / c, g * (e + 1.0) / c
    if code == 3:
        acc = 0.0
        dacc = 0.0
        for j in range(pc.shape[1] - 1, -1, -1):
            dacc = dacc * t + acc
            acc = acc * t + pc[row, j]
        return acc, dacc
    # relu
    if t > 1.0:
        t = 1.0
    elif t < -1.0:
        t = -1.0
    a = math.pi - math.acos(t)
    return (math.sqrt(1.0 - t * t) + a * t) / math.pi, a / math.pi


@njit(cache=True, inline="always")
def _eval_dag(t, n_in, ptr, idx, code, gamma, pc, Kb, Tb):
    n = code.shape[0]
    for v in range(n_in):
        Kb[v] = t[v]
        Tb[v] = 0.0
    for u in range(n_in, n):
        s = 0.0
        st = 0.0
        for j in range(ptr[u], ptr[u + 1]):
            c = idx[j]
            s += Kb[c]
            st += Kb[c] + Tb[c]
        m = ptr[u + 1] - ptr[u]
        s /= m
        st /= m
        k, dk = _act2(code[u], gamma[u], pc, u, s)
        Kb[u] = k
        Tb[u] = dk * st
    return Kb[n - 1], Tb[n - 1]


@njit(cache=True, inline="always")
def _correlations(X, i, xo, Y, j, yo, in_off, t):
    for v in range(t.shape[0]):
        a = in_off[v]
        b = in_off[v + 1]
        s = 0.0
        for c in range(a, b):
            s += X[i, xo + c] * Y[j, yo + c]
        t[v] = s / (b - a)


@njit(parallel=True, cache=True)
def flat_matrix(X, Y, sym, ntk, in_off, ptr, idx, code, gamma, pc):
    m = X.shape[0]
    n = Y.shape[0]
    n_in = in_off.shape[0] - 1
    nn = code.shape[0]
    out = np.empty((m, n))
    for i in prange(m):
        t = np.empty(n_in)
        Kb = np.empty(nn)
        Tb = np.empty(nn)
        j0 = i if sym else 0
        for j in range(j0, n):
            _correlations(X, i, 0, Y, j, 0, in_off, t)
            k, th = _eval_dag(t, n_in, ptr, idx, code, gamma, pc, Kb, Tb)
            out[i, j] = th if ntk else k
    if sym:
        for i in range(m):
            for j in range(i + 1, n):
                out[j, i] = out[i, j]
    return out


@njit(cache=True, inline="always")
def _gap_entry(X, i, Y, j, w, block, in_off, ptr, idx, code, gamma, pc,
               hcode, hgamma, hpc, ntk, t, Kb, Tb):
    n_in = in_off.shape[0] - 1
    sk = 0.0
    skt = 0.0
    for a in range(w):
        for b in range(w):
            _correlations(X, i, a * block, Y, j, b * block, in_off, t)
            k, th = _eval_dag(t, n_in, ptr, idx, code, gamma, pc, Kb, Tb)
            sk += k
            skt += k + th
    sk /= w * w
    skt /= w * w
    # readout node, then the chain of single-child nodes above it
    K, dk = _act2(hcode[0], hgamma[0], hpc, 0, sk)
    T = dk * skt
    for h in range(1, hcode.shape[0]):
        Kn, dk = _act2(hcode[h], hgamma[h], hpc, h, K)
        T = dk * (K + T)
        K = Kn
    return T if ntk else K


@njit(parallel=True, cache=True)
def gap_matrix(X, Y, sym, ntk, w, block, in_off, ptr, idx, code, gamma, pc,
               hcode, hgamma, hpc):
    m = X.shape[0]
    n = Y.shape[0]
    n_in = in_off.shape[0] - 1
    nn = code.shape[0]
    out = np.empty((m, n))
    for i in prange(m):
        t = np.empty(n_in)
        Kb = np.empty(nn)
        Tb = np.empty(nn)
        j0 = i if sym else 0
        for j in range(j0, n):
            out[i, j] = _gap_entry(X, i, Y, j, w, block, in_off, ptr, idx, code, gamma, pc,
                                   hcode, hgamma, hpc, ntk, t, Kb, Tb)
    if sym:
        for i in range(m):
            for j in range(i + 1, n):
                out[j, i] = out[i, j]
    return out
