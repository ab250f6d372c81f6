"""Compiled chart fills.

Chart layout: ``P[j, i, s]`` is the mass of symbol ``s`` deriving the span
of length ``j`` starting at 0-based position ``i``; row 0 is unused.
``C[p, i, t]`` holds lexical mass at the two endpoints of contact pair ``p``.
Lexical non-terminals occupy symbol ids ``0 .. n_vt-1``.
"""
import numpy as np
from numba import njit

# backpointer kinds
BP_NONE = 0
BP_LEXICAL = 1
BP_BRANCH = 2
BP_CONTACT_FREE = 3
BP_CONTACT_PAIR = 4


@njit(cache=True, nogil=True)
def _base(x, pair_a, pair_b, emit, n_sym, n_vt):
    n = x.shape[0]
    P = np.zeros((n + 1, n, n_sym))
    npairs = pair_a.shape[0]
    C = np.zeros((npairs, n, n_vt))
    for i in range(n):
        for t in range(n_vt):
            P[1, i, t] = emit[t, x[i]]
    pair_from = np.full(n, -1, dtype=np.int64)
    for p in range(npairs):
        a = pair_a[p]
        b = pair_b[p]
        for t in range(n_vt):
            C[p, a, t] = P[1, a, t]
            C[p, b, t] = P[1, b, t]
        pair_from[a] = p
    for p in range(npairs):
        for t in range(n_vt):
            P[1, pair_a[p], t] = 0.0
            P[1, pair_b[p], t] = 0.0
    return P, C, pair_from


@njit(cache=True, nogil=True)
def inside_chart(x, pair_a, pair_b, emit,
                 b_lhs, b_r1, b_r2, b_p,
                 c_lhs, c_t1, c_mid, c_t2, c_p,
                 n_sym, n_vt):
    P, C, pair_from = _base(x, pair_a, pair_b, emit, n_sym, n_vt)
    n = x.shape[0]
    nb = b_lhs.shape[0]
    nc = c_lhs.shape[0]
    for j in range(2, n + 1):
        for i in range(n - j + 1):
            for k in range(1, j):
                for r in range(nb):
                    left = P[k, i, b_r1[r]]
                    if left == 0.0:
                        continue
                    P[j, i, b_lhs[r]] += b_p[r] * left * P[j - k, i + k, b_r2[r]]
            if j >= 3:
                e = i + j - 1
                for r in range(nc):
                    P[j, i, c_lhs[r]] += (c_p[r] * P[1, i, c_t1[r]]
                                          * P[j - 2, i + 1, c_mid[r]] * P[1, e, c_t2[r]])
                p = pair_from[i]
                if p >= 0 and pair_b[p] == e:
                    for r in range(nc):
                        P[j, i, c_lhs[r]] += (c_p[r] * C[p, i, c_t1[r]]
                                              * P[j - 2, i + 1, c_mid[r]] * C[p, e, c_t2[r]])
    return P, C


@njit(cache=True, nogil=True)
def inside_batch(X, pair_a, pair_b, emit,
                 b_lhs, b_r1, b_r2, b_p,
                 c_lhs, c_t1, c_mid, c_t2, c_p,
                 n_sym, n_vt, start):
    """Root mass for each row of ``X`` under one shared contact map."""
    m, n = X.shape
    out = np.empty(m)
    for row in range(m):
        P, _ = inside_chart(X[row], pair_a, pair_b, emit,
                            b_lhs, b_r1, b_r2, b_p,
                            c_lhs, c_t1, c_mid, c_t2, c_p, n_sym, n_vt)
        out[row] = P[n, 0, start]
    return out


@njit(cache=True, nogil=True)
def viterbi_chart(x, pair_a, pair_b, emit,
                  b_lhs, b_r1, b_r2, b_p,
                  c_lhs, c_t1, c_mid, c_t2, c_p,
                  n_sym, n_vt):
    """Max-product fill; ties keep the first candidate in scan order."""
    P, C, pair_from = _base(x, pair_a, pair_b, emit, n_sym, n_vt)
    n = x.shape[0]
    nb = b_lhs.shape[0]
    nc = c_lhs.shape[0]
    bp_kind = np.zeros((n + 1, n, n_sym), dtype=np.int64)
    bp_rule = np.full((n + 1, n, n_sym), -1, dtype=np.int64)
    bp_split = np.zeros((n + 1, n, n_sym), dtype=np.int64)
    for i in range(n):
        for t in range(n_vt):
            if P[1, i, t] > 0.0:
                bp_kind[1, i, t] = BP_LEXICAL
    for j in range(2, n + 1):
        for i in range(n - j + 1):
            for k in range(1, j):
                for r in range(nb):
                    left = P[k, i, b_r1[r]]
                    if left == 0.0:
                        continue
                    cand = b_p[r] * left * P[j - k, i + k, b_r2[r]]
                    s = b_lhs[r]
                    if cand > P[j, i, s]:
                        P[j, i, s] = cand
                        bp_kind[j, i, s] = BP_BRANCH
                        bp_rule[j, i, s] = r
                        bp_split[j, i, s] = k
            if j >= 3:
                e = i + j - 1
                for r in range(nc):
                    cand = (c_p[r] * P[1, i, c_t1[r]]
                            * P[j - 2, i + 1, c_mid[r]] * P[1, e, c_t2[r]])
                    s = c_lhs[r]
                    if cand > P[j, i, s]:
                        P[j, i, s] = cand
                        bp_kind[j, i, s] = BP_CONTACT_FREE
                        bp_rule[j, i, s] = r
                p = pair_from[i]
                if p >= 0 and pair_b[p] == e:
                    for r in range(nc):
                        cand = (c_p[r] * C[p, i, c_t1[r]]
                                * P[j - 2, i + 1, c_mid[r]] * C[p, e, c_t2[r]])
                        s = c_lhs[r]
                        if cand > P[j, i, s]:
                            P[j, i, s] = cand
                            bp_kind[j, i, s] = BP_CONTACT_PAIR
                            bp_rule[j, i, s] = r
    return P, C, bp_kind, bp_rule, bp_split
