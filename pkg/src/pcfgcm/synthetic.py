"""Synthetic motif samples drawn from a known grammar.

``sample_constrained`` draws (sequence, tree) pairs from the grammar's
distribution restricted to trees consistent with a contact map, using the
structural chart for exact top-down sampling.
"""
from __future__ import annotations

import numpy as np

from . import parser
from .contacts import ContactMap
from .trees import Tree


def sample_constrained(grammar, cmap, count, rng):
    """``count`` pairs ``(sequence, tree)`` with trees consistent with ``cmap``."""
    n = cmap.length
    chart = parser.structural_chart(cmap, n, grammar)
    P, C = chart.p, chart.c
    if P[n, 0, grammar.start] <= 0:
        raise ValueError("grammar cannot realise the contact map")
    tab = parser.tables(grammar)
    probs = grammar.probs
    b_p = probs[tab.bra_idx]
    c_p = probs[tab.con_idx]
    emit = tab.emission(probs)
    names = grammar.names
    symbols = grammar.alphabet.symbols
    pair_at = {i - 1: (q, j - 1) for q, (i, j) in enumerate(cmap.sorted_pairs())}

    def leaf(t, pos):
        a = rng.choice(len(symbols), p=emit[t] / emit[t].sum())
        return Tree(names[t], (Tree(symbols[a], (), pos, pos + 1),), pos, pos + 1)

    def draw(j, i, s):
        if j == 1:
            return leaf(s, i)
        options, weights = [], []
        for r in range(len(b_p)):
            if tab.b_lhs[r] != s:
                continue
            for k in range(1, j):
                w = b_p[r] * P[k, i, tab.b_r1[r]] * P[j - k, i + k, tab.b_r2[r]]
                if w > 0:
                    options.append(("b", r, k))
                    weights.append(w)
        if j >= 3:
            e = i + j - 1
            paired = pair_at.get(i)
            for r in range(len(c_p)):
                if tab.c_lhs[r] != s:
                    continue
                mid = P[j - 2, i + 1, tab.c_mid[r]]
                w = c_p[r] * P[1, i, tab.c_t1[r]] * mid * P[1, e, tab.c_t2[r]]
                if w > 0:
                    options.append(("c", r, 0))
                    weights.append(w)
                if paired is not None and paired[1] == e:
                    q = paired[0]
                    w = c_p[r] * C[q, i, tab.c_t1[r]] * mid * C[q, e, tab.c_t2[r]]
                    if w > 0:
                        options.append(("c", r, 0))
                        weights.append(w)
        weights = np.asarray(weights)
        kind, r, k = options[rng.choice(len(options), p=weights / weights.sum())]
        if kind == "b":
            children = (draw(k, i, tab.b_r1[r]), draw(j - k, i + k, tab.b_r2[r]))
        else:
            e = i + j - 1
            children = (leaf(tab.c_t1[r], i), draw(j - 2, i + 1, tab.c_mid[r]),
                        leaf(tab.c_t2[r], e))
        return Tree(names[s], children, i, i + j)

    out = []
    for _ in range(count):
        tree = draw(n, 0, grammar.start)
        out.append((tree.yield_(), tree))
    return out


def sample_background(length, null, count, rng):
    """``count`` i.i.d. sequences of ``length`` symbols from a null model."""
    symbols = np.array(null.alphabet.symbols)
    draws = rng.choice(len(symbols), size=(count, length), p=np.asarray(null.freqs))
    return ["".join(symbols[row]) for row in draws]


def planted_dataset(grammar, cmap, n_positives, n_long_negatives, negative_length, null, rng):
    """Positives from the constrained grammar, negatives cut from background sequences."""
    from .dataio import Dataset, cut_negative_records

    positives = [(f"pos{k:04d}", seq)
                 for k, (seq, _) in enumerate(sample_constrained(grammar, cmap, n_positives, rng))]
    long_seqs = [(f"bg{k:04d}", s) for k, s in
                 enumerate(sample_background(negative_length, null, n_long_negatives, rng))]
    negatives = cut_negative_records(long_seqs, cmap.length)
    return Dataset(grammar.alphabet, positives, negatives, shared_map=cmap,
                   full_map=ContactMap(cmap.length, cmap.pairs), notes="synthetic")
