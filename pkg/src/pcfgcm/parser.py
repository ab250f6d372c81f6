"""Inside, contact-constrained inside, Viterbi and neighbourhood mass."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .contacts import ContactMap, ContactMapError, validate
from .grammar import BRANCHING, CONTACT, LEXICAL
from .trees import Tree, ust_of  # noqa: F401  (re-exported)


class ParseError(ValueError):
    pass


class NoParse(ParseError):
    """No tree (consistent with the map, if any) derives the sequence."""


@dataclass(frozen=True)
class ParseChart:
    """``p[j, i, s]``: span length ``j`` from 0-based ``i``; ``c[q, i, t]``: contact lexical mass."""

    p: np.ndarray
    c: np.ndarray
    start: int

    @property
    def n(self):
        return self.p.shape[1]

    @property
    def total(self):
        return float(self.p[self.n, 0, self.start])


class RuleTables:
    """Index arrays for the kernels; probabilities are supplied separately.

    One instance per rule set, so the GA can evaluate many probability
    vectors without rebuilding grammars.
    """

    def __init__(self, grammar):
        self.n_vt = grammar.n_vt
        self.n_sym = grammar.n_symbols
        self.n_terms = len(grammar.alphabet)
        self.start = grammar.start
        kinds = np.array([r.kind for r in grammar.rules])
        self.lex_idx = np.flatnonzero(kinds == LEXICAL)
        self.bra_idx = np.flatnonzero(kinds == BRANCHING)
        self.con_idx = np.flatnonzero(kinds == CONTACT)
        rules = grammar.rules

        def col(idx, f):
            return np.array([f(rules[k]) for k in idx], dtype=np.int64)

        self.lex_lhs = col(self.lex_idx, lambda r: r.lhs)
        self.lex_term = col(self.lex_idx, lambda r: r.rhs[0])
        self.b_lhs = col(self.bra_idx, lambda r: r.lhs)
        self.b_r1 = col(self.bra_idx, lambda r: r.rhs[0])
        self.b_r2 = col(self.bra_idx, lambda r: r.rhs[1])
        self.c_lhs = col(self.con_idx, lambda r: r.lhs)
        self.c_t1 = col(self.con_idx, lambda r: r.rhs[0])
        self.c_mid = col(self.con_idx, lambda r: r.rhs[1])
        self.c_t2 = col(self.con_idx, lambda r: r.rhs[2])

    def emission(self, probs):
        emit = np.zeros((self.n_vt, self.n_terms))
        np.add.at(emit, (self.lex_lhs, self.lex_term), probs[self.lex_idx])
        return emit

    def args(self, probs, emit=None):
        """Kernel arguments after the sequence and pair arrays."""
        probs = np.asarray(probs, dtype=float)
        if emit is None:
            emit = self.emission(probs)
        return (
            emit,
            self.b_lhs, self.b_r1, self.b_r2, probs[self.bra_idx],
            self.c_lhs, self.c_t1, self.c_mid, self.c_t2, probs[self.con_idx],
            self.n_sym, self.n_vt,
        )


def tables(grammar):
    """Cached ``RuleTables`` for ``grammar``."""
    cached = grammar.__dict__.get("_rule_tables")
    if cached is None:
        cached = RuleTables(grammar)
        grammar.__dict__["_rule_tables"] = cached
    return cached


_NO_PAIRS = np.zeros(0, dtype=np.int64)


def pair_arrays(cmap):
    """0-based endpoint arrays for the kernels."""
    if cmap is None or not cmap.pairs:
        return _NO_PAIRS, _NO_PAIRS
    pairs = cmap.sorted_pairs()
    a = np.array([i - 1 for i, _ in pairs], dtype=np.int64)
    b = np.array([j - 1 for _, j in pairs], dtype=np.int64)
    return a, b


def encode(x, grammar):
    if isinstance(x, np.ndarray):
        codes = x.astype(np.int64, copy=False)
    else:
        codes = grammar.alphabet.encode(x)
    if codes.shape[0] < 2:
        raise ParseError(f"sequence length {codes.shape[0]} < 2")
    return codes


def check_map(cmap, n):
    if cmap is None:
        return
    if cmap.length != n:
        raise ContactMapError(f"map length {cmap.length} != sequence length {n}")
    problems = validate(cmap)
    if problems:
        raise ContactMapError("; ".join(v.message for v in problems))


# -- inside ----------------------------------------------------------------

def chart(x, grammar, cmap=None):
    """Fill and return the full inside chart (constrained when ``cmap`` given)."""
    codes = encode(x, grammar)
    check_map(cmap, len(codes))
    tab = tables(grammar)
    a, b = pair_arrays(cmap)
    p, c = K.inside_chart(codes, a, b, *tab.args(grammar.probs))
    return ParseChart(p, c, grammar.start)


def inside(x, grammar):
    """Total probability of all parse trees of ``x``."""
    return chart(x, grammar).total


def inside_constrained(x, cmap, grammar):
    """Total probability of the parse trees of ``x`` consistent with ``cmap``."""
    return chart(x, grammar, cmap).total


def inside_many(sequences, grammar, cmap=None, probs=None):
    """Vectorised inside over equal-length encoded sequences sharing ``cmap``."""
    X = np.asarray(sequences, dtype=np.int64)
    tab = tables(grammar)
    a, b = pair_arrays(cmap)
    p = grammar.probs if probs is None else probs
    return K.inside_batch(X, a, b, *tab.args(p), tab.start)


def neighborhood_mass(cmap, n, grammar, probs=None):
    """Total structural probability of map-consistent skeletons of length ``n``.

    Lexical mass is set to one for every lexical non-terminal, which equals
    the sum over all sequences of length ``n`` for a proper grammar.
    """
    if cmap is None:
        cmap = ContactMap.empty(n)
    check_map(cmap, n)
    if n < 2:
        raise ParseError(f"sequence length {n} < 2")
    tab = tables(grammar)
    p = grammar.probs if probs is None else probs
    emit = np.ones((tab.n_vt, tab.n_terms))
    codes = np.zeros((1, n), dtype=np.int64)
    a, b = pair_arrays(cmap)
    return float(K.inside_batch(codes, a, b, *tab.args(p, emit=emit), tab.start)[0])


def structural_chart(cmap, n, grammar):
    """Chart of :func:`neighborhood_mass` (lexical mass one everywhere)."""
    check_map(cmap, n)
    tab = tables(grammar)
    emit = np.ones((tab.n_vt, tab.n_terms))
    a, b = pair_arrays(cmap)
    p, c = K.inside_chart(np.zeros(n, dtype=np.int64), a, b,
                          *tab.args(grammar.probs, emit=emit))
    return ParseChart(p, c, grammar.start)


# -- viterbi ---------------------------------------------------------------

def _build_tree(grammar, codes, bp_kind, bp_rule, bp_split, j, i, s):
    names = grammar.names
    symbols = grammar.alphabet.symbols
    tab = tables(grammar)

    def leaf_node(t, pos):
        t, pos = int(t), int(pos)
        return Tree(names[t], (Tree(symbols[codes[pos]], (), pos, pos + 1),), pos, pos + 1)

    def build(j, i, s):
        j, i, s = int(j), int(i), int(s)
        if j == 1:
            return leaf_node(s, i)
        kind = bp_kind[j, i, s]
        r = bp_rule[j, i, s]
        if kind == K.BP_BRANCH:
            k = bp_split[j, i, s]
            children = (build(k, i, tab.b_r1[r]), build(j - k, i + k, tab.b_r2[r]))
        elif kind in (K.BP_CONTACT_FREE, K.BP_CONTACT_PAIR):
            e = i + j - 1
            children = (
                leaf_node(tab.c_t1[r], i),
                build(j - 2, i + 1, tab.c_mid[r]),
                leaf_node(tab.c_t2[r], e),
            )
        else:
            raise NoParse("missing backpointer")
        return Tree(names[s], children, i, i + j)

    return build(j, i, s)


def viterbi_constrained(x, cmap, grammar):
    """Most probable tree consistent with ``cmap`` and its probability.

    Raises ``NoParse`` when no consistent tree exists.
    """
    codes = encode(x, grammar)
    check_map(cmap, len(codes))
    tab = tables(grammar)
    a, b = pair_arrays(cmap)
    p, _, bp_kind, bp_rule, bp_split = K.viterbi_chart(codes, a, b, *tab.args(grammar.probs))
    n = len(codes)
    best = float(p[n, 0, grammar.start])
    if best <= 0.0:
        raise NoParse("no parse tree" + (" consistent with the contact map" if cmap and cmap.pairs else ""))
    return _build_tree(grammar, codes, bp_kind, bp_rule, bp_split, n, 0, grammar.start), best


def viterbi(x, grammar):
    """Most probable parse tree of ``x`` and its probability."""
    return viterbi_constrained(x, None, grammar)


def tree_probability(tree, grammar):
    """Product of rule probabilities used in ``tree`` (0 if a rule is missing)."""
    ids = {name: k for k, name in enumerate(grammar.names)}
    lookup = {}
    for r in grammar.rules:
        lookup[(r.lhs, r.rhs)] = r.prob
    term = grammar.alphabet.index
    prob = 1.0
    for node in tree.nodes():
        if node.is_leaf:
            continue
        lhs = ids[node.label]
        kids = node.children
        if len(kids) == 1 and kids[0].is_leaf:
            rhs = (term[kids[0].label],)
        else:
            rhs = tuple(ids[c.label] for c in kids)
        prob *= lookup.get((lhs, rhs), 0.0)
    return prob
