"""Exhaustive parse-tree enumeration for small grammars.

Works top-down from the start symbol over explicit spans and multiplies
rule probabilities along each derivation. Deliberately shares no code with
the chart kernels so it can serve as ground truth for them.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .contacts import DEFAULT_DELTA, is_consistent
from .grammar import BRANCHING, CONTACT, LEXICAL
from .trees import Tree


class BudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class EnumerationBudget:
    max_sequence_length: int = 8
    max_tree_count: int = 200_000


def enumerate_trees(x, grammar, budget=EnumerationBudget()):
    """Every complete parse tree of ``x`` with its derivation probability."""
    n = len(x)
    if n > budget.max_sequence_length:
        raise BudgetExceeded(f"sequence length {n} > {budget.max_sequence_length}")
    names = grammar.names
    symbols = grammar.alphabet.symbols
    by_lhs = {}
    for rule in grammar.rules:
        by_lhs.setdefault(rule.lhs, []).append(rule)
    produced = 0

    @lru_cache(maxsize=None)
    def derive(sym, i, j):
        # trees rooted at `sym` spanning x[i:j]
        nonlocal produced
        out = []
        for rule in by_lhs.get(sym, ()):
            if rule.kind == LEXICAL:
                if j - i == 1 and symbols[rule.rhs[0]] == x[i]:
                    leaf = Tree(x[i], (), i, j)
                    out.append((Tree(names[sym], (leaf,), i, j), rule.prob))
            elif rule.kind == BRANCHING:
                left_sym, right_sym = rule.rhs
                for k in range(i + 1, j):
                    for lt, lp in derive(left_sym, i, k):
                        for rt, rp in derive(right_sym, k, j):
                            out.append((Tree(names[sym], (lt, rt), i, j), rule.prob * lp * rp))
            elif rule.kind == CONTACT:
                if j - i < 3:
                    continue
                first, middle, last = rule.rhs
                for ft, fp in derive(first, i, i + 1):
                    for mt, mp in derive(middle, i + 1, j - 1):
                        for lt, lp in derive(last, j - 1, j):
                            out.append((Tree(names[sym], (ft, mt, lt), i, j),
                                        rule.prob * fp * mp * lp))
        produced += len(out)
        if produced > budget.max_tree_count:
            raise BudgetExceeded(f"more than {budget.max_tree_count} partial trees")
        return tuple(out)

    if n == 0:
        return []
    return list(derive(grammar.start, 0, n))


def _skeleton_tree(key, x):
    # leaves are ints (positions); internal nodes are tuples of child keys
    if isinstance(key, int):
        return Tree(x[key], (), key, key + 1)
    children = tuple(_skeleton_tree(k, x) for k in key)
    return Tree(None, children, children[0].start, children[-1].end)


def enumerate_skeletons(x, grammar, budget=EnumerationBudget()):
    """Map each unlabelled tree of ``x`` to the summed probability of its labelled trees.

    Labelled trees sharing a skeleton are merged as soon as they are built,
    which keeps the enumeration small enough for exhaustive sweeps.
    """
    n = len(x)
    if n > budget.max_sequence_length:
        raise BudgetExceeded(f"sequence length {n} > {budget.max_sequence_length}")
    symbols = grammar.alphabet.symbols
    by_lhs = {}
    for rule in grammar.rules:
        by_lhs.setdefault(rule.lhs, []).append(rule)
    produced = 0

    @lru_cache(maxsize=None)
    def derive(sym, i, j):
        nonlocal produced
        out = {}
        for rule in by_lhs.get(sym, ()):
            if rule.kind == LEXICAL:
                if j - i == 1 and symbols[rule.rhs[0]] == x[i]:
                    key = (i,)
                    out[key] = out.get(key, 0.0) + rule.prob
            elif rule.kind == BRANCHING:
                for k in range(i + 1, j):
                    left = derive(rule.rhs[0], i, k)
                    if not left:
                        continue
                    right = derive(rule.rhs[1], k, j)
                    for ls, lp in left.items():
                        for rs, rp in right.items():
                            key = (ls, rs)
                            out[key] = out.get(key, 0.0) + rule.prob * lp * rp
            elif rule.kind == CONTACT and j - i >= 3:
                first = derive(rule.rhs[0], i, i + 1)
                middle = derive(rule.rhs[1], i + 1, j - 1)
                last = derive(rule.rhs[2], j - 1, j)
                for fs, fp in first.items():
                    for ms, mp in middle.items():
                        for ls, lp in last.items():
                            key = (fs, ms, ls)
                            out[key] = out.get(key, 0.0) + rule.prob * fp * mp * lp
        produced += len(out)
        if produced > budget.max_tree_count:
            raise BudgetExceeded(f"more than {budget.max_tree_count} partial skeletons")
        return out

    if n == 0:
        return {}
    return {_skeleton_tree(key, x): p for key, p in derive(grammar.start, 0, n).items()}


def brute_inside(x, grammar, budget=EnumerationBudget()):
    """Sum of all parse-tree probabilities, via skeleton enumeration."""
    return sum(enumerate_skeletons(x, grammar, budget).values())


def brute_inside_constrained(x, cmap, grammar, delta=DEFAULT_DELTA, budget=EnumerationBudget()):
    """Sum over skeletons consistent with ``cmap`` at leaf distance ``<= delta``."""
    return sum(
        p for skeleton, p in enumerate_skeletons(x, grammar, budget).items()
        if is_consistent(skeleton, cmap, delta)
    )


def brute_inside_trees(x, grammar, cmap=None, delta=DEFAULT_DELTA, budget=EnumerationBudget()):
    """Same sums computed tree by tree with :func:`enumerate_trees`."""
    return sum(
        p for tree, p in enumerate_trees(x, grammar, budget)
        if cmap is None or is_consistent(tree, cmap, delta)
    )


def brute_neighborhood_mass(cmap, n, grammar, delta=DEFAULT_DELTA, budget=EnumerationBudget()):
    """Sum of ``brute_inside_constrained`` over every sequence of length ``n``."""
    from itertools import product

    return sum(
        brute_inside_constrained("".join(x), cmap, grammar, delta, budget)
        for x in product(grammar.alphabet.symbols, repeat=n)
    )
