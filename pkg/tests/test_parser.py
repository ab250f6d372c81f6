import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pcfgcm import oracle, parser
from pcfgcm.contacts import ContactMap, ContactMapError, is_consistent
from pcfgcm.parser import NoParse, ParseError
from pcfgcm.trees import parse_bracket, ust_of

from conftest import random_grammar, random_valid_map

ABBA = ContactMap(4, {(1, 4)})


def test_fixture_values(g1, g2):
    assert parser.inside("ab", g1) == pytest.approx(0.168, abs=1e-12)
    assert parser.inside("aab", g1) == pytest.approx(0.03024, abs=1e-12)
    assert parser.inside("abba", g2) == pytest.approx(0.009792, abs=1e-12)
    assert parser.inside_constrained("abba", ABBA, g2) == pytest.approx(0.00864, abs=1e-12)


def test_empty_map_equals_inside(g2):
    for x in ("ab", "abba", "babab"):
        assert parser.inside_constrained(x, ContactMap.empty(len(x)), g2) == parser.inside(x, g2)
        assert parser.inside_constrained(x, None, g2) == parser.inside(x, g2)


def test_grammar_without_contact_rules_gives_zero(g2_bar):
    assert parser.inside_constrained("abba", ABBA, g2_bar) == 0.0
    assert parser.inside("abba", g2_bar) > 0


def test_contact_positions_zeroed_in_p1(g2):
    cmap = ContactMap(7, {(2, 6)})
    ch = parser.chart("abbabab", g2, cmap)
    assert not ch.p[1, 1].any() and not ch.p[1, 5].any()
    assert ch.p[1, 0].any() and ch.c[0, 1].any() and ch.c[0, 5].any()
    assert not ch.c[0, 0].any()
    assert ((0 <= ch.p) & (ch.p <= 1)).all()


def test_errors(g1, g2):
    with pytest.raises(ParseError):
        parser.inside("a", g1)
    with pytest.raises(ValueError):
        parser.inside("abz", g1)
    with pytest.raises(ContactMapError):
        parser.inside_constrained("abb", ABBA, g2)
    with pytest.raises(ContactMapError):
        parser.inside_constrained("abbab", ContactMap(5, {(1, 3)}), g2)


def test_viterbi_examples(g1, g2):
    tree, p = parser.viterbi("abba", g2)
    assert p == pytest.approx(0.00864, abs=1e-12)
    assert len(tree.children) == 3
    assert tree.to_bracket() == "(S (T a) (S (T b) (T b)) (T a))"
    tree_c, p_c = parser.viterbi_constrained("abba", ABBA, g2)
    assert tree_c == tree and p_c == p
    tree1, p1 = parser.viterbi("ab", g1)
    assert p1 == pytest.approx(0.168, abs=1e-12)
    assert tree1.to_bracket() == "(S (T a) (T b))"


def test_viterbi_no_parse(g2_bar):
    with pytest.raises(NoParse):
        parser.viterbi_constrained("abba", ABBA, g2_bar)


def test_tree_probability_rescoring(g2):
    assert parser.tree_probability(parse_bracket("(S (S (S (T a) (T b)) (T b)) (T a))"), g2) == pytest.approx(0.001152)
    tree, p = parser.viterbi("abbaab", g2)
    assert parser.tree_probability(tree, g2) == pytest.approx(p, rel=1e-12)


def test_neighborhood_examples(g2):
    assert parser.neighborhood_mass(ABBA, 4, g2) == pytest.approx(0.15, abs=1e-12)
    assert parser.neighborhood_mass(ContactMap.empty(2), 2, g2) == pytest.approx(0.5, abs=1e-12)


def test_neighborhood_identity_g2(g2):
    for n, cmap in [(4, ABBA), (5, ContactMap(5, {(1, 5)})), (5, ContactMap(5, {(2, 5)}))]:
        total = sum(parser.inside_constrained("".join(x), cmap, g2)
                    for x in itertools.product("ab", repeat=n))
        assert parser.neighborhood_mass(cmap, n, g2) == pytest.approx(total, rel=1e-10)


def test_ust_of_contact_tree(g2):
    tree, _ = parser.viterbi("abba", g2)
    skel = ust_of(tree)
    assert len(skel.children) == 3
    assert skel.yield_() == "abba"


def test_inside_many_matches_inside(g2):
    seqs = ["abba", "aaab", "baba"]
    codes = [parser.encode(x, g2) for x in seqs]
    batch = parser.inside_many(codes, g2, ABBA)
    assert batch == pytest.approx([parser.inside_constrained(x, ABBA, g2) for x in seqs], rel=1e-14)


# -- oracle sweeps and invariants -------------------------------------------

@pytest.mark.parametrize("seed", range(20))
def test_oracle_three_letters(seed):
    rng = np.random.default_rng(1000 + seed)
    grammar = random_grammar(rng, n_terms=3)
    for n in (2, 3, 5, 7):
        cmap = random_valid_map(rng, n)
        for _ in range(3):
            x = "".join(rng.choice(list("abc"), size=n))
            assert math.isclose(parser.inside(x, grammar), oracle.brute_inside(x, grammar),
                                rel_tol=1e-10, abs_tol=1e-300)
            assert math.isclose(parser.inside_constrained(x, cmap, grammar),
                                oracle.brute_inside_constrained(x, cmap, grammar),
                                rel_tol=1e-10, abs_tol=1e-300)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_invariants(seed):
    rng = np.random.default_rng(seed)
    grammar = random_grammar(rng)
    n = int(rng.integers(4, 10))
    x = "".join(rng.choice(list("ab"), size=n))
    big = random_valid_map(rng, n, max_pairs=3)
    pairs = sorted(big.pairs)
    small = ContactMap(n, frozenset(pairs[: len(pairs) // 2]))
    full = parser.inside(x, grammar)
    p_small = parser.inside_constrained(x, small, grammar)
    p_big = parser.inside_constrained(x, big, grammar)
    assert p_big <= p_small * (1 + 1e-12) and p_small <= full * (1 + 1e-12)
    for cmap, total in ((None, full), (big, p_big)):
        try:
            tree, best = parser.viterbi_constrained(x, cmap, grammar)
        except NoParse:
            assert total == 0.0
            continue
        assert best <= total * (1 + 1e-12)
        assert tree.yield_() == x
        assert parser.tree_probability(tree, grammar) == pytest.approx(best, rel=1e-10)
        if cmap is not None:
            assert is_consistent(tree, cmap)


def test_viterbi_equals_inside_iff_single_parse(g1, g2):
    assert parser.viterbi("aab", g1)[1] == pytest.approx(parser.inside("aab", g1), rel=1e-14)
    assert parser.viterbi("abba", g2)[1] < parser.inside("abba", g2)


@pytest.mark.parametrize("seed", range(10))
def test_normalization(seed):
    rng = np.random.default_rng(seed)
    grammar = random_grammar(rng, max_vn=1)
    total = sum(parser.inside("".join(x), grammar)
                for n in range(2, 6) for x in itertools.product("ab", repeat=n))
    assert total <= 1 + 1e-12
