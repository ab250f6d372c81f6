import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pcfgcm import grammar as g
from pcfgcm.grammar import BRANCHING, CONTACT, LEXICAL, GrammarError

from conftest import random_grammar


def counts(grammar):
    return tuple(len(grammar.rules_of(k)) for k in (LEXICAL, BRANCHING, CONTACT))


def test_protein_alphabet_has_twenty_symbols():
    assert len(g.Alphabet.protein()) == 20


def test_full_protein_grammar_rule_counts():
    full = g.build_full_grammar(g.Alphabet.protein(), 3, 4)
    assert counts(full) == (60, 196, 144)


def test_tiny_full_grammar_rule_counts():
    full = g.build_full_grammar(g.Alphabet(("a", "b")), 1, 1)
    assert counts(full) == (2, 4, 1)


def test_without_contact_flag():
    full = g.build_full_grammar(g.Alphabet(("a", "b")), 1, 1, with_contact_rules=False)
    assert full.rules_of(CONTACT) == []


@pytest.mark.parametrize("n_terms,n_vt,n_vn", list(itertools.product([1, 2, 5], [1, 2, 3], [1, 2, 4])))
def test_rule_count_formula(n_terms, n_vt, n_vn):
    full = g.build_full_grammar(g.Alphabet(tuple("abcde"[:n_terms])), n_vt, n_vn)
    assert counts(full) == (
        n_vt * n_terms,
        n_vn * (n_vt + n_vn) ** 2,
        n_vn * n_vt ** 2 * n_vn,
    )
    full.check_proper()


def test_zero_counts_rejected():
    with pytest.raises(GrammarError):
        g.build_full_grammar(g.Alphabet(("a",)), 0, 1)
    with pytest.raises(GrammarError):
        g.build_full_grammar(g.Alphabet(("a",)), 1, 0)


def test_alphabet_rejects_duplicates_and_empty():
    with pytest.raises(GrammarError):
        g.Alphabet(("a", "a"))
    with pytest.raises(GrammarError):
        g.Alphabet(())


def test_normalize_lexical_group(g1):
    # rules: T->a, T->b, S->TT, S->ST
    out = g.normalize([3, 1, 1, 1], g1)
    assert out.probs[:2].tolist() == [0.75, 0.25]


def test_normalize_mixed_group(g2):
    out = g.normalize([1, 1, 1, 1, 2], g2)
    assert out.probs[2:].tolist() == [0.25, 0.25, 0.5]


def test_normalize_all_zero_group(g1):
    with pytest.raises(GrammarError):
        g.normalize([0, 0, 1, 1], g1)


def test_round_trip_fixture(g2):
    assert g.loads(g.dumps(g2)) == g2


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_round_trip_random(seed):
    grammar = random_grammar(np.random.default_rng(seed), n_terms=3, max_vt=3, max_vn=3)
    again = g.loads(g.dumps(grammar))
    assert again == grammar
    assert np.array_equal(again.probs, grammar.probs)


def test_improper_document_rejected():
    text = """alphabet: a b
vt: T
vn: S
start: S
lexical T -> a : 0.6
lexical T -> b : 0.5
branching S -> T T : 1.0
"""
    with pytest.raises(GrammarError, match="improper"):
        g.loads(text)


def test_undeclared_nonterminal_has_line_number():
    text = """alphabet: a b
vt: T
vn: S
start: S
lexical T -> a : 1.0
branching S -> T X : 1.0
"""
    with pytest.raises(GrammarError) as err:
        g.loads(text)
    assert err.value.line == 6


def test_comments_and_blank_lines_ignored(g1):
    text = "# header comment\n\n" + g.dumps(g1).replace("\n", "  # trailing\n", 1)
    assert g.loads(text) == g1


def test_rule_shape_checks(g1):
    bad = g.Rule(CONTACT, g1.start, (0, 0, 0), 1.0)  # middle must be structural
    with pytest.raises(GrammarError):
        g.Grammar(g1.alphabet, g1.vt, g1.vn, g1.start, g1.rules[:2] + (bad,))


def test_shape_invariants_scan():
    full = g.build_full_grammar(g.Alphabet(tuple("abc")), 2, 3)
    for r in full.rules:
        if r.kind == LEXICAL:
            assert full.is_lexical_nt(r.lhs) and len(r.rhs) == 1
        elif r.kind == BRANCHING:
            assert full.is_structural_nt(r.lhs) and len(r.rhs) == 2
        else:
            assert full.is_structural_nt(r.lhs)
            assert full.is_lexical_nt(r.rhs[0]) and full.is_structural_nt(r.rhs[1])
            assert full.is_lexical_nt(r.rhs[2])


def test_without_contact_rules_renormalises(g2):
    bar = g2.without_contact_rules()
    assert not bar.has_contact_rules
    np.testing.assert_allclose(bar.probs[2:], [0.5 / 0.7, 0.2 / 0.7])


def test_grammar_is_immutable(g1):
    with pytest.raises(Exception):
        g1.start = 0


def test_protein_alphabet_shorthand():
    doc = "alphabet: protein\nvt: l1\nvn: v0\nstart: v0\nlexical l1 -> A : 1.0\nbranching v0 -> l1 l1 : 1.0\n"
    grammar = g.loads(doc)
    assert grammar.alphabet == g.Alphabet.protein()
